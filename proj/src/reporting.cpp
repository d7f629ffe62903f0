#include "davg/reporting.hpp"

#include "davg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>

namespace davg {

namespace {

std::string fixed6(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<const MetricsRecord*> final_alive(const MetricsLog& log)
{
    std::vector<const MetricsRecord*> out;
    const int last = log.last_round();
    for (const auto& r : log.records) {
        if (r.round == last && r.alive) {
            out.push_back(&r);
        }
    }
    return out;
}

} // namespace

std::vector<SeriesPoint> mean_accuracy_series(const MetricsLog& log, const NodeFilter& filter)
{
    std::vector<SeriesPoint> out;
    double sum = 0.0;
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        const auto& r = log.records[k];
        if (out.empty() || out.back().round != r.round) {
            if (!out.empty() && out.back().count > 0) {
                out.back().mean = sum / static_cast<double>(out.back().count);
            }
            out.push_back({r.round, std::nullopt, 0});
            sum = 0.0;
        }
        if (r.alive && (!filter || filter(r.node))) {
            sum += r.accuracy;
            ++out.back().count;
        }
    }
    if (!out.empty() && out.back().count > 0) {
        out.back().mean = sum / static_cast<double>(out.back().count);
    }
    return out;
}

std::vector<NodeId> worst_performers(const MetricsLog& log, std::size_t k)
{
    auto alive = final_alive(log);
    if (k > alive.size()) {
        throw InvalidParameter("worst_performers: k=" + std::to_string(k) + " exceeds "
                               + std::to_string(alive.size()) + " alive nodes");
    }
    std::stable_sort(alive.begin(), alive.end(), [](const MetricsRecord* a, const MetricsRecord* b) {
        if (a->accuracy != b->accuracy) {
            return a->accuracy < b->accuracy;
        }
        return a->node < b->node;
    });
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(alive[i]->node);
    }
    return out;
}

std::vector<NodeId> worst_performers_quantile(const MetricsLog& log, double quantile)
{
    if (!(quantile > 0.0 && quantile <= 1.0)) {
        throw InvalidParameter("worst_performers: quantile must lie in (0, 1]");
    }
    const auto alive = static_cast<double>(final_alive(log).size());
    const double raw = quantile * alive;
    const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
    return worst_performers(log, std::max<std::size_t>(k, alive > 0 ? 1 : 0));
}

void check_compatible(const MetricsLog& a, const MetricsLog& b)
{
    auto mismatch = [](const std::string& field, const std::string& x, const std::string& y) {
        throw ProvenanceMismatch("runs differ in " + field + " (" + x + " vs " + y + ")");
    };
    const auto& ca = a.config;
    const auto& cb = b.config;
    if (ca.topology.seed != cb.topology.seed) {
        mismatch("topology.seed", std::to_string(ca.topology.seed), std::to_string(cb.topology.seed));
    }
    if (ca.topology.nodes != cb.topology.nodes) {
        mismatch("topology.nodes", std::to_string(ca.topology.nodes),
                 std::to_string(cb.topology.nodes));
    }
    if (ca.topology.attachment != cb.topology.attachment) {
        mismatch("topology.m", std::to_string(ca.topology.attachment),
                 std::to_string(cb.topology.attachment));
    }
    if (ca.data.seed != cb.data.seed) {
        mismatch("data.seed", std::to_string(ca.data.seed), std::to_string(cb.data.seed));
    }
    if (ca.disruption.tau_drop != cb.disruption.tau_drop) {
        mismatch("disruption.tau_drop", std::to_string(ca.disruption.tau_drop),
                 std::to_string(cb.disruption.tau_drop));
    }
}

ComparisonTable scatter(const MetricsLog& case1, const MetricsLog& case2, int round)
{
    check_compatible(case1, case2);
    std::map<NodeId, const MetricsRecord*> second;
    for (const auto& r : case2.records) {
        if (r.round == round && r.alive) {
            second[r.node] = &r;
        }
    }
    ComparisonTable table{round, case1.config.disruption.tau_drop, {}};
    for (const auto& r : case1.records) {
        if (r.round != round || !r.alive) {
            continue;
        }
        auto it = second.find(r.node);
        if (it == second.end()) {
            continue;
        }
        table.rows.push_back({r.node, r.accuracy, it->second->accuracy, r.degree_post,
                              it->second->accuracy - r.accuracy});
    }
    return table;
}

std::vector<AccuracyCluster> cluster_summary(const MetricsLog& log, double threshold)
{
    auto alive = final_alive(log);
    std::stable_sort(alive.begin(), alive.end(), [](const MetricsRecord* a, const MetricsRecord* b) {
        return a->accuracy < b->accuracy;
    });
    std::vector<AccuracyCluster> out;
    std::vector<const MetricsRecord*> group;
    auto flush = [&] {
        if (group.empty()) {
            return;
        }
        AccuracyCluster c;
        double sum = 0.0;
        c.min_accuracy = group.front()->accuracy;
        c.max_accuracy = group.back()->accuracy;
        c.min_degree = group.front()->degree_post;
        c.max_degree = group.front()->degree_post;
        for (const auto* r : group) {
            c.members.push_back(r->node);
            sum += r->accuracy;
            c.min_degree = std::min(c.min_degree, r->degree_post);
            c.max_degree = std::max(c.max_degree, r->degree_post);
        }
        std::sort(c.members.begin(), c.members.end());
        c.mean = sum / static_cast<double>(group.size());
        out.push_back(std::move(c));
        group.clear();
    };
    for (const auto* r : alive) {
        if (!group.empty() && r->accuracy - group.back()->accuracy > threshold) {
            flush();
        }
        group.push_back(r);
    }
    flush();
    return out;
}

void write_series_csv(std::ostream& out, const std::vector<SeriesPoint>& series)
{
    out << "round,mean_accuracy,count\n";
    for (const auto& p : series) {
        out << p.round << ',' << (p.mean ? fixed6(*p.mean) : std::string{}) << ',' << p.count
            << '\n';
    }
}

void write_worst_csv(std::ostream& out, const MetricsLog& log, const std::vector<NodeId>& nodes)
{
    out << "node_id,final_accuracy,degree_post\n";
    const auto alive = final_alive(log);
    for (NodeId id : nodes) {
        for (const auto* r : alive) {
            if (r->node == id) {
                out << id << ',' << fixed6(r->accuracy) << ',' << r->degree_post << '\n';
            }
        }
    }
}

void write_scatter_csv(std::ostream& out, const ComparisonTable& table)
{
    out << "node_id,accuracy_case1,accuracy_case2,degree_post,residual\n";
    for (const auto& r : table.rows) {
        out << r.node << ',' << fixed6(r.accuracy_case1) << ',' << fixed6(r.accuracy_case2) << ','
            << r.degree_post << ',' << fixed6(r.residual) << '\n';
    }
}

void write_clusters_csv(std::ostream& out, const std::vector<AccuracyCluster>& clusters)
{
    out << "group,size,mean_accuracy,min_accuracy,max_accuracy,min_degree,max_degree,members\n";
    for (std::size_t g = 0; g < clusters.size(); ++g) {
        const auto& c = clusters[g];
        out << g << ',' << c.members.size() << ',' << fixed6(c.mean) << ','
            << fixed6(c.min_accuracy) << ',' << fixed6(c.max_accuracy) << ',' << c.min_degree
            << ',' << c.max_degree << ',';
        for (std::size_t i = 0; i < c.members.size(); ++i) {
            out << (i ? " " : "") << c.members[i];
        }
        out << '\n';
    }
}

void write_gnuplot_stub(std::ostream& out, PlotKind kind, const std::string& csv_name)
{
    out << "set datafile separator ','\n"
        << "set key autotitle columnhead\n"
        << "set terminal pngcairo size 800,600\n"
        << "set output '" << csv_name << ".png'\n";
    if (kind == PlotKind::series) {
        out << "set xlabel 'round'\nset ylabel 'mean accuracy'\n"
            << "plot '" << csv_name << "' using 1:2 with lines\n";
    } else {
        out << "set xlabel 'case 1 accuracy'\nset ylabel 'case 2 accuracy'\n"
            << "set size square\n"
            << "plot '" << csv_name << "' using 2:3 with points pt 7, x with lines lc rgb 'red'\n";
    }
}

} // namespace davg
