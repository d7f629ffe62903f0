// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
#include "davg/data.hpp"
#include "davg/learner.hpp"
#include "davg/protocol.hpp"
#include "davg/reporting.hpp"
#include "davg/scenario.hpp"
#include "davg/topology.hpp"

#include "desk.hpp"
#include "oracles.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

using namespace davg;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double max_abs_diff(const ModelParams& a, const ModelParams& b)
{
    double d = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        d = std::max(d, (a.layers[l].weight - b.layers[l].weight).cwiseAbs().maxCoeff());
        d = std::max(d, (a.layers[l].bias - b.layers[l].bias).cwiseAbs().maxCoeff());
    }
    return d;
}

Outcome gradient_oracle()
{
    const auto start = Clock::now();
    auto rng = rng_stream(1001, 0, 0, StreamPurpose::init);
    double worst = 0.0;
    int nets = 0;
    while (nets < 100) {
        std::vector<std::size_t> sizes{1 + rng.below(6)};
        const std::size_t hidden_layers = rng.below(3);
        for (std::size_t h = 0; h < hidden_layers; ++h) {
            sizes.push_back(1 + rng.below(8));
        }
        sizes.push_back(2 + rng.below(4));
        auto p = init_params(sizes, 7 + static_cast<std::uint64_t>(nets));
        if (p.parameter_count() > 100) {
            continue;
        }
        oracle::for_each_param(p, [&](double& w) { w = rng.uniform(-1.0, 1.0); });
        const std::size_t batch = 1 + rng.below(6);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(sizes.front()), static_cast<Eigen::Index>(batch));
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                x(r, c) = rng.uniform(-1.0, 1.0);
            }
        }
        std::vector<Label> y(batch);
        for (auto& label : y) {
            label = static_cast<Label>(rng.below(sizes.back()));
        }
        auto grads = loss_and_grad(p, x, y).grads;
        std::vector<double> analytic;
        oracle::for_each_param(grads, [&](double& g) { analytic.push_back(g); });
        const auto numeric = oracle::numeric_gradient(p, x, y, 1e-6);
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-3});
            worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
        }
        ++nets;
    }
    const double secs = seconds_since(start);
    return {worst < 1e-4 && secs < 10.0,
            fmt("max relative error %.3g over 100 nets, %.2f s", worst, secs)};
}

Outcome constraint_oracle()
{
    auto rng = rng_stream(1002, 0, 0, StreamPurpose::topology);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(7);
        const double p = 0.25 + 0.6 * rng.uniform();
        Graph g(n);
        for (NodeId u = 0; u < n; ++u) {
            for (NodeId v = u + 1; v < n; ++v) {
                if (rng.uniform() < p) {
                    g.add_edge(u, v);
                }
            }
        }
        const auto a = oracle::dense(g);
        for (NodeId i = 0; i < n; ++i) {
            if (g.degree(i) > 0) {
                worst = std::max(worst, std::abs(burt_constraint(g, i) - oracle::brute_constraint(a, i)));
            }
        }
    }
    Graph star(4);
    for (NodeId i = 1; i < 4; ++i) {
        star.add_edge(0, i);
    }
    Graph tri(3);
    tri.add_edge(0, 1);
    tri.add_edge(1, 2);
    tri.add_edge(0, 2);
    const double fixture = std::max({std::abs(burt_constraint(star, 0) - 1.0 / 3.0),
                                     std::abs(burt_constraint(star, 1) - 1.0),
                                     std::abs(burt_constraint(tri, 0) - 1.125)});
    return {worst <= 1e-12 && fixture <= 1e-12,
            fmt("random max diff %.3g, fixture max diff %.3g", worst, fixture)};
}

Outcome aggregation_oracle()
{
    auto rng = rng_stream(1003, 0, 0, StreamPurpose::init);
    auto random_params = [&] {
        auto p = init_params(std::vector<std::size_t>{4, 5, 3}, 1);
        oracle::for_each_param(p, [&](double& w) { w = rng.uniform(-3.0, 3.0); });
        return std::make_shared<const ModelParams>(std::move(p));
    };
    double worst = 0.0;
    bool consensus = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t count = 1 + rng.below(8);
        std::vector<ModelAdvert> all;
        for (std::size_t k = 0; k < count; ++k) {
            all.push_back({static_cast<NodeId>(k), random_params(), rng.uniform(1.0, 1000.0)});
        }
        const std::vector<ModelAdvert> nb(all.begin() + 1, all.end());
        worst = std::max(worst, max_abs_diff(aggregate(all.front(), nb), oracle::weighted_mean(all)));

        const auto shared = random_params();
        for (auto& a : all) {
            a.params = shared;
        }
        const std::vector<ModelAdvert> same(all.begin() + 1, all.end());
        consensus = consensus && aggregate(all.front(), same) == *shared;
    }
    return {worst <= 1e-12 && consensus,
            fmt("max diff %.3g over 1000 sets, consensus exact: ", worst) + (consensus ? "yes" : "no")};
}

Outcome ba_structure()
{
    bool ok = true;
    std::size_t min_max_degree = 1000;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto g = generate_ba(100, 2, seed);
        std::size_t lo = 1000;
        std::size_t hi = 0;
        for (NodeId i = 0; i < 100; ++i) {
            lo = std::min(lo, g.degree(i));
            hi = std::max(hi, g.degree(i));
        }
        min_max_degree = std::min(min_max_degree, hi);
        ok = ok && g.edge_count() == 196 && lo == 2 && hi >= 8 && connected_components(g).size() == 1;
    }
    return {ok, fmt("20 seeds, smallest max degree %.0f", static_cast<double>(min_max_degree))};
}

Outcome determinism()
{
    const DisruptionCase kinds[] = {DisruptionCase::none, DisruptionCase::one, DisruptionCase::two};
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto cfg = testing::desk_config(seed, kinds[seed - 1]);
        const auto data = load_datasets(cfg);
        ok = ok && run_scenario(cfg, data, {1}).records == run_scenario(cfg, data, {8}).records;
    }
    return {ok, "3 desk runs, 1 vs 8 workers"};
}

double final_mean(const MetricsLog& log)
{
    return *mean_accuracy_series(log).back().mean;
}

double worst_decile_mean(const MetricsLog& log)
{
    const auto worst = worst_performers_quantile(log, 0.1);
    const int last = log.last_round();
    double sum = 0.0;
    for (const auto& r : log.records) {
        if (r.round == last && std::find(worst.begin(), worst.end(), r.node) != worst.end()) {
            sum += r.accuracy;
        }
    }
    return sum / static_cast<double>(worst.size());
}

struct DeskSummary {
    double none = 0, one = 0, two = 0, isolated = 0, worst_one = 0, worst_isolated = 0;
    double seconds = 0;
};

DeskSummary desk_summary()
{
    const auto start = Clock::now();
    DeskSummary s;
    constexpr int seeds = 5;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const auto base = testing::desk_config(seed, DisruptionCase::none);
        const auto data = load_datasets(base);
        auto run = [&](DisruptionCase kind) {
            auto cfg = base;
            cfg.disruption.kind = kind;
            return run_scenario(cfg, data);
        };
        const auto one = run(DisruptionCase::one);
        const auto iso = run(DisruptionCase::isolated);
        s.none += final_mean(run(DisruptionCase::none)) / seeds;
        s.one += final_mean(one) / seeds;
        s.two += final_mean(run(DisruptionCase::two)) / seeds;
        s.isolated += final_mean(iso) / seeds;
        s.worst_one += worst_decile_mean(one) / seeds;
        s.worst_isolated += worst_decile_mean(iso) / seeds;
    }
    s.seconds = seconds_since(start);
    return s;
}

Outcome ordering(const DeskSummary& s)
{
    const bool ok = s.none >= s.one + 0.01 && s.one >= s.isolated + 0.01
                    && s.worst_one >= s.worst_isolated + 0.01 && s.seconds < 120.0;
    return {ok, fmt("NONE %.4f, CASE1 %.4f, ISOLATED %.4f, ", s.none, s.one, s.isolated)
                    + fmt("worst decile CASE1 %.4f vs ISOLATED %.4f, %.1f s", s.worst_one,
                          s.worst_isolated, s.seconds)};
}

Outcome parity(const DeskSummary& s)
{
    const double gap = std::abs(s.one - s.two);
    return {gap <= 0.03, fmt("CASE1 %.4f, CASE2 %.4f, gap %.2f pp", s.one, s.two, 100.0 * gap)};
}

Outcome drop_semantics()
{
    auto cfg = testing::desk_config(11, DisruptionCase::one);
    const auto data = load_datasets(cfg);

    cfg.disruption.tau_drop = 0;
    std::vector<ExchangeTrace> trace;
    const auto early = run_scenario_traced(cfg, data, {}, &trace);
    auto is_bridge = [&](NodeId n) {
        return std::binary_search(early.bridges.begin(), early.bridges.end(), n);
    };
    bool silent = !early.bridges.empty();
    for (const auto& r : early.records) {
        silent = silent && !is_bridge(r.node);
    }
    for (const auto& tr : trace) {
        silent = silent && !is_bridge(tr.receiver)
                 && std::none_of(tr.senders.begin(), tr.senders.end(), is_bridge);
    }

    cfg.disruption.tau_drop = cfg.training.rounds;
    auto baseline = cfg;
    baseline.disruption.kind = DisruptionCase::none;
    baseline.disruption.bridge_data = BridgeData::relays;
    const bool identical = run_scenario(cfg, data).records == run_scenario(baseline, data).records;
    return {silent && identical, std::string("tau_drop=0 bridges silent: ") + (silent ? "yes" : "no")
                                     + ", tau_drop=rounds equals NONE: " + (identical ? "yes" : "no")};
}

Outcome isolated_equivalence()
{
    const auto cfg = testing::desk_config(12, DisruptionCase::isolated);
    const auto data = load_datasets(cfg);
    const auto log = run_scenario(cfg, data, {4});
    const auto setup = prepare_scenario(cfg, data.train);

    const auto init = init_params(setup.layer_sizes, cfg.training.init_seed);
    std::vector<MetricsRecord> expected;
    for (NodeId i = 0; i < cfg.topology.nodes; ++i) {
        const auto shard = data.train.subset(setup.plan.assignments.at(i));
        ModelParams p = init;
        auto opt = OptimizerState::for_params(init, cfg.training.learning_rate, cfg.training.momentum);
        for (int t = 0; t < cfg.training.rounds; ++t) {
            auto rng = rng_stream(cfg.training.init_seed, i, static_cast<std::uint64_t>(t),
                                  StreamPurpose::shuffle);
            auto r = train_local(p, opt, shard, cfg.training.epochs, cfg.training.batch_size, rng);
            p = std::move(r.params);
            opt = std::move(r.optimizer);
            expected.push_back({t, i, true, setup.graph.degree(i), evaluate(p, data.test)});
        }
    }
    std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
        return std::pair(a.round, a.node) < std::pair(b.round, b.node);
    });
    return {log.records == expected, fmt("%.0f records compared", static_cast<double>(expected.size()))};
}

Outcome idx_round_trip()
{
    const std::filesystem::path dir = DAVG_FIXTURE_DIR;
    const auto ds = load_idx(dir / "fixture-images-idx3-ubyte", dir / "fixture-labels-idx1-ubyte");
    std::ifstream in(dir / "fixture-expected.json");
    const auto expected = nlohmann::json::parse(in);

    bool ok = ds.size() == 100 && ds.dim() == 784;
    for (const auto& probe : expected["probes"]) {
        const int s = probe["sample"];
        const int r = probe["row"];
        const int c = probe["col"];
        const int byte = probe["byte"];
        ok = ok && ds.features(r * 28 + c, s) == byte / 255.0;
    }
    std::vector<int> histogram(10, 0);
    for (Label y : ds.labels) {
        ++histogram[static_cast<std::size_t>(y)];
    }
    ok = ok && histogram == expected["label_histogram"].get<std::vector<int>>();
    ok = ok && std::llround(ds.features.sum() * 255.0) == expected["pixel_byte_sum"].get<long long>();
    return {ok, "100 samples, probes, histogram and byte sum"};
}

} // namespace

int main()
{
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    };

    report(1, "gradient oracle", gradient_oracle);
    report(2, "constraint oracle", constraint_oracle);
    report(3, "aggregation oracle", aggregation_oracle);
    report(4, "BA structure", ba_structure);
    report(5, "determinism across workers", determinism);
    DeskSummary desk;
    std::string desk_error;
    try {
        desk = desk_summary();
    } catch (const std::exception& e) {
        desk_error = e.what();
    }
    auto with_desk = [&](Outcome (*f)(const DeskSummary&)) {
        return [&, f]() -> Outcome {
            if (!desk_error.empty()) {
                return {false, "desk runs failed: " + desk_error};
            }
            return f(desk);
        };
    };
    report(6, "ordering at desk scale", with_desk(ordering));
    report(7, "case 1 vs case 2 parity", with_desk(parity));
    report(8, "drop semantics", drop_semantics);
    report(9, "isolated equivalence", isolated_equivalence);
    report(10, "IDX fixture round trip", idx_round_trip);
    return failures == 0 ? 0 : 1;
}
