#include "davg/topology.hpp"

#include "davg/errors.hpp"
#include "davg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace davg {

Graph::Graph(std::size_t node_count) : adjacency_(node_count) {}

void Graph::check_id(NodeId i) const
{
    if (i >= adjacency_.size()) {
        throw InvalidParameter("unknown node id " + std::to_string(i) + " (node_count="
                               + std::to_string(adjacency_.size()) + ")");
    }
}

void Graph::add_edge(NodeId u, NodeId v)
{
    check_id(u);
    check_id(v);
    if (u == v) {
        throw InvalidParameter("self-loop on node " + std::to_string(u));
    }
    auto& nu = adjacency_[u];
    auto pos = std::lower_bound(nu.begin(), nu.end(), v);
    if (pos != nu.end() && *pos == v) {
        return;
    }
    nu.insert(pos, v);
    auto& nv = adjacency_[v];
    nv.insert(std::lower_bound(nv.begin(), nv.end(), u), u);
    ++edge_count_;
}

bool Graph::has_edge(NodeId u, NodeId v) const
{
    check_id(u);
    check_id(v);
    return std::binary_search(adjacency_[u].begin(), adjacency_[u].end(), v);
}

std::size_t Graph::degree(NodeId i) const
{
    check_id(i);
    return adjacency_[i].size();
}

std::span<const NodeId> Graph::neighbors(NodeId i) const
{
    check_id(i);
    return adjacency_[i];
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const
{
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(edge_count_);
    for (NodeId u = 0; u < adjacency_.size(); ++u) {
        for (NodeId v : adjacency_[u]) {
            if (u < v) {
                out.emplace_back(u, v);
            }
        }
    }
    return out;
}

Graph generate_ba(std::size_t n, std::size_t m, std::uint64_t seed)
{
    if (m < 1 || n <= m) {
        throw InvalidParameter("generate_ba requires n > m >= 1 (got n=" + std::to_string(n)
                               + ", m=" + std::to_string(m) + ")");
    }
    Graph g(n);
    auto rng = rng_stream(seed, 0, 0, StreamPurpose::topology);

    // every node appears once per incident edge endpoint
    std::vector<NodeId> urn;
    urn.reserve(2 * m * (n - m));

    std::vector<NodeId> targets;
    targets.reserve(m);
    for (std::size_t node = m; node < n; ++node) {
        targets.clear();
        if (node < 2 * m) {
            for (NodeId s = 0; s < m; ++s) {
                targets.push_back(s);
            }
        } else {
            while (targets.size() < m) {
                NodeId pick = urn[rng.below(urn.size())];
                if (std::find(targets.begin(), targets.end(), pick) == targets.end()) {
                    targets.push_back(pick);
                }
            }
        }
        for (NodeId t : targets) {
            g.add_edge(static_cast<NodeId>(node), t);
            urn.push_back(t);
            urn.push_back(static_cast<NodeId>(node));
        }
    }
    return g;
}

namespace {

// Sums after sorting so the result depends only on the multiset of terms,
// which keeps scores bit-identical under node relabeling.
double ordered_sum(std::vector<double>& terms)
{
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) {
        s += t;
    }
    return s;
}

} // namespace

double burt_constraint(const Graph& g, NodeId i)
{
    const auto ni = g.neighbors(i);
    if (ni.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    const double p_i = 1.0 / static_cast<double>(ni.size());

    std::vector<double> outer;
    std::vector<double> indirect;
    outer.reserve(ni.size());
    for (NodeId j : ni) {
        indirect.clear();
        for (NodeId q : ni) {
            if (q != j && g.has_edge(q, j)) {
                indirect.push_back(p_i / static_cast<double>(g.degree(q)));
            }
        }
        const double local = p_i + ordered_sum(indirect);
        outer.push_back(local * local);
    }
    return ordered_sum(outer);
}

double structural_hole_score(const Graph& g, NodeId i)
{
    const double c = burt_constraint(g, i);
    return std::isinf(c) ? 0.0 : 1.0 / c;
}

bool BridgeSet::contains(NodeId i) const
{
    return std::binary_search(node_ids.begin(), node_ids.end(), i);
}

BridgeSet select_bridges(const Graph& g, double fraction)
{
    const std::size_t n = g.node_count();
    if (n == 0) {
        throw InvalidParameter("select_bridges on an empty graph");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InvalidParameter("bridge fraction must lie in (0, 1]");
    }
    BridgeSet out;
    out.scores.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        out.scores[i] = structural_hole_score(g, i);
    }
    // ceil with a guard against 0.1 * 30 = 3.0000000000000004
    const double raw = fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
    k = std::clamp<std::size_t>(k, 1, n);

    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        return out.scores[a] > out.scores[b];
    });
    out.node_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.node_ids.begin(), out.node_ids.end());
    return out;
}

Graph remove_nodes(const Graph& g, std::span<const NodeId> removed)
{
    std::vector<bool> gone(g.node_count(), false);
    for (NodeId r : removed) {
        if (r >= g.node_count()) {
            throw InvalidParameter("cannot remove unknown node " + std::to_string(r));
        }
        gone[r] = true;
    }
    Graph out(g.node_count());
    for (auto [u, v] : g.edges()) {
        if (!gone[u] && !gone[v]) {
            out.add_edge(u, v);
        }
    }
    return out;
}

std::vector<std::vector<NodeId>> connected_components(const Graph& g)
{
    const std::size_t n = g.node_count();
    std::vector<bool> seen(n, false);
    std::vector<std::vector<NodeId>> out;
    std::vector<NodeId> stack;
    for (NodeId root = 0; root < n; ++root) {
        if (seen[root]) {
            continue;
        }
        std::vector<NodeId> comp;
        seen[root] = true;
        stack.push_back(root);
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            comp.push_back(u);
            for (NodeId v : g.neighbors(u)) {
                if (!seen[v]) {
                    seen[v] = true;
                    stack.push_back(v);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

void write_edge_list(std::ostream& out, const Graph& g)
{
    out << "# nodes=" << g.node_count() << '\n';
    for (auto [u, v] : g.edges()) {
        out << u << ' ' << v << '\n';
    }
}

Graph read_edge_list(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("edge list: missing '# nodes=<n>' header");
    }
    constexpr std::string_view prefix = "# nodes=";
    if (line.rfind(prefix, 0) != 0) {
        throw FormatError("edge list: header must start with '# nodes='");
    }
    std::size_t n = 0;
    try {
        std::size_t used = 0;
        n = std::stoul(line.substr(prefix.size()), &used);
        if (used != line.size() - prefix.size()) {
            throw std::invalid_argument("trailing characters");
        }
    } catch (const std::exception&) {
        throw FormatError("edge list: bad node count in header '" + line + "'");
    }
    Graph g(n);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        long long u = -1;
        long long v = -1;
        std::string rest;
        if (!(fields >> u >> v) || (fields >> rest) || u < 0 || v < 0) {
            throw FormatError("edge list line " + std::to_string(line_no) + ": expected 'u v'");
        }
        if (u >= v) {
            throw FormatError("edge list line " + std::to_string(line_no) + ": requires u < v");
        }
        if (static_cast<std::size_t>(v) >= n) {
            throw FormatError("edge list line " + std::to_string(line_no) + ": node id out of range");
        }
        g.add_edge(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    return g;
}

void write_bridge_csv(std::ostream& out, const BridgeSet& bridges)
{
    out << "node_id,score,selected\n";
    char buf[64];
    for (NodeId i = 0; i < bridges.scores.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", bridges.scores[i]);
        out << i << ',' << buf << ',' << (bridges.contains(i) ? 1 : 0) << '\n';
    }
}

} // namespace davg
