#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace davg {

using NodeId = std::uint32_t;

/// Undirected, unweighted simple graph over ids 0..node_count-1.
class Graph {
public:
    Graph() = default;
    explicit Graph(std::size_t node_count);

    std::size_t node_count() const noexcept { return adjacency_.size(); }
    std::size_t edge_count() const noexcept { return edge_count_; }

    /// Adds u-v; self-loops and unknown ids throw, duplicates are ignored.
    void add_edge(NodeId u, NodeId v);
    bool has_edge(NodeId u, NodeId v) const;

    std::size_t degree(NodeId i) const;
    /// Sorted ascending.
    std::span<const NodeId> neighbors(NodeId i) const;

    /// All edges as (u, v) with u < v, lexicographically sorted.
    std::vector<std::pair<NodeId, NodeId>> edges() const;

    bool operator==(const Graph&) const = default;

private:
    void check_id(NodeId i) const;

    std::vector<std::vector<NodeId>> adjacency_;
    std::size_t edge_count_ = 0;
};

/**
 * Barabasi-Albert preferential attachment.
 *
 * Starts from m isolated seed nodes. Each of the n - m arrivals adds exactly
 * m edges to distinct existing nodes. The first m arrivals link to every seed
 * node (so seeds reach degree m); later arrivals draw targets from the
 * repeated-nodes urn, i.e. proportionally to current degree.
 */
Graph generate_ba(std::size_t n, std::size_t m, std::uint64_t seed);

/// Burt's aggregate constraint; +infinity for an isolated node.
double burt_constraint(const Graph& g, NodeId i);

/// 1 / constraint; 0 for an isolated node.
double structural_hole_score(const Graph& g, NodeId i);

struct BridgeSet {
    std::vector<NodeId> node_ids;     // sorted ascending
    std::vector<double> scores;       // structural-hole score of every node, indexed by id

    bool contains(NodeId i) const;
};

/// The ceil(fraction * n) highest-scoring nodes; ties go to the lower id.
BridgeSet select_bridges(const Graph& g, double fraction);

/// Drops every edge incident to `removed`. Ids are kept, so removed nodes stay as isolated vertices.
Graph remove_nodes(const Graph& g, std::span<const NodeId> removed);

/// Components over present edges, each sorted, ordered by smallest member.
std::vector<std::vector<NodeId>> connected_components(const Graph& g);

// Edge-list text format: "# nodes=<n>" header then one "u v" line per edge, u < v.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);

/// CSV node_id,score,selected.
void write_bridge_csv(std::ostream& out, const BridgeSet& bridges);

} // namespace davg
