#pragma once

#include "davg/scenario.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

namespace davg {

struct SeriesPoint {
    int round = 0;
    std::optional<double> mean; // empty when no alive node passed the filter
    std::size_t count = 0;
};

using NodeFilter = std::function<bool(NodeId)>;

/// Mean accuracy per logged round over alive nodes accepted by `filter` (all when empty).
std::vector<SeriesPoint> mean_accuracy_series(const MetricsLog& log, const NodeFilter& filter = {});

/// Alive nodes at the final logged round, lowest accuracy first (ties by id), truncated to k.
std::vector<NodeId> worst_performers(const MetricsLog& log, std::size_t k);
/// Bottom ceil(quantile * alive) nodes; the default quantile is 0.1.
std::vector<NodeId> worst_performers_quantile(const MetricsLog& log, double quantile = 0.1);

struct ComparisonRow {
    NodeId node = 0;
    double accuracy_case1 = 0.0;
    double accuracy_case2 = 0.0;
    std::size_t degree_post = 0;
    double residual = 0.0; // case2 - case1
};

struct ComparisonTable {
    int round = 0;
    int tau_drop = 0;
    std::vector<ComparisonRow> rows;
};

/// Throws ProvenanceMismatch naming the first differing field.
void check_compatible(const MetricsLog& case1, const MetricsLog& case2);

/// Paired accuracies at `round` for nodes alive and logged in both runs.
ComparisonTable scatter(const MetricsLog& case1, const MetricsLog& case2, int round);

struct AccuracyCluster {
    std::vector<NodeId> members; // sorted
    double mean = 0.0;
    double min_accuracy = 0.0;
    double max_accuracy = 0.0;
    std::size_t min_degree = 0;
    std::size_t max_degree = 0;
};

/// 1-D single linkage on final-round accuracies: neighbors in sorted order
/// whose gap is <= threshold share a group. Groups come out in ascending accuracy.
std::vector<AccuracyCluster> cluster_summary(const MetricsLog& log, double threshold = 0.02);

// Tidy CSV writers; accuracies use 6 decimals.
void write_series_csv(std::ostream& out, const std::vector<SeriesPoint>& series);
void write_worst_csv(std::ostream& out, const MetricsLog& log, const std::vector<NodeId>& nodes);
void write_scatter_csv(std::ostream& out, const ComparisonTable& table);
void write_clusters_csv(std::ostream& out, const std::vector<AccuracyCluster>& clusters);

enum class PlotKind { series, scatter };
/// Minimal gnuplot script that plots the given CSV.
void write_gnuplot_stub(std::ostream& out, PlotKind kind, const std::string& csv_name);

} // namespace davg
