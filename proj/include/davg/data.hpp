#pragma once

#include "davg/topology.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace davg {

using Label = std::int32_t;

/// Labelled samples. Features are stored one sample per column, values in [0, 1].
struct Dataset {
    Eigen::MatrixXd features; // dim x sample_count
    std::vector<Label> labels;
    int class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.rows()); }
    bool empty() const noexcept { return labels.empty(); }

    /// Throws InvalidParameter when the column count and labels disagree or a label is out of range.
    void validate() const;

    Dataset subset(std::span<const std::size_t> indices) const;
};

/// Reads an IDX3 image file and an IDX1 label file; pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Stream variants of the IDX readers; `what` prefixes error messages.
Eigen::MatrixXd read_idx_images(std::istream& in, std::string_view what = "images");
std::vector<Label> read_idx_labels(std::istream& in, std::string_view what = "labels");

/// Writes a dataset back out as IDX (pixels rounded to bytes). Used for fixtures and tests.
void write_idx_images(std::ostream& out, const Eigen::MatrixXd& features, std::size_t rows,
                      std::size_t cols);
void write_idx_labels(std::ostream& out, std::span<const Label> labels);

/**
 * Gaussian blobs: one mean per class drawn uniformly on the sphere of radius 2,
 * isotropic noise with standard deviation `spread`. Samples are interleaved by
 * class (sample k has label k % classes), clamped to mean +/- 4 spread and
 * min-max normalized per feature into [0, 1].
 */
Dataset synth_blobs(int classes, std::size_t per_class, std::size_t dim, double spread,
                    std::uint64_t seed);

struct DatasetSplit {
    Dataset train;
    Dataset test;
};

/// Draws train_per_class + test_per_class samples per class from one blob
/// distribution and splits them, so both halves share class means and scaling.
DatasetSplit synth_blobs_split(int classes, std::size_t train_per_class,
                               std::size_t test_per_class, std::size_t dim, double spread,
                               std::uint64_t seed);

struct PartitionPlan {
    std::map<NodeId, std::vector<std::size_t>> assignments;
    std::vector<NodeId> recipients; // sorted ascending

    std::size_t shard_size(NodeId node) const;
    double mean_shard_size() const;
};

/**
 * Stratified IID split. Each class's indices are shuffled with a seeded stream
 * and dealt round-robin over the recipients in ascending id order; the dealing
 * cursor carries over between classes so shard sizes differ by at most one.
 */
PartitionPlan partition_iid(const Dataset& ds, std::span<const NodeId> recipients,
                            std::uint64_t seed);

/// CSV node_id,sample_index.
void write_plan_csv(std::ostream& out, const PartitionPlan& plan);

} // namespace davg
