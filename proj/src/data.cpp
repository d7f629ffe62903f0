#include "davg/data.hpp"

#include "davg/errors.hpp"
#include "davg/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace davg {

namespace {

constexpr std::uint32_t idx_images_magic = 0x00000803;
constexpr std::uint32_t idx_labels_magic = 0x00000801;

std::uint32_t read_be32(std::istream& in, std::string_view what, std::string_view field)
{
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw FormatError(std::string(what) + ": truncated while reading " + std::string(field));
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8)
           | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v)
{
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b.data(), 4);
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t count, std::string_view what)
{
    std::vector<unsigned char> bytes(count);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count))) {
        throw FormatError(std::string(what) + ": truncated payload (expected "
                          + std::to_string(count) + " bytes, got "
                          + std::to_string(in.gcount()) + ")");
    }
    return bytes;
}

void check_magic(std::uint32_t got, std::uint32_t expected, std::string_view what)
{
    if (got != expected) {
        char buf[96];
        std::snprintf(buf, sizeof buf, ": bad magic number 0x%08x (expected 0x%08x)", got, expected);
        throw FormatError(std::string(what) + buf);
    }
}

} // namespace

void Dataset::validate() const
{
    if (static_cast<std::size_t>(features.cols()) != labels.size()) {
        throw InvalidParameter("dataset has " + std::to_string(features.cols())
                               + " feature columns but " + std::to_string(labels.size())
                               + " labels");
    }
    for (Label y : labels) {
        if (y < 0 || y >= class_count) {
            throw InvalidParameter("label " + std::to_string(y) + " outside 0.."
                                   + std::to_string(class_count - 1));
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const
{
    Dataset out;
    out.class_count = class_count;
    out.features.resize(features.rows(), static_cast<Eigen::Index>(indices.size()));
    out.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= size()) {
            throw InvalidParameter("sample index " + std::to_string(indices[k]) + " out of range");
        }
        out.features.col(static_cast<Eigen::Index>(k)) =
            features.col(static_cast<Eigen::Index>(indices[k]));
        out.labels.push_back(labels[indices[k]]);
    }
    return out;
}

Eigen::MatrixXd read_idx_images(std::istream& in, std::string_view what)
{
    check_magic(read_be32(in, what, "magic"), idx_images_magic, what);
    const std::uint32_t count = read_be32(in, what, "image count");
    const std::uint32_t rows = read_be32(in, what, "row count");
    const std::uint32_t cols = read_be32(in, what, "column count");
    const std::size_t dim = std::size_t{rows} * cols;
    auto bytes = read_payload(in, dim * count, what);

    Eigen::MatrixXd features(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t p = 0; p < dim; ++p) {
            features(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(s)) =
                bytes[s * dim + p] / 255.0;
        }
    }
    return features;
}

std::vector<Label> read_idx_labels(std::istream& in, std::string_view what)
{
    check_magic(read_be32(in, what, "magic"), idx_labels_magic, what);
    const std::uint32_t count = read_be32(in, what, "label count");
    auto bytes = read_payload(in, count, what);
    return {bytes.begin(), bytes.end()};
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path)
{
    std::ifstream images(images_path, std::ios::binary);
    if (!images) {
        throw FormatError("cannot open IDX images file " + images_path.string());
    }
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) {
        throw FormatError("cannot open IDX labels file " + labels_path.string());
    }
    Dataset ds;
    ds.features = read_idx_images(images, images_path.filename().string());
    ds.labels = read_idx_labels(labels, labels_path.filename().string());
    if (static_cast<std::size_t>(ds.features.cols()) != ds.labels.size()) {
        throw FormatError("IDX length mismatch: " + std::to_string(ds.features.cols())
                          + " images vs " + std::to_string(ds.labels.size()) + " labels");
    }
    Label top = 0;
    for (Label y : ds.labels) {
        top = std::max(top, y);
    }
    ds.class_count = ds.labels.empty() ? 0 : top + 1;
    return ds;
}

void write_idx_images(std::ostream& out, const Eigen::MatrixXd& features, std::size_t rows,
                      std::size_t cols)
{
    if (rows * cols != static_cast<std::size_t>(features.rows())) {
        throw InvalidParameter("write_idx_images: rows*cols does not match feature dimension");
    }
    write_be32(out, idx_images_magic);
    write_be32(out, static_cast<std::uint32_t>(features.cols()));
    write_be32(out, static_cast<std::uint32_t>(rows));
    write_be32(out, static_cast<std::uint32_t>(cols));
    for (Eigen::Index s = 0; s < features.cols(); ++s) {
        for (Eigen::Index p = 0; p < features.rows(); ++p) {
            const double v = std::clamp(std::round(features(p, s) * 255.0), 0.0, 255.0);
            out.put(static_cast<char>(static_cast<unsigned char>(v)));
        }
    }
}

void write_idx_labels(std::ostream& out, std::span<const Label> labels)
{
    write_be32(out, idx_labels_magic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (Label y : labels) {
        out.put(static_cast<char>(static_cast<unsigned char>(y)));
    }
}

Dataset synth_blobs(int classes, std::size_t per_class, std::size_t dim, double spread,
                    std::uint64_t seed)
{
    if (classes < 1 || per_class < 1 || dim < 1) {
        throw InvalidParameter("synth_blobs: classes, per_class and dim must be >= 1");
    }
    if (!(spread >= 0.0)) {
        throw InvalidParameter("synth_blobs: spread must be nonnegative");
    }
    const auto d = static_cast<Eigen::Index>(dim);
    const auto c = static_cast<Eigen::Index>(classes);

    auto mean_rng = rng_stream(seed, 0, 0, StreamPurpose::synth);
    Eigen::MatrixXd means(d, c);
    for (Eigen::Index k = 0; k < c; ++k) {
        double norm = 0.0;
        do {
            for (Eigen::Index p = 0; p < d; ++p) {
                means(p, k) = mean_rng.normal();
            }
            norm = means.col(k).norm();
        } while (norm == 0.0);
        means.col(k) *= 2.0 / norm;
    }

    auto noise_rng = rng_stream(seed, 1, 0, StreamPurpose::synth);
    const std::size_t total = per_class * static_cast<std::size_t>(classes);
    Dataset ds;
    ds.class_count = classes;
    ds.features.resize(d, static_cast<Eigen::Index>(total));
    ds.labels.resize(total);
    for (std::size_t s = 0; s < total; ++s) {
        const auto label = static_cast<Label>(s % static_cast<std::size_t>(classes));
        ds.labels[s] = label;
        for (Eigen::Index p = 0; p < d; ++p) {
            const double mu = means(p, label);
            const double x = mu + spread * noise_rng.normal();
            ds.features(p, static_cast<Eigen::Index>(s)) =
                std::clamp(x, mu - 4.0 * spread, mu + 4.0 * spread);
        }
    }

    for (Eigen::Index p = 0; p < d; ++p) {
        auto row = ds.features.row(p);
        const double lo = row.minCoeff();
        const double range = row.maxCoeff() - lo;
        if (range > 0.0) {
            row = ((row.array() - lo) / range).cwiseMax(0.0).cwiseMin(1.0);
        } else {
            row.setZero();
        }
    }
    return ds;
}

DatasetSplit synth_blobs_split(int classes, std::size_t train_per_class,
                               std::size_t test_per_class, std::size_t dim, double spread,
                               std::uint64_t seed)
{
    auto all = synth_blobs(classes, train_per_class + test_per_class, dim, spread, seed);
    // interleaved layout: the first train_per_class * classes samples hold
    // exactly train_per_class of each class
    const std::size_t cut = train_per_class * static_cast<std::size_t>(classes);
    std::vector<std::size_t> train_idx(cut);
    std::vector<std::size_t> test_idx(all.size() - cut);
    for (std::size_t i = 0; i < cut; ++i) {
        train_idx[i] = i;
    }
    for (std::size_t i = cut; i < all.size(); ++i) {
        test_idx[i - cut] = i;
    }
    return {all.subset(train_idx), all.subset(test_idx)};
}

std::size_t PartitionPlan::shard_size(NodeId node) const
{
    auto it = assignments.find(node);
    return it == assignments.end() ? 0 : it->second.size();
}

double PartitionPlan::mean_shard_size() const
{
    if (recipients.empty()) {
        return 0.0;
    }
    std::size_t total = 0;
    for (const auto& [node, idx] : assignments) {
        total += idx.size();
    }
    return static_cast<double>(total) / static_cast<double>(recipients.size());
}

PartitionPlan partition_iid(const Dataset& ds, std::span<const NodeId> recipients,
                            std::uint64_t seed)
{
    if (recipients.empty()) {
        throw InvalidParameter("partition_iid: recipient set is empty");
    }
    PartitionPlan plan;
    plan.recipients.assign(recipients.begin(), recipients.end());
    std::sort(plan.recipients.begin(), plan.recipients.end());
    if (std::adjacent_find(plan.recipients.begin(), plan.recipients.end())
        != plan.recipients.end()) {
        throw InvalidParameter("partition_iid: duplicate recipient id");
    }
    for (NodeId r : plan.recipients) {
        plan.assignments[r];
    }

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rng = rng_stream(seed, c, 0, StreamPurpose::partition);
        shuffle(std::span{by_class[c]}, rng);
        for (std::size_t idx : by_class[c]) {
            plan.assignments[plan.recipients[cursor]].push_back(idx);
            cursor = (cursor + 1) % plan.recipients.size();
        }
    }
    return plan;
}

void write_plan_csv(std::ostream& out, const PartitionPlan& plan)
{
    out << "node_id,sample_index\n";
    for (const auto& [node, idx] : plan.assignments) {
        for (std::size_t i : idx) {
            out << node << ',' << i << '\n';
        }
    }
}

} // namespace davg
