#pragma once

#include "davg/scenario.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

namespace davg {

/// SHA-1 over "blob <size>\0<content>", hex encoded (what `git hash-object` prints).
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// CSV round,node_id,alive,degree_post,accuracy.
void write_metrics_csv(std::ostream& out, const MetricsLog& log);
/// Reads records only; config and bridges come from the sidecar.
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

/// Sidecar with the resolved config, bridge ids and content hashes of the inputs.
nlohmann::json make_sidecar(const MetricsLog& log,
                            const std::map<std::string, std::string>& input_hashes);

/// Writes <dir>/<prefix>.metrics.csv and its .json sidecar; returns the CSV path.
std::filesystem::path save_metrics(const MetricsLog& log, const std::filesystem::path& dir,
                                   const std::string& prefix,
                                   const std::map<std::string, std::string>& input_hashes = {});

/// Loads a CSV plus the sidecar sitting next to it (same stem, .json extension).
MetricsLog load_metrics(const std::filesystem::path& csv_path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

} // namespace davg
