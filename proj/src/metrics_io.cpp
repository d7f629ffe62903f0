#include "davg/metrics_io.hpp"

#include "davg/config.hpp"
#include "davg/errors.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <memory>
#include <ostream>
#include <sstream>

namespace davg {

std::string git_blob_hash(std::string_view content)
{
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1
        || EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1
        || EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1
        || EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1) {
        throw std::runtime_error("SHA-1 digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        const unsigned char b = digest[i];
        std::snprintf(buf, sizeof buf, "%02x", b);
        hex += buf;
    }
    return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string() + " for hashing");
    }
    const std::string content{std::istreambuf_iterator<char>(in), {}};
    return git_blob_hash(content);
}

void write_metrics_csv(std::ostream& out, const MetricsLog& log)
{
    out << "round,node_id,alive,degree_post,accuracy\n";
    char acc[32];
    for (const auto& r : log.records) {
        std::snprintf(acc, sizeof acc, "%.6f", r.accuracy);
        out << r.round << ',' << r.node << ',' << (r.alive ? 1 : 0) << ',' << r.degree_post << ','
            << acc << '\n';
    }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != "round,node_id,alive,degree_post,accuracy") {
        throw FormatError("metrics CSV: unexpected header '" + line + "'");
    }
    std::vector<MetricsRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        MetricsRecord r;
        unsigned long node = 0;
        unsigned long degree = 0;
        int alive = 0;
        char tail = 0;
        if (std::sscanf(line.c_str(), "%d,%lu,%d,%lu,%lf%c", &r.round, &node, &alive, &degree,
                        &r.accuracy, &tail)
            != 5) {
            throw FormatError("metrics CSV line " + std::to_string(line_no) + ": malformed row");
        }
        r.node = static_cast<NodeId>(node);
        r.alive = alive != 0;
        r.degree_post = degree;
        records.push_back(r);
    }
    return records;
}

nlohmann::json make_sidecar(const MetricsLog& log,
                            const std::map<std::string, std::string>& input_hashes)
{
    nlohmann::json j;
    j["config"] = config_to_json(log.config);
    j["bridges"] = log.bridges;
    j["snapshot_rounds"] = snapshot_rounds(log.config);
    j["inputs"] = input_hashes;
    return j;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path)
{
    auto p = csv_path;
    return p.replace_extension(".json");
}

std::filesystem::path save_metrics(const MetricsLog& log, const std::filesystem::path& dir,
                                   const std::string& prefix,
                                   const std::map<std::string, std::string>& input_hashes)
{
    std::filesystem::create_directories(dir);
    const auto csv_path = dir / (prefix + ".metrics.csv");
    std::ostringstream csv;
    write_metrics_csv(csv, log);
    {
        std::ofstream out(csv_path, std::ios::binary);
        out << csv.str();
    }
    auto sidecar = make_sidecar(log, input_hashes);
    sidecar["content_hash"] = git_blob_hash(csv.str());
    std::ofstream out(sidecar_path(csv_path), std::ios::binary);
    out << sidecar.dump(2) << '\n';
    return csv_path;
}

MetricsLog load_metrics(const std::filesystem::path& csv_path)
{
    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) {
        throw FormatError("cannot open metrics CSV " + csv_path.string());
    }
    std::ifstream side(sidecar_path(csv_path));
    if (!side) {
        throw FormatError("missing sidecar " + sidecar_path(csv_path).string());
    }
    MetricsLog log;
    log.records = read_metrics_csv(csv);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(side);
        log.config = config_from_json(j.at("config"));
        log.bridges = j.at("bridges").get<std::vector<NodeId>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("sidecar " + sidecar_path(csv_path).string() + ": " + e.what());
    }
    return log;
}

} // namespace davg
