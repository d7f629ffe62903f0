#include "davg/config.hpp"

#include "davg/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace davg {

namespace {

struct Field {
    std::string help;
    std::function<void(ScenarioConfig&, std::string_view)> set;
    std::function<std::string(const ScenarioConfig&)> get;
};

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text)
{
    const std::string s = trim(text);
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        throw ConfigError("config key " + std::string(key) + ": cannot parse '" + s + "'");
    }
    return value;
}

template <>
double parse_number<double>(std::string_view key, std::string_view text)
{
    const std::string s = trim(text);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument("trailing");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + std::string(key) + ": cannot parse '" + s + "'");
    }
}

std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <class Parse>
auto wrap_enum(std::string_view key, std::string_view text, Parse parse)
{
    try {
        return parse(trim(text));
    } catch (const std::exception& e) {
        throw ConfigError("config key " + std::string(key) + ": " + e.what());
    }
}

std::vector<std::size_t> parse_sizes(std::string_view key, std::string_view text)
{
    std::vector<std::size_t> out;
    const std::string s = trim(text);
    if (s.empty()) {
        return out;
    }
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos
                                                                       : comma - start);
        out.push_back(parse_number<std::size_t>(key, piece));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& sizes)
{
    std::string out;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i) {
            out += ',';
        }
        out += std::to_string(sizes[i]);
    }
    return out;
}

#define DAVG_NUMBER_FIELD(name, member, type, help)                                              \
    {                                                                                            \
        name, Field                                                                              \
        {                                                                                        \
            help,                                                                                \
                [](ScenarioConfig& c, std::string_view v) {                                      \
                    c.member = parse_number<type>(name, v);                                      \
                },                                                                               \
                [](const ScenarioConfig& c) {                                                    \
                    if constexpr (std::is_floating_point_v<type>) {                              \
                        return format_double(static_cast<double>(c.member));                     \
                    } else {                                                                     \
                        return std::to_string(c.member);                                         \
                    }                                                                            \
                }                                                                                \
        }                                                                                        \
    }

#define DAVG_ENUM_FIELD(name, member, parser, help)                                              \
    {                                                                                            \
        name, Field                                                                              \
        {                                                                                        \
            help,                                                                                \
                [](ScenarioConfig& c, std::string_view v) {                                      \
                    c.member = wrap_enum(name, v, [](const std::string& s) { return parser(s); }); \
                },                                                                               \
                [](const ScenarioConfig& c) { return std::string(to_string(c.member)); }         \
        }                                                                                        \
    }

const std::map<std::string, Field, std::less<>>& fields()
{
    static const std::map<std::string, Field, std::less<>> table{
        DAVG_NUMBER_FIELD("topology.nodes", topology.nodes, std::size_t, "number of nodes"),
        DAVG_NUMBER_FIELD("topology.m", topology.attachment, std::size_t,
                          "edges added per arriving node"),
        DAVG_NUMBER_FIELD("topology.seed", topology.seed, std::uint64_t, "graph seed"),
        DAVG_ENUM_FIELD("disruption.case", disruption.kind, parse_case,
                        "none | one | two | isolated"),
        DAVG_NUMBER_FIELD("disruption.fraction", disruption.fraction, double,
                          "share of nodes selected as bridges"),
        DAVG_NUMBER_FIELD("disruption.tau_drop", disruption.tau_drop, int,
                          "round at which bridges switch off (== rounds: never)"),
        DAVG_ENUM_FIELD("disruption.drop_phase", disruption.phase, parse_drop_phase,
                        "pre_exchange | post_exchange"),
        DAVG_ENUM_FIELD("disruption.relay_rule", disruption.relay, parse_relay_rule,
                        "mean-shard | zero | neighborhood-sum"),
        DAVG_ENUM_FIELD("disruption.case1_data_budget", disruption.case1_budget,
                        parse_data_budget, "full | reduced"),
        DAVG_ENUM_FIELD("disruption.bridge_data", disruption.bridge_data, parse_bridge_data,
                        "auto | holders | relays"),
        {"training.hidden",
         Field{"comma-separated hidden layer sizes",
               [](ScenarioConfig& c, std::string_view v) {
                   c.training.hidden = parse_sizes("training.hidden", v);
               },
               [](const ScenarioConfig& c) { return join_sizes(c.training.hidden); }}},
        DAVG_NUMBER_FIELD("training.learning_rate", training.learning_rate, double, "SGD step"),
        DAVG_NUMBER_FIELD("training.momentum", training.momentum, double, "SGD momentum"),
        DAVG_NUMBER_FIELD("training.epochs", training.epochs, int, "local epochs per round"),
        DAVG_NUMBER_FIELD("training.batch_size", training.batch_size, std::size_t,
                          "mini-batch size"),
        DAVG_NUMBER_FIELD("training.rounds", training.rounds, int, "communication rounds"),
        DAVG_NUMBER_FIELD("training.init_seed", training.init_seed, std::uint64_t,
                          "seed for the shared initialization and shuffles"),
        DAVG_ENUM_FIELD("training.aggregation", training.aggregation, parse_aggregation_rule,
                        "normalized | literal"),
        DAVG_NUMBER_FIELD("training.eval_every", training.eval_every, int,
                          "evaluation stride in rounds"),
        DAVG_ENUM_FIELD("data.source", data.source, parse_data_source, "synth | idx"),
        {"data.dir",
         Field{"IDX directory (defaults to $DAVG_DATA_DIR)",
               [](ScenarioConfig& c, std::string_view v) { c.data.dir = trim(v); },
               [](const ScenarioConfig& c) { return c.data.dir; }}},
        DAVG_NUMBER_FIELD("data.seed", data.seed, std::uint64_t, "partition and synthesis seed"),
        DAVG_NUMBER_FIELD("data.classes", data.classes, int, "synthetic class count"),
        DAVG_NUMBER_FIELD("data.per_class", data.per_class, std::size_t,
                          "synthetic training samples per class"),
        DAVG_NUMBER_FIELD("data.test_per_class", data.test_per_class, std::size_t,
                          "synthetic test samples per class"),
        DAVG_NUMBER_FIELD("data.dim", data.dim, std::size_t, "synthetic feature dimension"),
        DAVG_NUMBER_FIELD("data.spread", data.spread, double, "synthetic noise std"),
        {"output.dir",
         Field{"output directory",
               [](ScenarioConfig& c, std::string_view v) { c.output.dir = trim(v); },
               [](const ScenarioConfig& c) { return c.output.dir; }}},
        {"output.prefix",
         Field{"output file prefix",
               [](ScenarioConfig& c, std::string_view v) { c.output.prefix = trim(v); },
               [](const ScenarioConfig& c) { return c.output.prefix; }}},
    };
    return table;
}

#undef DAVG_NUMBER_FIELD
#undef DAVG_ENUM_FIELD

const Field& field(std::string_view key)
{
    auto it = fields().find(key);
    if (it == fields().end()) {
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
    return it->second;
}

} // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [name, f] : fields()) {
            k.push_back(name);
        }
        return k;
    }();
    return keys;
}

std::string_view config_key_help(std::string_view key) { return field(key).help; }

void set_config_value(ScenarioConfig& cfg, std::string_view key, std::string_view value)
{
    field(key).set(cfg, value);
}

std::string get_config_value(const ScenarioConfig& cfg, std::string_view key)
{
    return field(key).get(cfg);
}

ScenarioConfig parse_config(std::istream& in)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    ScenarioConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError("config key '" + section + "' must live inside a section");
        }
        for (const auto& [key, value] : body) {
            set_config_value(cfg, section + "." + key, value.data());
        }
    }
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    return parse_config(in);
}

void write_config(std::ostream& out, const ScenarioConfig& cfg)
{
    std::string section;
    for (const auto& key : config_keys()) {
        const auto dot = key.find('.');
        const auto sec = key.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << key.substr(dot + 1) << " = " << get_config_value(cfg, key) << '\n';
    }
}

nlohmann::json config_to_json(const ScenarioConfig& cfg)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& key : config_keys()) {
        const auto dot = key.find('.');
        j[key.substr(0, dot)][key.substr(dot + 1)] = get_config_value(cfg, key);
    }
    return j;
}

ScenarioConfig config_from_json(const nlohmann::json& j)
{
    ScenarioConfig cfg;
    if (!j.is_object()) {
        throw ConfigError("config JSON must be an object");
    }
    for (const auto& [section, body] : j.items()) {
        if (!body.is_object()) {
            throw ConfigError("config JSON section '" + section + "' must be an object");
        }
        for (const auto& [key, value] : body.items()) {
            set_config_value(cfg, section + "." + key,
                             value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    return cfg;
}

ScenarioConfig paper_scale_config()
{
    ScenarioConfig cfg;
    cfg.topology = {100, 2, 1};
    cfg.disruption.fraction = 0.10;
    cfg.disruption.tau_drop = 10;
    cfg.training.hidden = {512, 256, 128};
    cfg.training.learning_rate = 0.01;
    cfg.training.momentum = 0.5;
    cfg.training.rounds = 200;
    cfg.data.source = DataSource::idx;
    return cfg;
}

} // namespace davg
