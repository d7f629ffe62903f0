#include "davg/config.hpp"
#include "davg/errors.hpp"
#include "davg/metrics_io.hpp"
#include "davg/reporting.hpp"
#include "davg/scenario.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

namespace fs = std::filesystem;
using namespace davg;

namespace {

enum ExitCode { ok = 0, failure = 1, config_error = 2, provenance = 3, numeric = 4 };

// Options shared by every subcommand that builds a scenario.
struct ScenarioArgs {
    std::string config_path;
    bool paper_scale = false;
    unsigned workers = 1;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App& app)
    {
        app.add_option("--config", config_path, "Scenario file (INI sections topology, disruption, ...)")
            ->check(CLI::ExistingFile);
        app.add_flag("--paper-scale", paper_scale,
                     "Start from the full-size setting (BA(100,2), MNIST, 200 rounds)");
        app.add_option("--workers", workers, "Worker threads per round")->check(CLI::PositiveNumber);
        for (const auto& key : config_keys()) {
            app.add_option_function<std::string>(
                "--" + key, [this, key](const std::string& v) { overrides[key] = v; },
                std::string(config_key_help(key)))
                ->group("Config overrides");
        }
    }

    ScenarioConfig resolve() const
    {
        ScenarioConfig cfg = paper_scale ? paper_scale_config() : ScenarioConfig{};
        if (!config_path.empty()) {
            ScenarioConfig file = load_config(config_path);
            if (paper_scale) {
                // file values win over the full-size base, defaults do not
                const ScenarioConfig defaults;
                for (const auto& key : config_keys()) {
                    const auto v = get_config_value(file, key);
                    if (v != get_config_value(defaults, key)) {
                        set_config_value(cfg, key, v);
                    }
                }
            } else {
                cfg = file;
            }
        }
        for (const auto& [key, value] : overrides) {
            set_config_value(cfg, key, value);
        }
        cfg.validate();
        return cfg;
    }

    std::map<std::string, std::string> input_hashes(const ScenarioConfig& cfg) const
    {
        std::map<std::string, std::string> out;
        if (!config_path.empty()) {
            out["config_file"] = git_blob_hash_file(config_path);
        }
        out["resolved_config"] = git_blob_hash(config_to_json(cfg).dump());
        if (cfg.data.source == DataSource::idx) {
            const auto f = idx_files(cfg);
            for (const auto& p : {f.train_images, f.train_labels, f.test_images, f.test_labels}) {
                out[p.filename().string()] = git_blob_hash_file(p);
            }
        }
        return out;
    }
};

fs::path output_path(const ScenarioConfig& cfg, const std::string& suffix)
{
    fs::create_directories(cfg.output.dir);
    return fs::path(cfg.output.dir) / (cfg.output.prefix + suffix);
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    return out;
}

void write_sidecar(const fs::path& csv, nlohmann::json j)
{
    std::ifstream in(csv, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    j["content_hash"] = git_blob_hash(content);
    auto out = open_out(sidecar_path(csv));
    out << j.dump(2) << '\n';
}

void maybe_gnuplot(bool wanted, const fs::path& csv, PlotKind kind)
{
    if (!wanted) {
        return;
    }
    auto gp = csv;
    gp.replace_extension(".gp");
    auto out = open_out(gp);
    write_gnuplot_stub(out, kind, csv.filename().string());
}

double final_mean(const MetricsLog& log)
{
    const auto series = mean_accuracy_series(log);
    return series.empty() || !series.back().mean ? std::nan("") : *series.back().mean;
}

int cmd_generate_graph(const ScenarioArgs& args, bool with_plan)
{
    const auto cfg = args.resolve();
    const auto g = generate_ba(cfg.topology.nodes, cfg.topology.attachment, cfg.topology.seed);
    const auto bridges = select_bridges(g, cfg.disruption.fraction);

    const auto edges = output_path(cfg, ".edges");
    {
        auto out = open_out(edges);
        write_edge_list(out, g);
    }
    const auto bcsv = output_path(cfg, ".bridges.csv");
    {
        auto out = open_out(bcsv);
        write_bridge_csv(out, bridges);
    }
    nlohmann::json side;
    side["config"] = config_to_json(cfg);
    side["bridges"] = bridges.node_ids;
    side["inputs"] = args.input_hashes(cfg);
    write_sidecar(bcsv, side);
    std::cout << edges.string() << '\n' << bcsv.string() << '\n';

    if (with_plan) {
        const auto data = load_datasets(cfg);
        const auto setup = prepare_scenario(cfg, data.train);
        const auto plan = output_path(cfg, ".plan.csv");
        auto out = open_out(plan);
        write_plan_csv(out, setup.plan);
        std::cout << plan.string() << '\n';
    }
    return ok;
}

int cmd_run(const ScenarioArgs& args, bool gnuplot)
{
    const auto cfg = args.resolve();
    const auto data = load_datasets(cfg);
    const auto log = run_scenario(cfg, data, {args.workers});
    const auto csv = save_metrics(log, cfg.output.dir, cfg.output.prefix, args.input_hashes(cfg));

    const auto series = output_path(cfg, ".mean.csv");
    {
        auto out = open_out(series);
        write_series_csv(out, mean_accuracy_series(log));
    }
    maybe_gnuplot(gnuplot, series, PlotKind::series);
    std::cout << csv.string() << '\n' << series.string() << '\n';
    std::printf("final mean accuracy %.6f over %zu alive nodes\n", final_mean(log),
                static_cast<std::size_t>(mean_accuracy_series(log).back().count));
    return ok;
}

int cmd_compare(const ScenarioArgs& args, bool gnuplot)
{
    const auto base = args.resolve();
    const auto data = load_datasets(base);
    const auto hashes = args.input_hashes(base);

    auto run_case = [&](DisruptionCase kind, const char* tag) {
        auto cfg = base;
        cfg.disruption.kind = kind;
        const auto log = run_scenario(cfg, data, {args.workers});
        std::cout << save_metrics(log, cfg.output.dir, cfg.output.prefix + "." + tag, hashes).string()
                  << '\n';
        return log;
    };
    const auto one = run_case(DisruptionCase::one, "case1");
    const auto two = run_case(DisruptionCase::two, "case2");

    for (int round : snapshot_rounds(base)) {
        const auto table = scatter(one, two, round);
        const auto csv = output_path(base, ".scatter.t" + std::to_string(round) + ".csv");
        {
            auto out = open_out(csv);
            write_scatter_csv(out, table);
        }
        nlohmann::json side;
        side["config"] = config_to_json(base);
        side["round"] = round;
        side["inputs"] = hashes;
        write_sidecar(csv, side);
        maybe_gnuplot(gnuplot, csv, PlotKind::scatter);
        std::cout << csv.string() << '\n';
    }
    std::printf("final mean accuracy: case1 %.6f, case2 %.6f\n", final_mean(one), final_mean(two));
    return ok;
}

int cmd_sweep(const ScenarioArgs& args, unsigned seeds)
{
    const auto base = args.resolve();
    const auto csv = output_path(base, ".sweep.csv");
    auto out = open_out(csv);
    out << "seed,final_mean_accuracy\n";
    double sum = 0.0;
    double sq = 0.0;
    for (unsigned s = 1; s <= seeds; ++s) {
        auto cfg = base;
        cfg.topology.seed = cfg.data.seed = cfg.training.init_seed = s;
        const double acc = final_mean(run_scenario(cfg, {args.workers}));
        char line[64];
        std::snprintf(line, sizeof line, "%u,%.6f\n", s, acc);
        out << line;
        sum += acc;
        sq += acc * acc;
    }
    const double mean = sum / seeds;
    const double sd = seeds > 1 ? std::sqrt(std::max(0.0, (sq - seeds * mean * mean) / (seeds - 1))) : 0.0;
    std::cout << csv.string() << '\n';
    std::printf("mean %.6f, std %.6f over %u seeds\n", mean, sd, seeds);
    return ok;
}

// Report subcommands write to -o or stdout and leave a sidecar next to file outputs.
struct ReportTarget {
    std::string path;

    template <typename Fn>
    void emit(Fn&& write, const nlohmann::json& provenance, bool gnuplot, PlotKind kind) const
    {
        if (path.empty()) {
            write(std::cout);
            return;
        }
        {
            auto out = open_out(path);
            write(out);
        }
        write_sidecar(path, provenance);
        maybe_gnuplot(gnuplot, path, kind);
    }
};

nlohmann::json report_provenance(const std::vector<std::string>& inputs)
{
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& p : inputs) {
        hashes[p] = git_blob_hash_file(p);
    }
    nlohmann::json out;
    out["inputs"] = hashes;
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Decentralized averaging under bridge-node disruption"};
    app.require_subcommand(1);
    bool gnuplot = false;
    app.add_flag("--gnuplot-stub", gnuplot, "Write a gnuplot script next to each plotted CSV");

    ScenarioArgs gen_args;
    bool with_plan = false;
    auto* gen = app.add_subcommand("generate-graph", "Write the BA edge list and bridge scores");
    gen_args.attach(*gen);
    gen->add_flag("--plan", with_plan, "Also export the data partition plan");

    ScenarioArgs run_args;
    auto* run = app.add_subcommand("run", "Simulate one scenario and write its metrics");
    run_args.attach(*run);

    ScenarioArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "Run case one and case two and write snapshot scatter tables");
    cmp_args.attach(*cmp);

    ScenarioArgs sweep_args;
    unsigned seeds = 5;
    auto* sweep = app.add_subcommand("sweep", "Repeat a scenario over seeds 1..N");
    sweep_args.attach(*sweep);
    sweep->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "Derive tables from saved metrics");
    report->require_subcommand(1);
    ReportTarget target;
    report->add_option("-o,--output", target.path, "Output CSV (default stdout)");

    std::string metrics;
    std::vector<NodeId> nodes;
    bool worst_only = false;
    auto* mean = report->add_subcommand("mean", "Mean accuracy per round");
    mean->add_option("metrics", metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);
    mean->add_option("--nodes", nodes, "Restrict to these node ids")->delimiter(',');
    mean->add_flag("--worst", worst_only, "Restrict to the worst decile by final accuracy");

    std::optional<std::size_t> k;
    double quantile = 0.1;
    auto* worst = report->add_subcommand("worst", "Worst performers by final accuracy");
    worst->add_option("metrics", metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);
    auto* k_opt = worst->add_option("-k", k, "Number of nodes");
    worst->add_option("--quantile", quantile, "Fraction of alive nodes")->excludes(k_opt);

    std::string case1;
    std::string case2;
    int round = -1;
    auto* sc = report->add_subcommand("scatter", "Pair case one and case two accuracies at a round");
    sc->add_option("case1", case1, "Case one metrics CSV")->required()->check(CLI::ExistingFile);
    sc->add_option("case2", case2, "Case two metrics CSV")->required()->check(CLI::ExistingFile);
    sc->add_option("--round", round, "Snapshot round (default: last)");

    double threshold = 0.02;
    auto* cl = report->add_subcommand("clusters", "Group nodes by final accuracy");
    cl->add_option("metrics", metrics, "Metrics CSV")->required()->check(CLI::ExistingFile);
    cl->add_option("--threshold", threshold, "Single-linkage merge gap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*gen) {
            return cmd_generate_graph(gen_args, with_plan);
        }
        if (*run) {
            return cmd_run(run_args, gnuplot);
        }
        if (*cmp) {
            return cmd_compare(cmp_args, gnuplot);
        }
        if (*sweep) {
            return cmd_sweep(sweep_args, seeds);
        }
        if (*mean) {
            const auto log = load_metrics(metrics);
            NodeFilter filter;
            if (worst_only) {
                const auto w = worst_performers_quantile(log, 0.1);
                filter = [set = std::set<NodeId>(w.begin(), w.end())](NodeId n) { return set.count(n) > 0; };
            } else if (!nodes.empty()) {
                filter = [set = std::set<NodeId>(nodes.begin(), nodes.end())](NodeId n) { return set.count(n) > 0; };
            }
            target.emit([&](std::ostream& out) { write_series_csv(out, mean_accuracy_series(log, filter)); },
                        report_provenance({metrics}), gnuplot, PlotKind::series);
        } else if (*worst) {
            const auto log = load_metrics(metrics);
            const auto ids = k ? worst_performers(log, *k) : worst_performers_quantile(log, quantile);
            target.emit([&](std::ostream& out) { write_worst_csv(out, log, ids); },
                        report_provenance({metrics}), gnuplot, PlotKind::series);
        } else if (*sc) {
            const auto a = load_metrics(case1);
            const auto b = load_metrics(case2);
            const int at = round >= 0 ? round : a.last_round();
            const auto table = scatter(a, b, at);
            target.emit([&](std::ostream& out) { write_scatter_csv(out, table); },
                        report_provenance({case1, case2}), gnuplot, PlotKind::scatter);
        } else if (*cl) {
            const auto log = load_metrics(metrics);
            target.emit([&](std::ostream& out) { write_clusters_csv(out, cluster_summary(log, threshold)); },
                        report_provenance({metrics}), gnuplot, PlotKind::series);
        }
        return ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const ProvenanceMismatch& e) {
        std::cerr << "provenance mismatch: " << e.what() << '\n';
        return provenance;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
}
