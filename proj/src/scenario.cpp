#include "davg/scenario.hpp"

#include "davg/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>

namespace davg {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::pair<std::string_view, Enum> (&table)[N],
                std::string_view what)
{
    for (const auto& [name, value] : table) {
        if (name == text) {
            return value;
        }
    }
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

template <class Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::pair<std::string_view, Enum> (&table)[N])
{
    for (const auto& [name, v] : table) {
        if (v == value) {
            return name;
        }
    }
    return "?";
}

constexpr std::pair<std::string_view, DisruptionCase> case_names[] = {
    {"none", DisruptionCase::none},
    {"one", DisruptionCase::one},
    {"two", DisruptionCase::two},
    {"isolated", DisruptionCase::isolated},
};
constexpr std::pair<std::string_view, DropPhase> phase_names[] = {
    {"pre_exchange", DropPhase::pre_exchange},
    {"post_exchange", DropPhase::post_exchange},
};
constexpr std::pair<std::string_view, DataBudget> budget_names[] = {
    {"full", DataBudget::full},
    {"reduced", DataBudget::reduced},
};
constexpr std::pair<std::string_view, DataSource> source_names[] = {
    {"synth", DataSource::synth},
    {"idx", DataSource::idx},
};
constexpr std::pair<std::string_view, BridgeData> bridge_data_names[] = {
    {"auto", BridgeData::automatic},
    {"holders", BridgeData::holders},
    {"relays", BridgeData::relays},
};

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Rethrows the
/// failure of the lowest index so error reporting is worker-count independent.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn)
{
    std::vector<std::exception_ptr> errors(count);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            run(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    run(i);
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

[[noreturn]] void rethrow_with_context(int round, NodeId node, std::string_view phase)
{
    const std::string where = "round " + std::to_string(round) + ", node " + std::to_string(node)
                              + " (" + std::string(phase) + "): ";
    try {
        throw;
    } catch (const NumericError& e) {
        throw NumericError(where + e.what());
    } catch (const InvalidParameter& e) {
        throw InvalidParameter(where + e.what());
    }
}

} // namespace

DisruptionCase parse_case(std::string_view text) { return parse_enum(text, case_names, "case"); }
std::string_view to_string(DisruptionCase c) { return enum_name(c, case_names); }
DropPhase parse_drop_phase(std::string_view text)
{
    return parse_enum(text, phase_names, "drop phase");
}
std::string_view to_string(DropPhase p) { return enum_name(p, phase_names); }
DataBudget parse_data_budget(std::string_view text)
{
    return parse_enum(text, budget_names, "case1 data budget");
}
std::string_view to_string(DataBudget b) { return enum_name(b, budget_names); }
DataSource parse_data_source(std::string_view text)
{
    return parse_enum(text, source_names, "data source");
}
std::string_view to_string(DataSource s) { return enum_name(s, source_names); }
BridgeData parse_bridge_data(std::string_view text)
{
    return parse_enum(text, bridge_data_names, "bridge data mode");
}
std::string_view to_string(BridgeData b) { return enum_name(b, bridge_data_names); }

void ScenarioConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (topology.attachment < 1 || topology.nodes <= topology.attachment) {
        fail("topology: need nodes > m >= 1");
    }
    if (!(disruption.fraction > 0.0 && disruption.fraction < 1.0)) {
        fail("disruption.fraction must lie in (0, 1)");
    }
    if (training.rounds < 1) {
        fail("training.rounds must be >= 1");
    }
    if (drop_enabled() && (disruption.tau_drop < 0 || disruption.tau_drop > training.rounds)) {
        fail("disruption.tau_drop must lie in [0, rounds] (rounds disables the drop)");
    }
    if (training.epochs < 0) {
        fail("training.epochs must be >= 0");
    }
    if (training.batch_size < 1) {
        fail("training.batch_size must be >= 1");
    }
    if (!(training.learning_rate > 0.0)) {
        fail("training.learning_rate must be positive");
    }
    if (!(training.momentum >= 0.0 && training.momentum < 1.0)) {
        fail("training.momentum must lie in [0, 1)");
    }
    if (training.eval_every < 1) {
        fail("training.eval_every must be >= 1");
    }
    if (std::find(training.hidden.begin(), training.hidden.end(), std::size_t{0})
        != training.hidden.end()) {
        fail("training.hidden sizes must be positive");
    }
    if (data.source == DataSource::synth
        && (data.classes < 2 || data.per_class < 1 || data.test_per_class < 1 || data.dim < 1
            || !(data.spread >= 0.0))) {
        fail("data: synthetic source needs classes >= 2, per_class, test_per_class, dim >= 1 "
             "and spread >= 0");
    }
}

std::vector<int> MetricsLog::rounds() const
{
    std::vector<int> out;
    for (const auto& r : records) {
        if (out.empty() || out.back() != r.round) {
            out.push_back(r.round);
        }
    }
    return out;
}

int MetricsLog::last_round() const
{
    return records.empty() ? -1 : records.back().round;
}

IdxFiles idx_files(const ScenarioConfig& cfg)
{
    std::filesystem::path dir = cfg.data.dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("DAVG_DATA_DIR")) {
            dir = env;
        }
    }
    if (dir.empty()) {
        throw ConfigError("data.source=idx needs data.dir or DAVG_DATA_DIR");
    }
    return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
            dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
}

DatasetSplit load_datasets(const ScenarioConfig& cfg)
{
    const auto& d = cfg.data;
    if (d.source == DataSource::synth) {
        return synth_blobs_split(d.classes, d.per_class, d.test_per_class, d.dim, d.spread, d.seed);
    }
    const auto files = idx_files(cfg);
    DatasetSplit out;
    out.train = load_idx(files.train_images, files.train_labels);
    out.test = load_idx(files.test_images, files.test_labels);
    out.test.class_count = out.train.class_count = std::max(out.train.class_count,
                                                            out.test.class_count);
    return out;
}

namespace {

ScenarioSetup prepare_on_graph(const ScenarioConfig& cfg, const Dataset& train, Graph graph)
{
    ScenarioSetup s;
    s.graph = std::move(graph);
    s.bridges = select_bridges(s.graph, cfg.disruption.fraction);
    const bool drop_fires = cfg.drop_enabled() && cfg.disruption.tau_drop < cfg.training.rounds;
    s.disrupted = drop_fires ? remove_nodes(s.graph, s.bridges.node_ids) : s.graph;

    const std::size_t n = s.graph.node_count();
    std::vector<NodeId> everyone(n);
    for (NodeId i = 0; i < n; ++i) {
        everyone[i] = i;
    }
    if (cfg.bridges_are_relays()) {
        if (cfg.disruption.case1_budget == DataBudget::full) {
            std::vector<NodeId> holders;
            for (NodeId i : everyone) {
                if (!s.bridges.contains(i)) {
                    holders.push_back(i);
                }
            }
            s.plan = partition_iid(train, holders, cfg.data.seed);
        } else {
            s.plan = partition_iid(train, everyone, cfg.data.seed);
            for (NodeId b : s.bridges.node_ids) {
                s.plan.assignments.erase(b);
            }
            std::erase_if(s.plan.recipients, [&](NodeId i) { return s.bridges.contains(i); });
        }
    } else {
        s.plan = partition_iid(train, everyone, cfg.data.seed);
    }

    s.layer_sizes.push_back(train.dim());
    s.layer_sizes.insert(s.layer_sizes.end(), cfg.training.hidden.begin(),
                         cfg.training.hidden.end());
    s.layer_sizes.push_back(static_cast<std::size_t>(train.class_count));
    return s;
}

} // namespace

ScenarioSetup prepare_scenario(const ScenarioConfig& cfg, const Dataset& train)
{
    cfg.validate();
    return prepare_on_graph(cfg, train,
                            generate_ba(cfg.topology.nodes, cfg.topology.attachment,
                                        cfg.topology.seed));
}

MetricsLog run_scenario_traced(const ScenarioConfig& cfg, const DatasetSplit& data,
                               const RunOptions& options, std::vector<ExchangeTrace>* trace,
                               std::optional<Graph> graph_override)
{
    cfg.validate();
    if (data.train.empty() || data.test.empty()) {
        throw InvalidParameter("run_scenario needs nonempty train and test sets");
    }
    const ScenarioSetup setup =
        graph_override ? prepare_on_graph(cfg, data.train, std::move(*graph_override))
                       : prepare_on_graph(cfg, data.train,
                                          generate_ba(cfg.topology.nodes,
                                                      cfg.topology.attachment, cfg.topology.seed));
    const std::size_t n = setup.graph.node_count();
    const auto& tc = cfg.training;
    const bool exchange = cfg.disruption.kind != DisruptionCase::isolated;
    const int tau = cfg.drop_enabled() ? cfg.disruption.tau_drop : -1;
    const double mean_shard = setup.plan.mean_shard_size();

    const auto init = std::make_shared<const ModelParams>(init_params(setup.layer_sizes, tc.init_seed));
    const auto fresh_optimizer = OptimizerState::for_params(*init, tc.learning_rate, tc.momentum);

    std::vector<NodeState> nodes(n);
    for (NodeId i = 0; i < n; ++i) {
        nodes[i].id = i;
        nodes[i].params = init;
        nodes[i].optimizer = fresh_optimizer;
        if (auto it = setup.plan.assignments.find(i); it != setup.plan.assignments.end()) {
            nodes[i].shard = data.train.subset(it->second);
        }
    }
    // round whose output each node's current params represent (-1 = initialization)
    std::vector<int> produced_round(n, -1);

    MetricsLog log;
    log.config = cfg;
    log.bridges = setup.bridges.node_ids;

    const Graph* current = &setup.graph;
    auto switch_off = [&] {
        for (NodeId b : setup.bridges.node_ids) {
            nodes[b].alive = false;
        }
        current = &setup.disrupted;
    };

    std::vector<ModelAdvert> adverts(n);
    std::vector<std::shared_ptr<const ModelParams>> next(n);
    std::vector<double> next_mass(n, 0.0);
    std::vector<double> accuracy(n, 0.0);
    std::vector<ExchangeTrace> round_trace(trace ? n : 0);

    for (int t = 0; t < tc.rounds; ++t) {
        const bool drop_now = t == tau;
        if (drop_now && cfg.disruption.phase == DropPhase::pre_exchange) {
            switch_off();
        }

        if (exchange && t > 0) {
            for (NodeId i = 0; i < n; ++i) {
                if (nodes[i].alive) {
                    adverts[i] = make_advert(nodes[i], cfg.disruption.relay, mean_shard);
                }
            }
            parallel_for(n, options.workers, [&](std::size_t idx) {
                const auto i = static_cast<NodeId>(idx);
                if (!nodes[i].alive) {
                    return;
                }
                std::vector<ModelAdvert> received;
                for (NodeId j : current->neighbors(i)) {
                    if (nodes[j].alive) {
                        received.push_back(adverts[j]);
                    }
                }
                if (trace) {
                    auto& tr = round_trace[i];
                    tr = ExchangeTrace{t, i, {}, {}};
                    for (const auto& a : received) {
                        tr.senders.push_back(a.sender);
                        tr.sender_rounds.push_back(produced_round[a.sender]);
                    }
                }
                next_mass[i] = neighborhood_mass(adverts[i], received);
                try {
                    next[i] = std::make_shared<const ModelParams>(
                        aggregate(adverts[i], received, tc.aggregation));
                } catch (const DegenerateAggregate&) {
                    next[i] = nodes[i].params;
                } catch (...) {
                    rethrow_with_context(t, i, "aggregate");
                }
            });
            for (NodeId i = 0; i < n; ++i) {
                if (nodes[i].alive) {
                    nodes[i].params = std::move(next[i]);
                    nodes[i].last_aggregated_mass = next_mass[i];
                    if (trace) {
                        trace->push_back(std::move(round_trace[i]));
                    }
                }
            }
        }

        if (drop_now && cfg.disruption.phase == DropPhase::post_exchange) {
            switch_off();
        }

        const bool evaluate_now = t % tc.eval_every == 0 || t == tc.rounds - 1;
        parallel_for(n, options.workers, [&](std::size_t idx) {
            const auto i = static_cast<NodeId>(idx);
            auto& node = nodes[i];
            if (!node.alive) {
                return;
            }
            if (node.holds_data()) {
                auto rng = rng_stream(tc.init_seed, i, static_cast<std::uint64_t>(t),
                                      StreamPurpose::shuffle);
                try {
                    auto result = train_local(*node.params, std::move(node.optimizer), node.shard,
                                              tc.epochs, tc.batch_size, rng);
                    node.params = std::make_shared<const ModelParams>(std::move(result.params));
                    node.optimizer = std::move(result.optimizer);
                } catch (...) {
                    rethrow_with_context(t, i, "train");
                }
            }
            if (evaluate_now) {
                accuracy[i] = evaluate(*node.params, data.test);
            }
        });
        for (NodeId i = 0; i < n; ++i) {
            if (nodes[i].alive) {
                produced_round[i] = t;
            }
        }

        if (evaluate_now) {
            for (NodeId i = 0; i < n; ++i) {
                if (nodes[i].alive) {
                    log.records.push_back({t, i, true, setup.disrupted.degree(i), accuracy[i]});
                }
            }
        }
    }
    return log;
}

MetricsLog run_scenario(const ScenarioConfig& cfg, const DatasetSplit& data,
                        const RunOptions& options)
{
    return run_scenario_traced(cfg, data, options, nullptr);
}

MetricsLog run_scenario(const ScenarioConfig& cfg, const RunOptions& options)
{
    cfg.validate();
    return run_scenario(cfg, load_datasets(cfg), options);
}

std::vector<int> snapshot_rounds(const ScenarioConfig& cfg)
{
    const int last = cfg.training.rounds - 1;
    std::vector<int> out{last};
    if (cfg.drop_enabled()) {
        const int tau = cfg.disruption.tau_drop;
        for (int r : {tau, tau + 2}) {
            if (r >= 0 && r <= last) {
                out.push_back(r);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace davg
