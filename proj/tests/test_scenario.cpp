#include "davg/errors.hpp"
#include "davg/reporting.hpp"
#include "davg/scenario.hpp"

#include "desk.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace davg;
using davg::testing::desk_config;

namespace {

ScenarioConfig quick(std::uint64_t seed, DisruptionCase kind)
{
    auto cfg = desk_config(seed, kind);
    cfg.topology.nodes = 20;
    cfg.training.rounds = 8;
    cfg.training.epochs = 1;
    cfg.data.per_class = 60;
    cfg.data.test_per_class = 30;
    cfg.disruption.tau_drop = 3;
    return cfg;
}

void check_log_shape(const MetricsLog& log, const ScenarioConfig& cfg)
{
    std::set<std::pair<int, NodeId>> seen;
    for (const auto& r : log.records) {
        CHECK(r.alive);
        CHECK(seen.insert({r.round, r.node}).second);
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
    }
    const auto rounds = log.rounds();
    REQUIRE(rounds.size() == static_cast<std::size_t>(cfg.training.rounds));
    for (int t = 0; t < cfg.training.rounds; ++t) {
        CHECK(rounds[static_cast<std::size_t>(t)] == t);
    }
    CHECK(std::is_sorted(log.records.begin(), log.records.end(),
                         [](const MetricsRecord& a, const MetricsRecord& b) {
                             return std::pair{a.round, a.node} < std::pair{b.round, b.node};
                         }));
}

} // namespace

TEST_CASE("snapshot_rounds clips and deduplicates")
{
    auto cfg = quick(1, DisruptionCase::one);
    cfg.training.rounds = 200;
    cfg.disruption.tau_drop = 10;
    CHECK(snapshot_rounds(cfg) == std::vector<int>{10, 12, 199});
    cfg.training.rounds = 3;
    cfg.disruption.tau_drop = 0;
    CHECK(snapshot_rounds(cfg) == std::vector<int>{0, 2});
    cfg.disruption.tau_drop = 2;
    CHECK(snapshot_rounds(cfg) == std::vector<int>{2});
    cfg.disruption.kind = DisruptionCase::none;
    CHECK(snapshot_rounds(cfg) == std::vector<int>{2});
}

TEST_CASE("config validation")
{
    auto cfg = quick(1, DisruptionCase::one);
    cfg.validate();
    cfg.disruption.tau_drop = cfg.training.rounds + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = quick(1, DisruptionCase::one);
    cfg.disruption.fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = quick(1, DisruptionCase::none);
    cfg.topology.nodes = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = quick(1, DisruptionCase::none);
    cfg.training.momentum = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("log shape and drop completeness")
{
    for (auto kind : {DisruptionCase::none, DisruptionCase::one, DisruptionCase::two,
                      DisruptionCase::isolated}) {
        const auto cfg = quick(2, kind);
        const auto data = load_datasets(cfg);
        std::vector<ExchangeTrace> trace;
        const auto log = run_scenario_traced(cfg, data, {}, &trace);
        check_log_shape(log, cfg);
        CHECK(log.bridges.size() == 2);

        if (cfg.drop_enabled()) {
            for (const auto& r : log.records) {
                if (r.round >= cfg.disruption.tau_drop) {
                    CHECK_FALSE(std::binary_search(log.bridges.begin(), log.bridges.end(), r.node));
                }
            }
            for (const auto& tr : trace) {
                if (tr.round >= cfg.disruption.tau_drop) {
                    CHECK_FALSE(std::binary_search(log.bridges.begin(), log.bridges.end(),
                                                   tr.receiver));
                    for (NodeId s : tr.senders) {
                        CHECK_FALSE(std::binary_search(log.bridges.begin(), log.bridges.end(), s));
                    }
                }
            }
        }
        if (kind == DisruptionCase::isolated) {
            CHECK(trace.empty());
        }
    }
}

TEST_CASE("tau_drop = 0 removes bridges before anything is shared")
{
    auto cfg = quick(3, DisruptionCase::one);
    cfg.disruption.tau_drop = 0;
    const auto data = load_datasets(cfg);
    std::vector<ExchangeTrace> trace;
    const auto log = run_scenario_traced(cfg, data, {}, &trace);
    for (const auto& r : log.records) {
        CHECK_FALSE(std::binary_search(log.bridges.begin(), log.bridges.end(), r.node));
    }
    for (const auto& tr : trace) {
        for (NodeId s : tr.senders) {
            CHECK_FALSE(std::binary_search(log.bridges.begin(), log.bridges.end(), s));
        }
    }
    CHECK(log.records.size() == 8 * (20 - 2));
}

TEST_CASE("a drop that never fires matches the matching baseline")
{
    auto one = quick(4, DisruptionCase::one);
    one.disruption.tau_drop = one.training.rounds;
    auto none = one;
    none.disruption.kind = DisruptionCase::none;
    none.disruption.bridge_data = BridgeData::relays;
    const auto data = load_datasets(one);
    CHECK(run_scenario(one, data).records == run_scenario(none, data).records);

    auto two = one;
    two.disruption.kind = DisruptionCase::two;
    auto plain = two;
    plain.disruption.kind = DisruptionCase::none;
    plain.disruption.bridge_data = BridgeData::automatic;
    CHECK(run_scenario(two, data).records == run_scenario(plain, data).records);
}

TEST_CASE("post_exchange drop lets bridges send once more")
{
    auto cfg = quick(5, DisruptionCase::two);
    cfg.disruption.phase = DropPhase::post_exchange;
    const auto data = load_datasets(cfg);
    std::vector<ExchangeTrace> trace;
    const auto log = run_scenario_traced(cfg, data, {}, &trace);
    const int tau = cfg.disruption.tau_drop;
    bool bridge_sent_at_tau = false;
    for (const auto& tr : trace) {
        for (NodeId s : tr.senders) {
            const bool is_bridge = std::binary_search(log.bridges.begin(), log.bridges.end(), s);
            if (is_bridge && tr.round == tau) {
                bridge_sent_at_tau = true;
            }
            CHECK_FALSE((is_bridge && tr.round > tau));
        }
    }
    CHECK(bridge_sent_at_tau);
    for (const auto& r : log.records) {
        if (r.round >= tau) {
            CHECK_FALSE(std::binary_search(log.bridges.begin(), log.bridges.end(), r.node));
        }
    }
}

TEST_CASE("round t only sees round t-1 outputs")
{
    Graph line(5);
    for (NodeId i = 0; i + 1 < 5; ++i) {
        line.add_edge(i, i + 1);
    }
    auto cfg = quick(6, DisruptionCase::none);
    cfg.topology.nodes = 5;
    cfg.training.rounds = 6;
    const auto data = load_datasets(cfg);
    std::vector<ExchangeTrace> trace;
    run_scenario_traced(cfg, data, {}, &trace, line);
    REQUIRE(trace.size() == 5 * 5);
    for (const auto& tr : trace) {
        const auto expected_senders = line.neighbors(tr.receiver);
        CHECK(std::vector<NodeId>(expected_senders.begin(), expected_senders.end()) == tr.senders);
        for (int r : tr.sender_rounds) {
            CHECK(r == tr.round - 1);
        }
    }
}

TEST_CASE("results do not depend on the worker count")
{
    const auto cfg = quick(7, DisruptionCase::one);
    const auto data = load_datasets(cfg);
    const auto serial = run_scenario(cfg, data, {1});
    const auto pooled = run_scenario(cfg, data, {4});
    CHECK(serial.records == pooled.records);
    CHECK(serial.bridges == pooled.bridges);
}

TEST_CASE("isolated runs equal independent single-node training")
{
    const auto cfg = quick(8, DisruptionCase::isolated);
    const auto data = load_datasets(cfg);
    const auto log = run_scenario(cfg, data);
    const auto setup = prepare_scenario(cfg, data.train);

    const auto init = init_params(setup.layer_sizes, cfg.training.init_seed);
    std::vector<MetricsRecord> expected;
    std::vector<ModelParams> params(cfg.topology.nodes, init);
    std::vector<OptimizerState> opt(
        cfg.topology.nodes,
        OptimizerState::for_params(init, cfg.training.learning_rate, cfg.training.momentum));
    for (int t = 0; t < cfg.training.rounds; ++t) {
        for (NodeId i = 0; i < cfg.topology.nodes; ++i) {
            const auto shard = data.train.subset(setup.plan.assignments.at(i));
            auto rng = rng_stream(cfg.training.init_seed, i, static_cast<std::uint64_t>(t),
                                  StreamPurpose::shuffle);
            auto r = train_local(params[i], opt[i], shard, cfg.training.epochs,
                                 cfg.training.batch_size, rng);
            params[i] = r.params;
            opt[i] = r.optimizer;
            expected.push_back({t, i, true, setup.graph.degree(i), evaluate(params[i], data.test)});
        }
    }
    CHECK(log.records == expected);
}

TEST_CASE("case 1 data budgets")
{
    auto cfg = quick(9, DisruptionCase::one);
    const auto data = load_datasets(cfg);
    const auto full = prepare_scenario(cfg, data.train);
    CHECK(full.plan.recipients.size() == 18);
    std::size_t total = 0;
    for (const auto& [node, idx] : full.plan.assignments) {
        CHECK_FALSE(full.bridges.contains(node));
        total += idx.size();
    }
    CHECK(total == data.train.size());

    cfg.disruption.case1_budget = DataBudget::reduced;
    const auto reduced = prepare_scenario(cfg, data.train);
    CHECK(reduced.plan.recipients.size() == 18);
    std::size_t kept = 0;
    for (const auto& [node, idx] : reduced.plan.assignments) {
        kept += idx.size();
    }
    CHECK(kept == data.train.size() - 2 * data.train.size() / 20);

    auto two = quick(9, DisruptionCase::two);
    CHECK(prepare_scenario(two, data.train).plan.recipients.size() == 20);
}

TEST_CASE("relay rules change case 1 outcomes only through relays")
{
    auto cfg = quick(10, DisruptionCase::one);
    const auto data = load_datasets(cfg);
    const auto mean_rule = run_scenario(cfg, data);
    cfg.disruption.relay = RelayRule::zero;
    const auto zero_rule = run_scenario(cfg, data);
    cfg.disruption.relay = RelayRule::neighborhood_sum;
    const auto sum_rule = run_scenario(cfg, data);
    // round 0 has no exchange, so every rule agrees there
    for (std::size_t k = 0; k < 20; ++k) {
        CHECK(mean_rule.records[k] == zero_rule.records[k]);
        CHECK(mean_rule.records[k] == sum_rule.records[k]);
    }
    CHECK_FALSE(mean_rule.records == zero_rule.records);
}

TEST_CASE("numeric blow-up aborts with the round and node named")
{
    auto cfg = quick(11, DisruptionCase::none);
    cfg.training.learning_rate = 1e305;
    const auto data = load_datasets(cfg);
    CHECK_THROWS_WITH_AS(run_scenario(cfg, data), doctest::Contains("round 0, node"),
                         NumericError);
}

TEST_CASE("evaluation stride keeps the last round")
{
    auto cfg = quick(12, DisruptionCase::none);
    cfg.training.eval_every = 3;
    const auto log = run_scenario(cfg, load_datasets(cfg));
    CHECK(log.rounds() == std::vector<int>{0, 3, 6, 7});
}

TEST_CASE("early rounds improve on separable data")
{
    auto cfg = desk_config(1, DisruptionCase::none);
    cfg.data.spread = 0.3;
    cfg.training.rounds = 10;
    const auto series = mean_accuracy_series(run_scenario(cfg, load_datasets(cfg)));
    REQUIRE(series.size() == 10);
    for (std::size_t t = 1; t < series.size(); ++t) {
        CHECK(*series[t].mean >= *series[t - 1].mean - 0.02);
    }
    CHECK(*series.back().mean > *series.front().mean);
}
