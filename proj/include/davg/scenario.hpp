#pragma once

#include "davg/data.hpp"
#include "davg/learner.hpp"
#include "davg/protocol.hpp"
#include "davg/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace davg {

enum class DisruptionCase {
    none,     // full DecAvg, nobody is switched off
    one,      // bridges hold no data; switch-off costs connectivity only
    two,      // bridges hold data; switch-off costs connectivity and data
    isolated, // every node trains alone, no exchange at all
};

enum class DropPhase { pre_exchange, post_exchange };
enum class DataBudget { full, reduced };
enum class DataSource { synth, idx };

/// Whether selected bridges receive a data shard. `automatic` means relays in
/// case ONE and holders otherwise.
enum class BridgeData { automatic, holders, relays };

DisruptionCase parse_case(std::string_view text);
std::string_view to_string(DisruptionCase c);
DropPhase parse_drop_phase(std::string_view text);
std::string_view to_string(DropPhase p);
DataBudget parse_data_budget(std::string_view text);
std::string_view to_string(DataBudget b);
DataSource parse_data_source(std::string_view text);
std::string_view to_string(DataSource s);
BridgeData parse_bridge_data(std::string_view text);
std::string_view to_string(BridgeData b);

struct TopologyConfig {
    std::size_t nodes = 30;
    std::size_t attachment = 2;
    std::uint64_t seed = 1;
};

struct DisruptionConfig {
    DisruptionCase kind = DisruptionCase::none;
    double fraction = 0.10;
    int tau_drop = 5; // == rounds means the drop never fires
    DropPhase phase = DropPhase::pre_exchange;
    RelayRule relay = RelayRule::mean_shard;
    DataBudget case1_budget = DataBudget::full;
    BridgeData bridge_data = BridgeData::automatic;
};

struct TrainingConfig {
    std::vector<std::size_t> hidden{32, 16};
    double learning_rate = 0.01;
    double momentum = 0.5;
    int epochs = 1;
    std::size_t batch_size = 32;
    int rounds = 30;
    std::uint64_t init_seed = 1;
    AggregationRule aggregation = AggregationRule::normalized;
    int eval_every = 1;
};

struct DataConfig {
    DataSource source = DataSource::synth;
    std::string dir; // IDX directory; falls back to $DAVG_DATA_DIR
    std::uint64_t seed = 1;
    int classes = 4;
    std::size_t per_class = 200;
    std::size_t test_per_class = 100;
    std::size_t dim = 16;
    double spread = 1.0;
};

struct OutputConfig {
    std::string dir = ".";
    std::string prefix = "run";
};

struct ScenarioConfig {
    TopologyConfig topology;
    DisruptionConfig disruption;
    TrainingConfig training;
    DataConfig data;
    OutputConfig output;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
    bool drop_enabled() const noexcept
    {
        return disruption.kind == DisruptionCase::one || disruption.kind == DisruptionCase::two;
    }
    bool bridges_are_relays() const noexcept
    {
        return disruption.bridge_data == BridgeData::relays
               || (disruption.bridge_data == BridgeData::automatic
                   && disruption.kind == DisruptionCase::one);
    }
};

struct MetricsRecord {
    int round = 0;
    NodeId node = 0;
    bool alive = true;
    std::size_t degree_post = 0;
    double accuracy = 0.0;

    bool operator==(const MetricsRecord&) const = default;
};

/// Per-(round, alive node) accuracies plus the configuration that produced them.
struct MetricsLog {
    ScenarioConfig config;
    std::vector<NodeId> bridges;
    std::vector<MetricsRecord> records; // sorted by (round, node)

    std::vector<int> rounds() const;
    int last_round() const;
};

/// Execution knobs that must not change results.
struct RunOptions {
    unsigned workers = 1;
};

struct IdxFiles {
    std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// MNIST file names under data.dir, or $DAVG_DATA_DIR when data.dir is empty.
IdxFiles idx_files(const ScenarioConfig& cfg);

/// Resolves the configured dataset (synthetic blobs or IDX files).
DatasetSplit load_datasets(const ScenarioConfig& cfg);

/// Everything a run derives from the configuration before round 0.
struct ScenarioSetup {
    Graph graph;      // before disruption
    Graph disrupted;  // after removing bridges (== graph when no drop fires)
    BridgeSet bridges;
    PartitionPlan plan;
    std::vector<std::size_t> layer_sizes;
};

ScenarioSetup prepare_scenario(const ScenarioConfig& cfg, const Dataset& train);

/**
 * Synchronous DecAvg simulation.
 *
 * Round 0 trains every data holder from the shared initialization without
 * exchanging. Every later round aggregates the previous round's snapshots over
 * the current graph, then trains, then evaluates. Bridges switch off at the
 * start of round tau_drop (or between aggregation and training with
 * post_exchange). ISOLATED never exchanges.
 */
MetricsLog run_scenario(const ScenarioConfig& cfg, const DatasetSplit& data,
                        const RunOptions& options = {});
MetricsLog run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

/// Rounds {tau_drop, tau_drop + 2, rounds - 1}, clipped, deduplicated and sorted.
std::vector<int> snapshot_rounds(const ScenarioConfig& cfg);

/// Observer hook used by tests to audit the exchange; called once per aggregation.
struct ExchangeTrace {
    int round;
    NodeId receiver;
    std::vector<NodeId> senders;
    std::vector<int> sender_rounds; // round whose output each advert carried
};

MetricsLog run_scenario_traced(const ScenarioConfig& cfg, const DatasetSplit& data,
                               const RunOptions& options, std::vector<ExchangeTrace>* trace,
                               std::optional<Graph> graph_override = std::nullopt);

} // namespace davg
