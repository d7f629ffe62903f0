#pragma once

#include "davg/data.hpp"
#include "davg/learner.hpp"
#include "davg/topology.hpp"

#include <memory>

namespace davg {

/// Per-node simulation state.
struct NodeState {
    NodeId id = 0;
    bool alive = true;
    Dataset shard; // empty for data-less relays
    std::shared_ptr<const ModelParams> params;
    OptimizerState optimizer;
    /// Total advert mass this node combined in its latest aggregation (0 before the first).
    double last_aggregated_mass = 0.0;

    bool holds_data() const noexcept { return !shard.empty(); }
};

} // namespace davg
