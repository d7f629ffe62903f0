#pragma once

#include "davg/learner.hpp"
#include "davg/node.hpp"
#include "davg/topology.hpp"

#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace davg {

/// What a node shares with its neighbors after a round.
struct ModelAdvert {
    NodeId sender = 0;
    std::shared_ptr<const ModelParams> params;
    double mass = 0.0; // the |D_j| used for weighting
};

enum class AggregationRule {
    normalized, // weights mass_j / sum(mass), summing to one
    literal,    // the normalized combination further divided by the neighbor count
};

/// How a node without local data weights its relayed model.
enum class RelayRule {
    mean_shard,       // mean shard size over data-holding nodes
    zero,             // mass 0: receivers ignore the advert
    neighborhood_sum, // total mass the relay combined in its last aggregation
};

AggregationRule parse_aggregation_rule(std::string_view text);
std::string_view to_string(AggregationRule rule);
RelayRule parse_relay_rule(std::string_view text);
std::string_view to_string(RelayRule rule);

/**
 * DecAvg combination over the neighborhood including self.
 *
 * Adverts are ordered by sender id before a fixed-order reduction, so the
 * result does not depend on how neighbors are listed. The last positive-mass
 * weight is 1 minus the others. The sum is accumulated as offsets from the
 * first model, which makes consensus inputs come back bit-identical, and each
 * coordinate is clamped to the inputs' range.
 *
 * Throws DegenerateAggregate when every mass is zero, InvalidParameter on
 * shape mismatch.
 */
ModelParams aggregate(const ModelAdvert& self, std::span<const ModelAdvert> neighbors,
                      AggregationRule rule = AggregationRule::normalized);

/// Sum of positive advert masses over self and neighbors.
double neighborhood_mass(const ModelAdvert& self, std::span<const ModelAdvert> neighbors);

/// Throws InvalidParameter for a dead node.
ModelAdvert make_advert(const NodeState& node, RelayRule rule, double mean_shard_size);

} // namespace davg
