#include "davg/protocol.hpp"

#include "davg/errors.hpp"

#include <algorithm>
#include <string>

namespace davg {

AggregationRule parse_aggregation_rule(std::string_view text)
{
    if (text == "normalized") {
        return AggregationRule::normalized;
    }
    if (text == "literal") {
        return AggregationRule::literal;
    }
    throw InvalidParameter("unknown aggregation rule '" + std::string(text) + "'");
}

std::string_view to_string(AggregationRule rule)
{
    return rule == AggregationRule::normalized ? "normalized" : "literal";
}

RelayRule parse_relay_rule(std::string_view text)
{
    if (text == "mean-shard") {
        return RelayRule::mean_shard;
    }
    if (text == "zero") {
        return RelayRule::zero;
    }
    if (text == "neighborhood-sum") {
        return RelayRule::neighborhood_sum;
    }
    throw InvalidParameter("unknown relay rule '" + std::string(text) + "'");
}

std::string_view to_string(RelayRule rule)
{
    switch (rule) {
    case RelayRule::mean_shard:
        return "mean-shard";
    case RelayRule::zero:
        return "zero";
    case RelayRule::neighborhood_sum:
        return "neighborhood-sum";
    }
    return "?";
}

namespace {

std::vector<const ModelAdvert*> sorted_adverts(const ModelAdvert& self,
                                               std::span<const ModelAdvert> neighbors)
{
    std::vector<const ModelAdvert*> all;
    all.reserve(neighbors.size() + 1);
    all.push_back(&self);
    for (const auto& a : neighbors) {
        all.push_back(&a);
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const ModelAdvert* a, const ModelAdvert* b) { return a->sender < b->sender; });
    return all;
}

} // namespace

double neighborhood_mass(const ModelAdvert& self, std::span<const ModelAdvert> neighbors)
{
    double total = 0.0;
    for (const ModelAdvert* a : sorted_adverts(self, neighbors)) {
        if (a->mass > 0.0) {
            total += a->mass;
        }
    }
    return total;
}

ModelParams aggregate(const ModelAdvert& self, std::span<const ModelAdvert> neighbors,
                      AggregationRule rule)
{
    if (!self.params) {
        throw InvalidParameter("aggregate: self advert carries no parameters");
    }
    std::vector<const ModelAdvert*> contributing;
    for (const ModelAdvert* a : sorted_adverts(self, neighbors)) {
        if (!a->params) {
            throw InvalidParameter("aggregate: advert from node " + std::to_string(a->sender)
                                   + " carries no parameters");
        }
        if (!a->params->same_shape(*self.params)) {
            throw InvalidParameter("aggregate: advert from node " + std::to_string(a->sender)
                                   + " has mismatched shapes");
        }
        if (a->mass > 0.0) {
            contributing.push_back(a);
        }
    }
    if (contributing.empty()) {
        throw DegenerateAggregate("aggregate: all advert masses are zero for node "
                                  + std::to_string(self.sender));
    }

    double total = 0.0;
    for (const ModelAdvert* a : contributing) {
        total += a->mass;
    }
    std::vector<double> weights(contributing.size());
    double assigned = 0.0;
    for (std::size_t k = 0; k + 1 < contributing.size(); ++k) {
        weights[k] = contributing[k]->mass / total;
        assigned += weights[k];
    }
    weights.back() = 1.0 - assigned;

    const ModelParams& anchor = *contributing.front()->params;
    ModelParams out = anchor;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        auto& w = out.layers[l].weight;
        auto& b = out.layers[l].bias;
        Eigen::MatrixXd w_lo = w;
        Eigen::MatrixXd w_hi = w;
        Eigen::VectorXd b_lo = b;
        Eigen::VectorXd b_hi = b;
        for (std::size_t k = 1; k < contributing.size(); ++k) {
            const auto& src = contributing[k]->params->layers[l];
            w.noalias() += weights[k] * (src.weight - anchor.layers[l].weight);
            b.noalias() += weights[k] * (src.bias - anchor.layers[l].bias);
            w_lo = w_lo.cwiseMin(src.weight);
            w_hi = w_hi.cwiseMax(src.weight);
            b_lo = b_lo.cwiseMin(src.bias);
            b_hi = b_hi.cwiseMax(src.bias);
        }
        if (contributing.size() > 1) {
            w = w.cwiseMax(w_lo).cwiseMin(w_hi);
            b = b.cwiseMax(b_lo).cwiseMin(b_hi);
        }
    }

    if (rule == AggregationRule::literal) {
        const auto links = static_cast<double>(std::max<std::size_t>(neighbors.size(), 1));
        for (auto& layer : out.layers) {
            layer.weight /= links;
            layer.bias /= links;
        }
    }
    return out;
}

ModelAdvert make_advert(const NodeState& node, RelayRule rule, double mean_shard_size)
{
    if (!node.alive) {
        throw InvalidParameter("make_advert: node " + std::to_string(node.id) + " is dead");
    }
    ModelAdvert advert{node.id, node.params, 0.0};
    if (node.holds_data()) {
        advert.mass = static_cast<double>(node.shard.size());
        return advert;
    }
    switch (rule) {
    case RelayRule::mean_shard:
        advert.mass = mean_shard_size;
        break;
    case RelayRule::zero:
        advert.mass = 0.0;
        break;
    case RelayRule::neighborhood_sum:
        advert.mass = node.last_aggregated_mass;
        break;
    }
    return advert;
}

} // namespace davg
