#pragma once

#include "davg/data.hpp"
#include "davg/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace davg {

struct Layer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out

    bool operator==(const Layer& o) const
    {
        return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols()
               && bias.size() == o.bias.size() && weight == o.weight && bias == o.bias;
    }
};

/// Weights and biases of a fully connected ReLU network with a linear output layer.
struct ModelParams {
    std::vector<Layer> layers;

    /// [input, hidden..., output]
    std::vector<std::size_t> layer_sizes() const;
    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
    bool same_shape(const ModelParams& other) const;

    /// Same shapes, every entry zero.
    ModelParams zeros_like() const;

    bool operator==(const ModelParams&) const = default;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

struct OptimizerState {
    ModelParams velocity;
    double learning_rate = 0.01;
    double momentum = 0.5;

    static OptimizerState for_params(const ModelParams& p, double learning_rate, double momentum);
    bool operator==(const OptimizerState&) const = default;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases. Pure function of (sizes, seed).
ModelParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

Eigen::VectorXd forward(const ModelParams& p, const Eigen::VectorXd& x);
/// Column-per-sample batch forward; returns output_size x batch logits.
Eigen::MatrixXd forward_batch(const ModelParams& p, const Eigen::MatrixXd& inputs);

/// Mean softmax cross-entropy over logit columns.
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const Label> labels);

struct LossAndGrad {
    double loss = 0.0;
    Gradients grads;
};

/// Mean cross-entropy over the batch and its exact gradient.
LossAndGrad loss_and_grad(const ModelParams& p, const Eigen::MatrixXd& inputs,
                          std::span<const Label> labels);
LossAndGrad loss_and_grad(const ModelParams& p, const Dataset& batch);

/// Classical momentum: v <- momentum * v + g; w <- w - lr * v. Throws NumericError on non-finite grads.
void apply_sgd(ModelParams& p, OptimizerState& o, const Gradients& grads);

struct SgdResult {
    ModelParams params;
    OptimizerState optimizer;
};
SgdResult sgd_step(ModelParams p, OptimizerState o, const Gradients& grads);

struct TrainResult {
    ModelParams params;
    OptimizerState optimizer;
    double mean_loss = 0.0; // last epoch; 0 when epochs == 0
};

/// Shuffled mini-batch SGD over `shard`. The shard must be nonempty.
TrainResult train_local(ModelParams p, OptimizerState o, const Dataset& shard, int epochs,
                        std::size_t batch_size, CounterRng& rng);

/// Index of the largest logit, ties to the lower class id.
Label predict(const Eigen::VectorXd& logits);

/// Fraction of samples whose argmax logit equals the label.
double evaluate(const ModelParams& p, const Dataset& test);

// Checkpoint: "DAVG", u16 version, u32 layer count, u32 sizes, then per layer
// row-major f64 weights followed by f64 biases; all little-endian.
void save_checkpoint(std::ostream& out, const ModelParams& p);
ModelParams load_checkpoint(std::istream& in);

} // namespace davg
