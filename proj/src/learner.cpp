#include "davg/learner.hpp"

#include "davg/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace davg {

std::vector<std::size_t> ModelParams::layer_sizes() const
{
    std::vector<std::size_t> sizes;
    if (layers.empty()) {
        return sizes;
    }
    sizes.push_back(static_cast<std::size_t>(layers.front().weight.cols()));
    for (const auto& l : layers) {
        sizes.push_back(static_cast<std::size_t>(l.weight.rows()));
    }
    return sizes;
}

std::size_t ModelParams::input_size() const
{
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t ModelParams::output_size() const
{
    return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
}

std::size_t ModelParams::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

bool ModelParams::all_finite() const
{
    return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
        return l.weight.allFinite() && l.bias.allFinite();
    });
}

bool ModelParams::same_shape(const ModelParams& other) const
{
    if (layers.size() != other.layers.size()) {
        return false;
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& a = layers[i];
        const auto& b = other.layers[i];
        if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()
            || a.bias.size() != b.bias.size()) {
            return false;
        }
    }
    return true;
}

ModelParams ModelParams::zeros_like() const
{
    ModelParams z;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
        z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                            Eigen::VectorXd::Zero(l.bias.size())});
    }
    return z;
}

OptimizerState OptimizerState::for_params(const ModelParams& p, double learning_rate,
                                          double momentum)
{
    if (!(learning_rate > 0.0)) {
        throw InvalidParameter("learning rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw InvalidParameter("momentum must lie in [0, 1)");
    }
    return {p.zeros_like(), learning_rate, momentum};
}

ModelParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed)
{
    if (layer_sizes.size() < 2) {
        throw InvalidParameter("init_params needs at least an input and an output size");
    }
    if (std::find(layer_sizes.begin(), layer_sizes.end(), std::size_t{0}) != layer_sizes.end()) {
        throw InvalidParameter("layer sizes must be positive");
    }
    auto rng = rng_stream(seed, 0, 0, StreamPurpose::init);
    ModelParams p;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(layer_sizes[l]);
        const auto out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index r = 0; r < out; ++r) {
            for (Eigen::Index c = 0; c < in; ++c) {
                layer.weight(r, c) = rng.uniform(-bound, bound);
            }
        }
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Eigen::MatrixXd forward_batch(const ModelParams& p, const Eigen::MatrixXd& inputs)
{
    if (p.layers.empty()) {
        throw InvalidParameter("forward on a model without layers");
    }
    if (static_cast<std::size_t>(inputs.rows()) != p.input_size()) {
        throw InvalidParameter("input has " + std::to_string(inputs.rows())
                               + " features, model expects " + std::to_string(p.input_size()));
    }
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        Eigen::MatrixXd z = layer.weight * a;
        z.colwise() += layer.bias;
        if (l + 1 < p.layers.size()) {
            a = z.cwiseMax(0.0);
        } else {
            a = std::move(z);
        }
    }
    return a;
}

Eigen::VectorXd forward(const ModelParams& p, const Eigen::VectorXd& x)
{
    return forward_batch(p, x);
}

namespace {

void check_labels(std::span<const Label> labels, Eigen::Index classes, Eigen::Index columns)
{
    if (labels.empty()) {
        throw InvalidParameter("loss over an empty batch");
    }
    if (static_cast<Eigen::Index>(labels.size()) != columns) {
        throw InvalidParameter("label count does not match batch size");
    }
    for (Label y : labels) {
        if (y < 0 || y >= classes) {
            throw InvalidParameter("label " + std::to_string(y) + " >= class count "
                                   + std::to_string(classes));
        }
    }
}

// softmax probabilities in place, returns summed -log p_y
double softmax_nll(Eigen::MatrixXd& logits, std::span<const Label> labels)
{
    double total = 0.0;
    for (Eigen::Index s = 0; s < logits.cols(); ++s) {
        auto col = logits.col(s);
        const double top = col.maxCoeff();
        col.array() -= top;
        const double z_y = col(labels[static_cast<std::size_t>(s)]);
        col = col.array().exp();
        const double sum = col.sum();
        total += std::log(sum) - z_y;
        col /= sum;
    }
    return total;
}

} // namespace

double cross_entropy(const Eigen::MatrixXd& logits, std::span<const Label> labels)
{
    check_labels(labels, logits.rows(), logits.cols());
    Eigen::MatrixXd work = logits;
    return softmax_nll(work, labels) / static_cast<double>(labels.size());
}

LossAndGrad loss_and_grad(const ModelParams& p, const Eigen::MatrixXd& inputs,
                          std::span<const Label> labels)
{
    if (p.layers.empty()) {
        throw InvalidParameter("loss_and_grad on a model without layers");
    }
    if (static_cast<std::size_t>(inputs.rows()) != p.input_size()) {
        throw InvalidParameter("input dimension does not match the model");
    }
    check_labels(labels, static_cast<Eigen::Index>(p.output_size()), inputs.cols());

    const std::size_t depth = p.layers.size();
    // activations[l] feeds layer l; pre[l] is layer l's pre-activation
    std::vector<Eigen::MatrixXd> activations(depth);
    std::vector<Eigen::MatrixXd> pre(depth);
    activations[0] = inputs;
    for (std::size_t l = 0; l < depth; ++l) {
        pre[l] = p.layers[l].weight * activations[l];
        pre[l].colwise() += p.layers[l].bias;
        if (l + 1 < depth) {
            activations[l + 1] = pre[l].cwiseMax(0.0);
        }
    }

    const auto batch = static_cast<double>(labels.size());
    Eigen::MatrixXd delta = pre.back();
    LossAndGrad out;
    out.loss = softmax_nll(delta, labels) / batch;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        delta(labels[s], static_cast<Eigen::Index>(s)) -= 1.0;
    }
    delta /= batch;

    out.grads.layers.resize(depth);
    for (std::size_t l = depth; l-- > 0;) {
        auto& g = out.grads.layers[l];
        g.weight = delta * activations[l].transpose();
        g.bias = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = p.layers[l].weight.transpose() * delta;
            delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return out;
}

LossAndGrad loss_and_grad(const ModelParams& p, const Dataset& batch)
{
    return loss_and_grad(p, batch.features, batch.labels);
}

void apply_sgd(ModelParams& p, OptimizerState& o, const Gradients& grads)
{
    if (!p.same_shape(grads) || !p.same_shape(o.velocity)) {
        throw InvalidParameter("sgd_step: parameter, velocity and gradient shapes differ");
    }
    if (!grads.all_finite()) {
        throw NumericError("sgd_step: non-finite gradient");
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& v = o.velocity.layers[l];
        const auto& g = grads.layers[l];
        v.weight = o.momentum * v.weight + g.weight;
        v.bias = o.momentum * v.bias + g.bias;
        p.layers[l].weight -= o.learning_rate * v.weight;
        p.layers[l].bias -= o.learning_rate * v.bias;
    }
    if (!p.all_finite()) {
        throw NumericError("sgd_step: parameters became non-finite");
    }
}

SgdResult sgd_step(ModelParams p, OptimizerState o, const Gradients& grads)
{
    apply_sgd(p, o, grads);
    return {std::move(p), std::move(o)};
}

TrainResult train_local(ModelParams p, OptimizerState o, const Dataset& shard, int epochs,
                        std::size_t batch_size, CounterRng& rng)
{
    if (shard.empty()) {
        throw InvalidParameter("train_local on an empty shard");
    }
    if (batch_size == 0) {
        throw InvalidParameter("batch size must be positive");
    }
    TrainResult out{std::move(p), std::move(o), 0.0};
    std::vector<std::size_t> order(shard.size());
    Eigen::MatrixXd inputs;
    std::vector<Label> labels;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span{order}, rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t len = std::min(batch_size, order.size() - start);
            inputs.resize(shard.features.rows(), static_cast<Eigen::Index>(len));
            labels.resize(len);
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t idx = order[start + k];
                inputs.col(static_cast<Eigen::Index>(k)) =
                    shard.features.col(static_cast<Eigen::Index>(idx));
                labels[k] = shard.labels[idx];
            }
            auto lg = loss_and_grad(out.params, inputs, labels);
            apply_sgd(out.params, out.optimizer, lg.grads);
            loss_sum += lg.loss * static_cast<double>(len);
        }
        out.mean_loss = loss_sum / static_cast<double>(order.size());
    }
    return out;
}

Label predict(const Eigen::VectorXd& logits)
{
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.size(); ++c) {
        if (logits(c) > logits(best)) {
            best = c;
        }
    }
    return static_cast<Label>(best);
}

double evaluate(const ModelParams& p, const Dataset& test)
{
    if (test.empty()) {
        throw InvalidParameter("evaluate on an empty test set");
    }
    constexpr Eigen::Index chunk = 1024;
    std::size_t correct = 0;
    for (Eigen::Index start = 0; start < test.features.cols(); start += chunk) {
        const Eigen::Index len = std::min(chunk, test.features.cols() - start);
        const Eigen::MatrixXd logits = forward_batch(p, test.features.middleCols(start, len));
        for (Eigen::Index s = 0; s < len; ++s) {
            if (predict(logits.col(s)) == test.labels[static_cast<std::size_t>(start + s)]) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

namespace {

constexpr std::array<char, 4> checkpoint_magic{'D', 'A', 'V', 'G'};
constexpr std::uint16_t checkpoint_version = 1;

template <class T>
void put_le(std::ostream& out, T value)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    auto bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.put(static_cast<char>(bits & 0xff));
        bits = static_cast<U>(bits >> 8);
    }
}

template <class T>
T get_le(std::istream& in, std::string_view field)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
    std::array<unsigned char, sizeof(T)> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), sizeof(T))) {
        throw FormatError("checkpoint truncated while reading " + std::string(field));
    }
    U bits = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        bits = static_cast<U>((bits << 8) | b[i]);
    }
    return std::bit_cast<T>(bits);
}

} // namespace

void save_checkpoint(std::ostream& out, const ModelParams& p)
{
    out.write(checkpoint_magic.data(), checkpoint_magic.size());
    put_le<std::uint16_t>(out, checkpoint_version);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.layers.size()));
    for (std::size_t s : p.layer_sizes()) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    }
    for (const auto& l : p.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                put_le<double>(out, l.weight(r, c));
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            put_le<double>(out, l.bias(r));
        }
    }
}

ModelParams load_checkpoint(std::istream& in)
{
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != checkpoint_magic) {
        throw FormatError("checkpoint: bad magic (expected DAVG)");
    }
    const auto version = get_le<std::uint16_t>(in, "version");
    if (version != checkpoint_version) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto count = get_le<std::uint32_t>(in, "layer count");
    std::vector<std::size_t> sizes(std::size_t{count} + 1);
    for (auto& s : sizes) {
        s = get_le<std::uint32_t>(in, "layer size");
    }
    ModelParams p;
    for (std::uint32_t l = 0; l < count; ++l) {
        const auto in_n = static_cast<Eigen::Index>(sizes[l]);
        const auto out_n = static_cast<Eigen::Index>(sizes[l + 1]);
        Layer layer{Eigen::MatrixXd(out_n, in_n), Eigen::VectorXd(out_n)};
        for (Eigen::Index r = 0; r < out_n; ++r) {
            for (Eigen::Index c = 0; c < in_n; ++c) {
                layer.weight(r, c) = get_le<double>(in, "weight");
            }
        }
        for (Eigen::Index r = 0; r < out_n; ++r) {
            layer.bias(r) = get_le<double>(in, "bias");
        }
        p.layers.push_back(std::move(layer));
    }
    return p;
}

} // namespace davg
