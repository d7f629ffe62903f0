#pragma once

// Reference implementations used only by tests. Each one follows the textbook
// definition directly and shares no code path with the library.

#include "davg/learner.hpp"
#include "davg/protocol.hpp"
#include "davg/topology.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace davg::oracle {

/// Burt's constraint from a dense adjacency matrix with a plain triple loop.
inline double brute_constraint(const std::vector<std::vector<int>>& a, std::size_t i)
{
    const std::size_t n = a.size();
    auto p = [&](std::size_t x, std::size_t y) {
        double deg = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            deg += a[x][k];
        }
        return deg == 0.0 ? 0.0 : a[x][y] / deg;
    };
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !a[i][j]) {
            continue;
        }
        double s = p(i, j);
        for (std::size_t q = 0; q < n; ++q) {
            if (q != i && q != j) {
                s += p(i, q) * p(q, j);
            }
        }
        c += s * s;
    }
    return c;
}

inline std::vector<std::vector<int>> dense(const Graph& g)
{
    const std::size_t n = g.node_count();
    std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
    for (auto [u, v] : g.edges()) {
        a[u][v] = a[v][u] = 1;
    }
    return a;
}

/// Naive weighted mean: sum_j (m_j / M) * w_j, coordinate by coordinate.
inline ModelParams weighted_mean(const std::vector<ModelAdvert>& adverts)
{
    double total = 0.0;
    for (const auto& a : adverts) {
        total += a.mass;
    }
    ModelParams out = adverts.front().params->zeros_like();
    for (const auto& a : adverts) {
        for (std::size_t l = 0; l < out.layers.size(); ++l) {
            for (Eigen::Index r = 0; r < out.layers[l].weight.rows(); ++r) {
                for (Eigen::Index c = 0; c < out.layers[l].weight.cols(); ++c) {
                    out.layers[l].weight(r, c) += a.mass / total * a.params->layers[l].weight(r, c);
                }
                out.layers[l].bias(r) += a.mass / total * a.params->layers[l].bias(r);
            }
        }
    }
    return out;
}

/// Visits every scalar parameter by reference, in layer/row/column order, weights before biases.
inline void for_each_param(ModelParams& p, const std::function<void(double&)>& fn)
{
    for (auto& l : p.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                fn(l.weight(r, c));
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            fn(l.bias(r));
        }
    }
}

/// Mean cross-entropy evaluated straight from the definition, one sample at a time.
inline double naive_loss(const ModelParams& p, const Eigen::MatrixXd& x, const std::vector<Label>& y)
{
    double total = 0.0;
    for (Eigen::Index s = 0; s < x.cols(); ++s) {
        Eigen::VectorXd a = x.col(s);
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            Eigen::VectorXd z = p.layers[l].weight * a + p.layers[l].bias;
            if (l + 1 < p.layers.size()) {
                for (Eigen::Index k = 0; k < z.size(); ++k) {
                    z(k) = z(k) > 0.0 ? z(k) : 0.0;
                }
            }
            a = z;
        }
        double denom = 0.0;
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            denom += std::exp(a(k));
        }
        total += std::log(denom) - a(y[static_cast<std::size_t>(s)]);
    }
    return total / static_cast<double>(x.cols());
}

/// Central finite-difference gradient of naive_loss.
inline std::vector<double> numeric_gradient(const ModelParams& p, const Eigen::MatrixXd& x,
                                            const std::vector<Label>& y, double eps)
{
    std::vector<double> out;
    ModelParams probe = p;
    for_each_param(probe, [&](double& w) {
        const double keep = w;
        w = keep + eps;
        const double up = naive_loss(probe, x, y);
        w = keep - eps;
        const double down = naive_loss(probe, x, y);
        w = keep;
        out.push_back((up - down) / (2.0 * eps));
    });
    return out;
}

} // namespace davg::oracle
