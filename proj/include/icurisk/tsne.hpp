#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Exact t-SNE (quadratic pairwise affinities, no tree approximation) with
// deterministic PCA initialization, so a given input and seed always produce
// the same embedding bit for bit.
// ---------------------------------------------------------------------------

struct TsneConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    std::size_t momentum_switch = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::uint64_t seed = 0;
    std::size_t max_points = 5000;

    void validate() const {
        if (!(perplexity > 0.0)) throw config_error("tsne: perplexity must be positive");
        if (iterations == 0) throw config_error("tsne: iterations must be positive");
        if (!(learning_rate > 0.0)) throw config_error("tsne: learning_rate must be positive");
        if (max_points < 4) throw config_error("tsne: max_points too small");
    }
};

struct TsneResult {
    Tensor embedding;                // (N_kept, 2)
    std::vector<double> kl_trace;    // KL(P||Q) per iteration, un-exaggerated P
    std::vector<std::size_t> kept;   // input row indices, ascending
};

namespace detail {

// Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues and
// fills the columns of V with the matching eigenvectors.
inline std::vector<double> jacobi_eigen(Tensor a, Tensor& v) {
    const std::size_t n = a.dim(0);
    v = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    return eig;
}

// First two principal component projections, rescaled per column to a small
// standard deviation. Component signs are fixed by making the largest-|loading|
// coordinate positive.
inline Tensor pca_init_2d(const Tensor& x) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
    for (double& m : mean) m /= static_cast<double>(n);
    Tensor cov({d, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = x(i, a) - mean[a];
            for (std::size_t b = a; b < d; ++b) cov(a, b) += xa * (x(i, b) - mean[b]);
        }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) /= static_cast<double>(n - 1);
            cov(b, a) = cov(a, b);
        }
    Tensor vecs;
    const auto eig = jacobi_eigen(cov, vecs);
    // Top-2 eigenvalue indices (stable order for exact ties).
    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });
    Tensor y({n, 2});
    for (std::size_t c = 0; c < 2 && c < d; ++c) {
        const std::size_t col = order[c];
        std::size_t top = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::fabs(vecs(j, col)) > std::fabs(vecs(top, col))) top = j;
        const double flip = vecs(top, col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += (x(i, j) - mean[j]) * vecs(j, col) * flip;
            y(i, c) = dot;
        }
    }
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += y(i, c);
        m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) ss += (y(i, c) - m) * (y(i, c) - m);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            y(i, c) = sd > 0.0 ? (y(i, c) - m) * (1e-4 / sd) : 0.0;
    }
    return y;
}

}  // namespace detail

// Row-conditional affinities with per-row precision found by binary search so
// each row's entropy matches log(perplexity), then symmetrized.
inline Tensor tsne_affinities(const Tensor& x, double perplexity) {
    const std::size_t n = x.dim(0), d = x.dim(1);
    if (static_cast<double>(n) < 3.0 * perplexity)
        throw config_error("tsne: need at least 3*perplexity points, got " + std::to_string(n));
    Tensor dist({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = x(i, k) - x(j, k);
                s += diff * diff;
            }
            dist(i, j) = dist(j, i) = s;
        }

    Tensor p({n, n});
    const double target_entropy = std::log(perplexity);
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                row[j] = std::exp(-beta * dist(i, j));
                sum += row[j];
                weighted += beta * dist(i, j) * row[j];
            }
            const double entropy = sum > 0.0 ? std::log(sum) + weighted / sum : 0.0;
            const double diff = entropy - target_entropy;
            if (std::fabs(diff) < 1e-7) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = beta_lo > 0.0 ? 0.5 * (beta + beta_lo) : beta / 2.0;
            }
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += row[j];
        for (std::size_t j = 0; j < n; ++j) p(i, j) = sum > 0.0 ? row[j] / sum : 0.0;
    }

    Tensor sym({n, n});
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sym(i, j) = std::max((p(i, j) + p(j, i)) * scale, 1e-12);
    return sym;
}

namespace detail {

// KL(P || Q) for an embedding y, with the same q floor the descent uses.
inline double kl_between(const Tensor& p, const Tensor& y) {
    const std::size_t n = y.dim(0);
    double w_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y(i, 0) - y(j, 0);
            const double dy = y(i, 1) - y(j, 1);
            w_sum += 2.0 / (1.0 + dx * dx + dy * dy);
        }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y(i, 0) - y(j, 0);
            const double dy = y(i, 1) - y(j, 1);
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            const double q = std::max(w / w_sum, 1e-12);
            kl += 2.0 * p(i, j) * std::log(p(i, j) / q);
        }
    return kl;
}

}  // namespace detail

inline TsneResult tsne(const Tensor& input, const TsneConfig& cfg) {
    cfg.validate();
    if (input.rank() != 2) throw usage_error("tsne: input must be (N,D)");
    std::size_t n_all = input.dim(0);
    const std::size_t d = input.dim(1);

    TsneResult result;
    result.kept.resize(n_all);
    for (std::size_t i = 0; i < n_all; ++i) result.kept[i] = i;
    if (n_all > cfg.max_points) {
        Rng rng(cfg.seed);
        rng.shuffle(result.kept);
        result.kept.resize(cfg.max_points);
        std::sort(result.kept.begin(), result.kept.end());
    }
    const std::size_t n = result.kept.size();
    Tensor x({n, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = input(result.kept[i], j);

    const Tensor p = tsne_affinities(x, cfg.perplexity);
    Tensor y = detail::pca_init_2d(x);
    Tensor velocity({n, 2}), gains({n, 2}, 1.0);
    Tensor w({n, n});
    std::vector<double> grad(2 * n);

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        const bool exaggerate = iter < cfg.exaggeration_iters;
        const double p_scale = exaggerate ? cfg.early_exaggeration : 1.0;
        const double momentum =
            iter < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;

        double w_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w(i, i) = 0.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y(i, 0) - y(j, 0);
                const double dy = y(i, 1) - y(j, 1);
                const double wij = 1.0 / (1.0 + dx * dx + dy * dy);
                w(i, j) = w(j, i) = wij;
                w_sum += 2.0 * wij;
            }
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        double kl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double q = std::max(w(i, j) / w_sum, 1e-12);
                const double mult = (p_scale * p(i, j) - q) * w(i, j);
                grad[2 * i] += 4.0 * mult * (y(i, 0) - y(j, 0));
                grad[2 * i + 1] += 4.0 * mult * (y(i, 1) - y(j, 1));
                if (j > i) kl += 2.0 * p(i, j) * std::log(p(i, j) / q);
            }
        }
        result.kl_trace.push_back(kl);

        const Tensor y_before = y;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                const double g = grad[2 * i + c];
                double& gain = gains(i, c);
                gain = (g > 0.0) != (velocity(i, c) > 0.0) ? gain + 0.2
                                                           : std::max(gain * 0.8, 0.01);
                velocity(i, c) = momentum * velocity(i, c) - cfg.learning_rate * gain * g;
                y(i, c) += velocity(i, c);
            }
        }
        if (!exaggerate) {
            // Momentum can overshoot once the exaggeration ends. Backtrack by
            // halving the applied step until the divergence stops rising; if
            // it still rises, keep the previous embedding and drop the
            // velocity. The trace stays non-increasing after exaggeration.
            double new_kl = detail::kl_between(p, y);
            int tries = 0;
            while (new_kl > kl && tries < 12) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t c = 0; c < 2; ++c) {
                        velocity(i, c) *= 0.5;
                        y(i, c) = y_before(i, c) + velocity(i, c);
                    }
                new_kl = detail::kl_between(p, y);
                ++tries;
            }
            if (new_kl > kl) {
                y = y_before;
                velocity.fill(0.0);
            }
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y(i, 0);
            my += y(i, 1);
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i, 0) -= mx;
            y(i, 1) -= my;
        }
    }
    result.embedding = std::move(y);
    return result;
}

}  // namespace icurisk
