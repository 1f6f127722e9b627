// Shared test helpers: independent oracles (brute-force AUC, numerically
// integrated t distribution, silhouette), tiny fixture builders, and a
// scratch-directory guard. Oracles are written as differently as possible
// from the library code they check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <icurisk/icurisk.hpp>

namespace testsupport {

// Brute-force AUC: every (positive, negative) pair, ties get half credit.
inline double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Student-t two-sided p-value via adaptive Simpson integration of the density.
inline double t_density(double x, double nu) {
    return std::exp(std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0)) /
           std::sqrt(nu * std::acos(-1.0)) *
           std::pow(1.0 + x * x / nu, -(nu + 1.0) / 2.0);
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-12) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson(f, a, b, fa, fm, fb, whole, eps, 40);
}

inline double t_two_sided_p_oracle(double t, double nu) {
    const double a = std::fabs(t);
    // P(|T| > a) = 1 - integral of the density over [-a, a]
    const double inner = integrate([nu](double x) { return t_density(x, nu); }, -a, a);
    return std::max(0.0, 1.0 - inner);
}

// Mean silhouette over all points: a = mean intra-cluster distance,
// b = smallest mean distance to another cluster.
inline double silhouette(const icurisk::Tensor& points, const std::vector<int>& cluster) {
    const std::size_t n = points.dim(0), d = points.dim(1);
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = points(i, k) - points(j, k);
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    int n_clusters = 0;
    for (int c : cluster) n_clusters = std::max(n_clusters, c + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(n_clusters, 0.0);
        std::vector<std::size_t> count(n_clusters, 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[cluster[j]] += dist(i, j);
            ++count[cluster[j]];
        }
        const int own = cluster[i];
        const double a = count[own] ? sum[own] / count[own] : 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < n_clusters; ++c)
            if (c != own && count[c]) b = std::min(b, sum[c] / count[c]);
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

// Deterministic tiny model + episode builders for the heavier modules.
inline icurisk::ModelConfig tiny_model_config(std::size_t n_features) {
    icurisk::ModelConfig cfg;
    cfg.n_features = n_features;
    cfg.conv_filters = 6;
    cfg.kernel_size = 3;
    cfg.pool_window = 2;
    cfg.lstm_hidden = 8;
    cfg.dense_hidden = 6;
    cfg.dropout = 0.0;
    return cfg;
}

inline icurisk::Tensor random_episode_values(icurisk::Rng& rng, std::size_t hours,
                                             std::size_t features) {
    icurisk::Tensor v({hours, features});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform();
    return v;
}

inline std::vector<icurisk::EpisodeTensor> toy_episode_set(std::uint64_t seed, std::size_t n,
                                                           std::size_t features,
                                                           double death_rate = 0.5) {
    icurisk::Rng rng(seed);
    std::vector<icurisk::EpisodeTensor> out;
    for (std::size_t i = 0; i < n; ++i) {
        icurisk::EpisodeTensor ep;
        ep.id = "p" + std::to_string(i);
        ep.domain = "Toy";
        ep.outcome = rng.uniform() < death_rate ? 1 : 0;
        ep.values = random_episode_values(rng, icurisk::kHours, features);
        ep.mask.assign(icurisk::kHours * features, 1);
        // Give the label a learnable footprint in channel 0.
        if (ep.outcome == 1)
            for (std::size_t h = 0; h < icurisk::kHours; ++h) ep.values(h, 0) += 0.8;
        out.push_back(std::move(ep));
    }
    return out;
}

// Creates a unique scratch directory under the build tree, removed on demand.
struct ScratchDir {
    std::filesystem::path path;
    explicit ScratchDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("icurisk_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testsupport
