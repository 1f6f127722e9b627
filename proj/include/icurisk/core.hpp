#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace icurisk {

// ---------------------------------------------------------------------------
// Error taxonomy. CLI maps these to exit codes: config/usage -> 2,
// data -> 3, leakage/internal -> 4.
// ---------------------------------------------------------------------------

struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct leakage_error : std::runtime_error {
    explicit leakage_error(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Tensor: dense row-major array of doubles with up to 3 dimensions.
// Value semantics throughout; shapes are fixed at construction.
// ---------------------------------------------------------------------------

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (std::size_t d : shape_) n *= d;
        data_.assign(n, fill);
    }

    static Tensor vec(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
    static Tensor mat(std::size_t r, std::size_t c, double fill = 0.0) { return Tensor({r, c}, fill); }
    static Tensor cube(std::size_t a, std::size_t b, std::size_t c, double fill = 0.0) {
        return Tensor({a, b, c}, fill);
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& flat() { return data_; }
    const std::vector<double>& flat() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& operator()(std::size_t i) { return data_[i]; }
    double operator()(std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline std::string shape_string(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape()[i]);
    }
    return s + ")";
}

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                          const std::string& what) {
    if (t.shape() != shape) {
        std::string want = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) want += ",";
            want += std::to_string(shape[i]);
        }
        want += ")";
        throw config_error(what + ": expected shape " + want + ", got " + shape_string(t));
    }
}

// ---------------------------------------------------------------------------
// Rng: xoshiro256** seeded via splitmix64. Self-contained so that streams are
// bit-reproducible regardless of standard library implementation.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed0_(seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
        have_spare_ = false;
        spare_ = 0.0;
    }

    std::uint64_t seed() const { return seed0_; }

    // Independent child stream; mixing keeps sibling streams decorrelated.
    Rng child(std::uint64_t stream) const {
        std::uint64_t x = seed0_ ^ (0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL);
        return Rng(splitmix64(x));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; caches the spare draw.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw usage_error("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t seed0_ = 0;
    std::array<std::uint64_t, 4> state_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small numeric helpers shared across modules.
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Fixed-format double for CSV artifacts; deterministic given the value.
inline std::string format_double(double v, int precision = 10) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

}  // namespace icurisk
