#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Per-channel Shapley attributions of the per-hour risk. A coalition is a set
// of input channels; channels outside the coalition are replaced by the
// all-zero column, which is exactly how a never-measured channel enters the
// network. The model is causal, so one forward pass per coalition values all
// 48 horizons at once.
// ---------------------------------------------------------------------------

struct AttributionMatrix {
    std::string patient_id;
    Tensor values;         // (T, F) Shapley value per hour and channel
    Tensor standard_error; // (T, F); zero for the exact method
    Tensor baseline_risk;  // (T,) risk of the empty coalition
    Tensor full_risk;      // (T,) risk with every channel present
};

namespace detail {

inline Tensor coalition_risks(const ModelConfig& cfg, const ParamStore& params,
                              const Tensor& values, const std::vector<std::uint8_t>& in_set) {
    const std::size_t T = values.dim(0), F = values.dim(1);
    Tensor masked({T, F});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) masked(t, f) = in_set[f] ? values(t, f) : 0.0;
    return model_forward(cfg, params, masked).risks;
}

}  // namespace detail

// Exact Shapley values by coalition enumeration; feasible up to 12 channels.
inline AttributionMatrix shapley_exact(const ModelConfig& cfg, const ParamStore& params,
                                       const Tensor& values, const std::string& patient_id = "") {
    const std::size_t T = values.dim(0), F = values.dim(1);
    if (F > 12)
        throw usage_error("shapley_exact: " + std::to_string(F) +
                          " channels need 2^F passes; use shapley_mc instead");
    const std::size_t n_sets = std::size_t{1} << F;

    // Risk of every coalition, indexed by channel bitmask.
    std::vector<Tensor> risk_of(n_sets);
    std::vector<std::uint8_t> in_set(F, 0);
    for (std::size_t mask = 0; mask < n_sets; ++mask) {
        for (std::size_t f = 0; f < F; ++f) in_set[f] = (mask >> f) & 1u;
        risk_of[mask] = detail::coalition_risks(cfg, params, values, in_set);
    }

    std::vector<double> factorial(F + 1, 1.0);
    for (std::size_t i = 1; i <= F; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

    AttributionMatrix out;
    out.patient_id = patient_id;
    out.values = Tensor({T, F});
    out.standard_error = Tensor({T, F});
    out.baseline_risk = risk_of[0];
    out.full_risk = risk_of[n_sets - 1];
    for (std::size_t f = 0; f < F; ++f) {
        const std::size_t bit = std::size_t{1} << f;
        for (std::size_t mask = 0; mask < n_sets; ++mask) {
            if (mask & bit) continue;
            std::size_t s = 0;
            for (std::size_t g = 0; g < F; ++g) s += (mask >> g) & 1u;
            const double weight =
                factorial[s] * factorial[F - 1 - s] / factorial[F];
            const Tensor& without = risk_of[mask];
            const Tensor& with = risk_of[mask | bit];
            for (std::size_t t = 0; t < T; ++t)
                out.values(t, f) += weight * (with(t) - without(t));
        }
    }
    return out;
}

// Monte-Carlo Shapley estimate: averages marginal contributions over random
// channel permutations. Each permutation costs F+1 forward passes and updates
// every horizon at once.
inline AttributionMatrix shapley_mc(const ModelConfig& cfg, const ParamStore& params,
                                    const Tensor& values, std::size_t permutations,
                                    std::uint64_t seed, const std::string& patient_id = "") {
    if (permutations < 1) throw config_error("shapley_mc: need at least one permutation");
    const std::size_t T = values.dim(0), F = values.dim(1);

    Tensor mean({T, F}), m2({T, F});
    std::vector<std::size_t> order(F);
    std::vector<std::uint8_t> in_set(F, 0);
    Rng rng(seed);

    std::fill(in_set.begin(), in_set.end(), 0);
    const Tensor empty_risk = detail::coalition_risks(cfg, params, values, in_set);
    std::fill(in_set.begin(), in_set.end(), 1);
    const Tensor full_risk = detail::coalition_risks(cfg, params, values, in_set);

    for (std::size_t m = 1; m <= permutations; ++m) {
        for (std::size_t f = 0; f < F; ++f) order[f] = f;
        rng.shuffle(order);
        std::fill(in_set.begin(), in_set.end(), 0);
        Tensor prev = empty_risk;
        for (std::size_t step = 0; step < F; ++step) {
            const std::size_t f = order[step];
            in_set[f] = 1;
            // The last addition always completes the full coalition.
            Tensor cur = step + 1 == F ? full_risk
                                       : detail::coalition_risks(cfg, params, values, in_set);
            for (std::size_t t = 0; t < T; ++t) {
                const double marginal = cur(t) - prev(t);
                const double delta = marginal - mean(t, f);
                mean(t, f) += delta / static_cast<double>(m);
                m2(t, f) += delta * (marginal - mean(t, f));
            }
            prev = std::move(cur);
        }
    }

    AttributionMatrix out;
    out.patient_id = patient_id;
    out.values = mean;
    out.standard_error = Tensor({T, F});
    if (permutations > 1)
        for (std::size_t i = 0; i < m2.size(); ++i)
            out.standard_error[i] =
                std::sqrt(m2[i] / static_cast<double>(permutations - 1) /
                          static_cast<double>(permutations));
    out.baseline_risk = empty_risk;
    out.full_risk = full_risk;
    return out;
}

// Channels ranked by mean absolute attribution across hours.
struct ChannelImportance {
    std::string name;
    std::size_t channel = 0;
    double mean_abs = 0.0;
};

inline std::vector<ChannelImportance> rank_channels(const AttributionMatrix& attr,
                                                    const std::vector<std::string>& names) {
    const std::size_t T = attr.values.dim(0), F = attr.values.dim(1);
    if (names.size() != F) throw usage_error("rank_channels: names/channel count mismatch");
    std::vector<ChannelImportance> out(F);
    for (std::size_t f = 0; f < F; ++f) {
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) s += std::fabs(attr.values(t, f));
        out[f] = {names[f], f, s / static_cast<double>(T)};
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.mean_abs > b.mean_abs;
    });
    return out;
}

inline void write_attribution_csv(const AttributionMatrix& attr,
                                  const std::vector<std::string>& names, const Tensor& raw_values,
                                  const std::filesystem::path& path) {
    const std::size_t T = attr.values.dim(0), F = attr.values.dim(1);
    if (names.size() != F) throw usage_error("write_attribution_csv: names mismatch");
    const auto ranking = rank_channels(attr, names);
    std::vector<std::size_t> rank_of(F, 0);
    for (std::size_t r = 0; r < ranking.size(); ++r) rank_of[ranking[r].channel] = r + 1;
    std::ofstream out(path);
    if (!out) throw data_error("cannot write attribution file: " + path.string());
    out << "patient_id,hour,feature,raw_value,shapley_value,rank\n";
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f)
            out << attr.patient_id << "," << (t + 1) << "," << names[f] << ","
                << format_double(raw_values(t, f)) << "," << format_double(attr.values(t, f))
                << "," << rank_of[f] << "\n";
}

}  // namespace icurisk
