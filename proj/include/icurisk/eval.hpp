#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Midranks: ranks 1..n with tied values sharing the average of their ranks.
// ---------------------------------------------------------------------------

inline std::vector<double> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average of i+1..j+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

// Area under the ROC curve by the rank-sum identity; ties contribute 1/2
// through midranks, matching pairwise counting exactly.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw usage_error("auc: scores/labels size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw usage_error("auc: needs both outcome classes in the evaluation set");
    const auto ranks = midranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) rank_sum += ranks[i];
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Spearman rank correlation: Pearson correlation of midranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw usage_error("spearman: need two equal-length series of length >= 2");
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw usage_error("spearman: a series is constant after ranking");
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Student-t tail probability via the regularized incomplete beta function,
// evaluated with a Lentz continued fraction.
// ---------------------------------------------------------------------------

namespace detail {

inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-15, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) <= kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw usage_error("incomplete_beta: a,b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Two-sided p-value of a t statistic with df degrees of freedom.
inline double t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw usage_error("t_two_sided_p: df must be positive");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TtestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    double mean_diff = 0.0;
};

// Paired two-sided t-test on matched samples (e.g. per-fold metric pairs).
inline TtestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw usage_error("paired_ttest: need matched samples of length >= 2");
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n - 1);
    TtestResult r;
    r.mean_diff = mean;
    r.df = static_cast<double>(n - 1);
    if (var == 0.0) {
        // All differences identical: degenerate but well-defined limits.
        r.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
        r.p = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.t = mean / std::sqrt(var / static_cast<double>(n));
    r.p = t_two_sided_p(r.t, r.df);
    return r;
}

// Relative gain of a over baseline b, in percent.
inline double percent_gain(double a, double b) {
    if (b == 0.0) throw usage_error("percent_gain: zero baseline");
    return 100.0 * (a - b) / b;
}

// ---------------------------------------------------------------------------
// Dynamic risks and horizon-resolved discrimination. The architecture is
// causal, so one forward pass yields the risk after every prefix length.
// ---------------------------------------------------------------------------

inline Tensor dynamic_risk_matrix(const ModelConfig& cfg, const ParamStore& params,
                                  const std::vector<EpisodeTensor>& episodes) {
    if (episodes.empty()) throw usage_error("dynamic_risk_matrix: empty episode list");
    const std::size_t T = episodes.front().values.dim(0);
    Tensor risks({episodes.size(), T});
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        DynamicPrediction pred = model_forward(cfg, params, episodes[i].values);
        for (std::size_t t = 0; t < T; ++t) risks(i, t) = pred.risks(t);
    }
    return risks;
}

inline double auc_at_horizon(const ModelConfig& cfg, const ParamStore& params,
                             const std::vector<EpisodeTensor>& episodes, std::size_t y) {
    const Tensor risks = dynamic_risk_matrix(cfg, params, episodes);
    if (y < 1 || y > risks.dim(1))
        throw usage_error("auc_at_horizon: horizon out of range");
    std::vector<double> scores(episodes.size());
    std::vector<int> labels(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        scores[i] = risks(i, y - 1);
        labels[i] = episodes[i].outcome;
    }
    return auc(scores, labels);
}

struct HorizonAuc {
    std::size_t hours = 0;
    double auc = 0.0;
};

inline std::vector<HorizonAuc> auc_vs_hours(const ModelConfig& cfg, const ParamStore& params,
                                            const std::vector<EpisodeTensor>& episodes,
                                            const std::vector<std::size_t>& horizons) {
    if (horizons.empty()) throw usage_error("auc_vs_hours: empty horizon grid");
    const Tensor risks = dynamic_risk_matrix(cfg, params, episodes);
    std::vector<int> labels(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) labels[i] = episodes[i].outcome;
    std::vector<HorizonAuc> out;
    for (std::size_t y : horizons) {
        if (y < 1 || y > risks.dim(1))
            throw usage_error("auc_vs_hours: horizon " + std::to_string(y) + " out of range");
        std::vector<double> scores(episodes.size());
        for (std::size_t i = 0; i < episodes.size(); ++i) scores[i] = risks(i, y - 1);
        out.push_back({y, auc(scores, labels)});
    }
    return out;
}

inline void write_horizon_csv(const std::vector<HorizonAuc>& rows,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write horizon file: " + path.string());
    out << "hours,auc\n";
    for (const auto& r : rows) out << r.hours << "," << format_double(r.auc) << "\n";
}

// ---------------------------------------------------------------------------
// Gain tables: percentage improvement of one horizon curve over another,
// per domain and per horizon.
// ---------------------------------------------------------------------------

struct GainRow {
    std::string domain;
    std::size_t hours = 0;
    double gain_pct = 0.0;
};

inline std::vector<GainRow> gains_table(
    const std::map<std::string, std::vector<HorizonAuc>>& report_a,
    const std::map<std::string, std::vector<HorizonAuc>>& report_b) {
    std::vector<GainRow> out;
    if (report_a.size() != report_b.size())
        throw usage_error("gains_table: reports cover different domains");
    for (const auto& [domain, curve_a] : report_a) {
        auto it = report_b.find(domain);
        if (it == report_b.end())
            throw usage_error("gains_table: domain " + domain + " missing from second report");
        const auto& curve_b = it->second;
        if (curve_a.size() != curve_b.size())
            throw usage_error("gains_table: horizon grids differ for domain " + domain);
        for (std::size_t i = 0; i < curve_a.size(); ++i) {
            if (curve_a[i].hours != curve_b[i].hours)
                throw usage_error("gains_table: horizon grids differ for domain " + domain);
            out.push_back({domain, curve_a[i].hours,
                           percent_gain(curve_a[i].auc, curve_b[i].auc)});
        }
    }
    return out;
}

inline void write_gains_csv(const std::vector<GainRow>& rows,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write gains file: " + path.string());
    out << "domain,hours,gain_pct\n";
    for (const auto& r : rows)
        out << r.domain << "," << r.hours << "," << format_double(r.gain_pct) << "\n";
}

// ---------------------------------------------------------------------------
// Experiment results: one row per (target domain, model, fold).
// ---------------------------------------------------------------------------

struct ResultRow {
    std::string target_domain;
    std::string model;  // "TT", "pooled", "A1".."A5"
    int fold = 0;
    std::size_t horizon = 0;
    double auc = 0.0;
};

inline void write_results_csv(const std::vector<ResultRow>& rows,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write results file: " + path.string());
    out << "target_domain,model,fold,horizon,auc\n";
    for (const auto& r : rows)
        out << r.target_domain << "," << r.model << "," << r.fold << "," << r.horizon << ","
            << format_double(r.auc) << "\n";
}

// Per-fold AUCs of one (domain, model) cell, ordered by fold id.
inline std::vector<double> fold_aucs(const std::vector<ResultRow>& rows,
                                     const std::string& domain, const std::string& model) {
    std::map<int, double> by_fold;
    for (const auto& r : rows)
        if (r.target_domain == domain && r.model == model) by_fold[r.fold] = r.auc;
    std::vector<double> out;
    for (const auto& [fold, v] : by_fold) out.push_back(v);
    return out;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw usage_error("mean_of: empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Cross-domain summary table: per-domain fold-mean AUC per model plus an
// unweighted macro average across domains.
inline std::string render_result_table(const std::vector<ResultRow>& rows,
                                       const std::vector<std::string>& domains,
                                       const std::vector<std::string>& models) {
    std::ostringstream os;
    os << "model";
    for (const auto& d : domains) os << "," << d;
    os << ",macro_avg\n";
    for (const auto& m : models) {
        os << m;
        double total = 0.0;
        std::size_t n = 0;
        for (const auto& d : domains) {
            const auto v = fold_aucs(rows, d, m);
            if (v.empty()) {
                os << ",";
                continue;
            }
            const double mean = mean_of(v);
            os << "," << format_double(mean, 4);
            total += mean;
            ++n;
        }
        os << "," << (n ? format_double(total / static_cast<double>(n), 4) : "") << "\n";
    }
    return os.str();
}

}  // namespace icurisk
