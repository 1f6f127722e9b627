#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "core.hpp"
#include "params.hpp"

namespace icurisk {

inline constexpr double kBceClampLo = 1e-7;
inline constexpr double kBceClampHi = 1.0 - 1e-7;

struct BceResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d predictions, same shape
};

// Binary cross-entropy averaged over the per-hour predictions of one patient.
// Predictions are clamped to [1e-7, 1-1e-7] before the log; the gradient is the
// exact derivative of the clamped loss (zero in the flat clamp regions).
inline BceResult bce_loss(const Tensor& predictions, int label) {
    if (predictions.rank() != 1 || predictions.size() == 0)
        throw usage_error("bce_loss: predictions must be a non-empty vector");
    const std::size_t T = predictions.size();
    const double y = label ? 1.0 : 0.0;
    BceResult r;
    r.grad = Tensor({T});
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double p = predictions(t);
        const double pc = clamp(p, kBceClampLo, kBceClampHi);
        total += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        if (p > kBceClampLo && p < kBceClampHi)
            r.grad(t) = (pc - y) / (pc * (1.0 - pc) * static_cast<double>(T));
        else
            r.grad(t) = 0.0;
    }
    r.loss = total / static_cast<double>(T);
    return r;
}

// ---------------------------------------------------------------------------
// ADAM with bias correction. Frozen parameter groups receive no update and no
// moment accumulation, so frozen entries stay bit-identical across steps.
// ---------------------------------------------------------------------------

class AdamState {
public:
    explicit AdamState(double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    double lr() const { return lr_; }
    long step() const { return step_; }

    const Tensor& m(const std::string& name) const { return m_.at(name); }
    const Tensor& v(const std::string& name) const { return v_.at(name); }

    void ensure_slots(const ParamStore& params) {
        for (const auto& [name, t] : params.entries()) {
            if (!m_.count(name)) {
                m_.emplace(name, Tensor(t.shape()));
                v_.emplace(name, Tensor(t.shape()));
            }
        }
    }

    friend void adam_step(ParamStore& params, const GradMap& grads, AdamState& state);

private:
    double lr_, beta1_, beta2_, eps_;
    long step_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

inline void adam_step(ParamStore& params, const GradMap& grads, AdamState& state) {
    state.ensure_slots(params);
    state.step_ += 1;
    const double b1 = state.beta1_, b2 = state.beta2_;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step_));
    for (auto& [name, p] : params.entries()) {
        if (params.frozen(params.group(name))) continue;
        auto git = grads.find(name);
        if (git == grads.end()) throw usage_error("adam_step: missing gradient for " + name);
        const Tensor& g = git->second;
        if (!g.same_shape(p)) throw usage_error("adam_step: gradient shape mismatch for " + name);
        Tensor& m = state.m_.at(name);
        Tensor& v = state.v_.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            p[i] -= state.lr_ * mhat / (std::sqrt(vhat) + state.eps_);
        }
    }
}

// ---------------------------------------------------------------------------
// Central finite-difference gradient check against an analytic gradient map.
// The callable must be a pure function of the parameter values.
// ---------------------------------------------------------------------------

struct GradCheckEntry {
    std::string name;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    GradCheckEntry worst;
    std::size_t checked = 0;
    double tolerance = 0.0;
    bool pass = false;
};

inline double gradcheck_rel_err(double analytic, double numeric) {
    const double denom = std::max(1e-6, std::fabs(analytic) + std::fabs(numeric));
    return std::fabs(analytic - numeric) / denom;
}

using LossFn = std::function<double(const ParamStore&)>;
using LossGradFn = std::function<std::pair<double, GradMap>(const ParamStore&)>;

inline GradCheckReport gradient_check(const LossGradFn& loss_and_grad, ParamStore params,
                                      double tolerance, double step = 1e-5) {
    const auto [loss0, analytic] = loss_and_grad(params);
    (void)loss0;
    GradCheckReport report;
    report.tolerance = tolerance;
    for (const auto& name : params.names()) {
        Tensor& p = params.at(name);
        auto ait = analytic.find(name);
        if (ait == analytic.end())
            throw usage_error("gradient_check: analytic gradient missing for " + name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + step;
            const double up = loss_and_grad(params).first;
            p[i] = saved - step;
            const double down = loss_and_grad(params).first;
            p[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = ait->second[i];
            const double rel = gradcheck_rel_err(a, numeric);
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = {name, i, a, numeric, rel};
            }
        }
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
}

}  // namespace icurisk
