#pragma once

#include <string>
#include <vector>

#include "core.hpp"
#include "model.hpp"
#include "params.hpp"
#include "train.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Domain adaptation by selective freezing and re-initialization of parameter
// groups in a source-pretrained model before fine-tuning on the target domain.
// ---------------------------------------------------------------------------

struct TransferPlan {
    std::string name;
    std::vector<ParamGroup> freeze;
    std::vector<ParamGroup> reinit;
    std::string description;
};

inline const std::vector<TransferPlan>& transfer_strategies() {
    static const std::vector<TransferPlan> plans{
        {"A1", {}, {}, "fine-tune all layers"},
        {"A2", {ParamGroup::conv}, {}, "freeze convolution, fine-tune the rest"},
        {"A3", {ParamGroup::conv, ParamGroup::lstm}, {}, "freeze convolution and recurrent layers"},
        {"A4",
         {ParamGroup::conv},
         {ParamGroup::lstm, ParamGroup::dense},
         "freeze convolution, retrain recurrent and dense layers from scratch"},
        {"A5",
         {ParamGroup::conv, ParamGroup::lstm},
         {ParamGroup::dense},
         "freeze convolution and recurrent layers, retrain dense layers from scratch"},
    };
    return plans;
}

inline const TransferPlan& transfer_plan(const std::string& name) {
    for (const auto& plan : transfer_strategies())
        if (plan.name == name) return plan;
    throw config_error("unknown transfer strategy: " + name);
}

// Re-initializes one tensor the way build_model would: rank-1 entries are
// biases and become zero; weight matrices draw N(0, 1/sqrt(fan_in)) where
// fan_in is the product of all input dimensions.
inline void reinit_entry(Tensor& t, Rng& rng) {
    if (t.rank() == 1) {
        t.fill(0.0);
        return;
    }
    std::size_t fan_in = 1;
    for (std::size_t d = 0; d + 1 < t.rank(); ++d) fan_in *= t.dim(d);
    t = normal_init(t.shape(), fan_in, rng);
}

// Builds the target-domain starting point from pretrained source parameters:
// copy, re-initialize the plan's reinit groups from the given seed, then set
// the frozen flags.
inline ParamStore apply_plan(const ParamStore& pretrained, const TransferPlan& plan,
                             std::uint64_t seed) {
    ParamStore out = pretrained;
    out.clear_frozen();
    Rng rng(seed);
    for (ParamGroup g : plan.reinit) {
        Rng group_rng = rng.child(static_cast<std::uint64_t>(g));
        for (const auto& name : out.names_in_group(g)) reinit_entry(out.at(name), group_rng);
    }
    for (ParamGroup g : plan.freeze) out.set_frozen(g, true);
    return out;
}

// Pretrains on the pooled source domains. Refuses to run if any pooled episode
// belongs to the held-out target domain.
inline TrainResult pretrain_source(const ModelConfig& cfg, const std::vector<EpisodeTensor>& train,
                                   const std::vector<EpisodeTensor>& val,
                                   const std::string& target_domain, const TrainConfig& tc) {
    for (const auto* set : {&train, &val})
        for (const auto& ep : *set)
            if (ep.domain == target_domain)
                throw leakage_error("target-domain patient " + ep.id +
                                    " found in the source pretraining pool");
    ParamStore params = build_model(cfg, tc.seed);
    return train_loop(cfg, std::move(params), train, val, tc);
}

// Fine-tunes an adapted parameter set on target-domain data with a fresh
// optimizer state. Frozen groups stay bit-identical.
inline TrainResult fine_tune(const ModelConfig& cfg, ParamStore params,
                             const std::vector<EpisodeTensor>& train,
                             const std::vector<EpisodeTensor>& val, const TrainConfig& tc) {
    return train_loop(cfg, std::move(params), train, val, tc);
}

}  // namespace icurisk
