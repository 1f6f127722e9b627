#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "data.hpp"
#include "layers.hpp"
#include "optim.hpp"
#include "params.hpp"

namespace icurisk {

inline constexpr double kRiskClamp = 1e-12;

// ---------------------------------------------------------------------------
// ModelConfig: architecture hyperparameters of the convolutional-recurrent
// risk model. Defaults follow the reference configuration.
// ---------------------------------------------------------------------------

struct ModelConfig {
    std::size_t n_features = 0;
    std::size_t conv_filters = 64;
    std::size_t kernel_size = 5;
    std::size_t stride = 1;
    std::size_t pool_window = 4;
    std::size_t lstm_hidden = 70;
    std::size_t dense_hidden = 64;
    double dropout = 0.2;
    double learning_rate = 0.001;

    void validate() const {
        if (n_features == 0) throw config_error("model: n_features must be positive");
        if (conv_filters == 0) throw config_error("model: conv_filters must be positive");
        if (kernel_size == 0) throw config_error("model: kernel_size must be positive");
        if (stride != 1) throw config_error("model: only stride 1 is supported");
        if (pool_window == 0) throw config_error("model: pool_window must be positive");
        if (lstm_hidden == 0) throw config_error("model: lstm_hidden must be positive");
        if (dense_hidden == 0) throw config_error("model: dense_hidden must be positive");
        if (!(dropout >= 0.0) || dropout >= 1.0)
            throw config_error("model: dropout must be in [0,1)");
        if (!(learning_rate > 0.0)) throw config_error("model: learning_rate must be positive");
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"n_features", c.n_features},
                       {"conv_filters", c.conv_filters},
                       {"kernel_size", c.kernel_size},
                       {"stride", c.stride},
                       {"pool_window", c.pool_window},
                       {"lstm_hidden", c.lstm_hidden},
                       {"dense_hidden", c.dense_hidden},
                       {"dropout", c.dropout},
                       {"learning_rate", c.learning_rate}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("n_features").get_to(c.n_features);
    j.at("conv_filters").get_to(c.conv_filters);
    j.at("kernel_size").get_to(c.kernel_size);
    j.at("stride").get_to(c.stride);
    j.at("pool_window").get_to(c.pool_window);
    j.at("lstm_hidden").get_to(c.lstm_hidden);
    j.at("dense_hidden").get_to(c.dense_hidden);
    j.at("dropout").get_to(c.dropout);
    j.at("learning_rate").get_to(c.learning_rate);
}

// Freshly initialized parameters: weights ~ N(0, 1/sqrt(fan_in)), zero biases.
// Draw order is fixed, so a seed pins every weight.
inline ParamStore build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore params;
    params.set_rng_seed(seed);
    Rng rng(seed);
    const std::size_t F = cfg.n_features, C = cfg.conv_filters;
    const std::size_t K = cfg.kernel_size, H = cfg.lstm_hidden, D = cfg.dense_hidden;
    params.add("conv.kernel", ParamGroup::conv, normal_init({K, F, C}, K * F, rng));
    params.add("conv.bias", ParamGroup::conv, Tensor({C}));
    params.add("lstm.w_ih", ParamGroup::lstm, normal_init({C, 4 * H}, C, rng));
    params.add("lstm.w_hh", ParamGroup::lstm, normal_init({H, 4 * H}, H, rng));
    params.add("lstm.bias", ParamGroup::lstm, Tensor({4 * H}));
    params.add("dense1.weight", ParamGroup::dense, normal_init({H, D}, H, rng));
    params.add("dense1.bias", ParamGroup::dense, Tensor({D}));
    params.add("dense2.weight", ParamGroup::dense, normal_init({D, 1}, D, rng));
    params.add("dense2.bias", ParamGroup::dense, Tensor({1}));
    return params;
}

// ---------------------------------------------------------------------------
// Forward pass. Produces a risk in (0,1) for every hour and keeps the
// recurrent hidden state per hour as the patient representation.
// ---------------------------------------------------------------------------

struct DynamicPrediction {
    std::string patient_id;
    Tensor risks;            // (T,), clamped to [1e-12, 1-1e-12]
    Tensor representations;  // (T, H) recurrent hidden states
};

struct ModelCache {
    Tensor input;        // (T, F)
    Tensor conv_out;     // (T, C)
    MaxPoolCache pool;
    Tensor pool_out;     // (T, C)
    Tensor act1;         // selu(pool_out)
    DropoutMask drop1;
    Tensor drop1_out;
    LstmCache lstm;
    DropoutMask drop2;
    Tensor drop2_out;    // (T, H)
    Tensor dense1_pre;   // (T, D)
    Tensor dense1_act;
    DropoutMask drop3;
    Tensor drop3_out;
    Tensor logits;       // (T, 1)
    Tensor risks;        // (T,) raw sigmoid, unclamped
};

inline DynamicPrediction model_forward(const ModelConfig& cfg, const ParamStore& params,
                                       const Tensor& values, bool train_mode = false,
                                       Rng* rng = nullptr, ModelCache* cache = nullptr,
                                       const std::string& patient_id = "") {
    if (values.rank() != 2 || values.dim(1) != cfg.n_features)
        throw usage_error("model_forward: input must be (T," + std::to_string(cfg.n_features) +
                          "), got " + shape_string(values));
    if (train_mode && cfg.dropout > 0.0 && rng == nullptr)
        throw usage_error("model_forward: training mode with dropout needs an rng");
    const std::size_t T = values.dim(0);
    const double keep = 1.0 - cfg.dropout;
    Rng unused(0);
    Rng& r = rng ? *rng : unused;

    ModelCache local;
    ModelCache& cc = cache ? *cache : local;
    cc.input = values;
    cc.conv_out = conv1d_forward(values, params.at("conv.kernel"), params.at("conv.bias"));
    cc.pool_out = maxpool1d_forward(cc.conv_out, static_cast<int>(cfg.pool_window), true, &cc.pool);
    cc.act1 = selu(cc.pool_out);
    cc.drop1_out = dropout_forward(cc.act1, keep, train_mode, r, &cc.drop1);
    Tensor hidden = lstm_forward(cc.drop1_out, params.at("lstm.w_ih"), params.at("lstm.w_hh"),
                                 params.at("lstm.bias"), &cc.lstm);
    cc.drop2_out = dropout_forward(hidden, keep, train_mode, r, &cc.drop2);
    cc.dense1_pre =
        dense_seq_forward(cc.drop2_out, params.at("dense1.weight"), params.at("dense1.bias"));
    cc.dense1_act = selu(cc.dense1_pre);
    cc.drop3_out = dropout_forward(cc.dense1_act, keep, train_mode, r, &cc.drop3);
    cc.logits = dense_seq_forward(cc.drop3_out, params.at("dense2.weight"), params.at("dense2.bias"));

    cc.risks = Tensor({T});
    DynamicPrediction pred;
    pred.patient_id = patient_id;
    pred.risks = Tensor({T});
    for (std::size_t t = 0; t < T; ++t) {
        cc.risks(t) = sigmoid(cc.logits(t, 0));
        pred.risks(t) = clamp(cc.risks(t), kRiskClamp, 1.0 - kRiskClamp);
    }
    pred.representations = cc.lstm.hidden;
    return pred;
}

// Backward pass from d(loss)/d(risk). Returns gradients for every parameter,
// frozen or not; freezing is enforced at the optimizer.
inline GradMap model_backward(const ModelConfig& cfg, const ParamStore& params,
                              const ModelCache& cache, const Tensor& risk_grad) {
    (void)cfg;  // shape information lives in the cache
    const std::size_t T = cache.input.dim(0);
    require_shape(risk_grad, {T}, "model_backward risk_grad");

    Tensor d_logits({T, 1});
    for (std::size_t t = 0; t < T; ++t) {
        const double p = cache.risks(t);
        d_logits(t, 0) = risk_grad(t) * p * (1.0 - p);
    }

    GradMap grads;
    DenseGrads g2 = dense_seq_backward(cache.drop3_out, params.at("dense2.weight"), d_logits);
    grads.emplace("dense2.weight", std::move(g2.weight));
    grads.emplace("dense2.bias", std::move(g2.bias));
    Tensor d_dense1_act = dropout_backward(cache.drop3, g2.input);
    Tensor d_dense1_pre = selu_backward(cache.dense1_pre, d_dense1_act);
    DenseGrads g1 = dense_seq_backward(cache.drop2_out, params.at("dense1.weight"), d_dense1_pre);
    grads.emplace("dense1.weight", std::move(g1.weight));
    grads.emplace("dense1.bias", std::move(g1.bias));
    Tensor d_hidden = dropout_backward(cache.drop2, g1.input);
    LstmGrads gl = lstm_backward(cache.lstm, params.at("lstm.w_ih"), params.at("lstm.w_hh"), d_hidden);
    grads.emplace("lstm.w_ih", std::move(gl.w_ih));
    grads.emplace("lstm.w_hh", std::move(gl.w_hh));
    grads.emplace("lstm.bias", std::move(gl.bias));
    Tensor d_act1 = dropout_backward(cache.drop1, gl.input);
    Tensor d_pool = selu_backward(cache.pool_out, d_act1);
    Tensor d_conv = maxpool1d_backward(cache.pool, d_pool);
    Conv1dGrads gc = conv1d_backward(cache.input, params.at("conv.kernel"), d_conv);
    grads.emplace("conv.kernel", std::move(gc.kernel));
    grads.emplace("conv.bias", std::move(gc.bias));
    return grads;
}

// Loss and gradient of the mean per-hour cross-entropy for one episode.
inline std::pair<double, GradMap> episode_loss_and_grad(const ModelConfig& cfg,
                                                        const ParamStore& params,
                                                        const Tensor& values, int label,
                                                        bool train_mode = false,
                                                        Rng* rng = nullptr) {
    ModelCache cache;
    DynamicPrediction pred = model_forward(cfg, params, values, train_mode, rng, &cache);
    BceResult bce = bce_loss(pred.risks, label);
    GradMap grads = model_backward(cfg, params, cache, bce.grad);
    return {bce.loss, std::move(grads)};
}

inline double episode_loss(const ModelConfig& cfg, const ParamStore& params, const Tensor& values,
                           int label) {
    DynamicPrediction pred = model_forward(cfg, params, values);
    return bce_loss(pred.risks, label).loss;
}

// Risk after the first y hours of data (1-based horizon).
inline double predict_at_horizon(const ModelConfig& cfg, const ParamStore& params,
                                 const Tensor& values, std::size_t y) {
    if (y < 1 || y > values.dim(0))
        throw usage_error("predict_at_horizon: horizon " + std::to_string(y) +
                          " outside [1," + std::to_string(values.dim(0)) + "]");
    DynamicPrediction pred = model_forward(cfg, params, values);
    return pred.risks(y - 1);
}

// ---------------------------------------------------------------------------
// Checkpoints: a single JSON document with config, parameters, frozen flags,
// seed, and optionally the scaling statistics the model was trained with.
// Serialization is byte-stable: ordered keys, exact double round-trip.
// ---------------------------------------------------------------------------

struct Checkpoint {
    ModelConfig config;
    ParamStore params;
    std::vector<std::string> features;        // empty if not recorded
    std::optional<ScalingStats> scaling;
};

inline nlohmann::json checkpoint_to_json(const ModelConfig& cfg, const ParamStore& params,
                                         const std::vector<std::string>& features = {},
                                         const ScalingStats* scaling = nullptr) {
    nlohmann::json j;
    j["format"] = "icurisk-checkpoint";
    j["version"] = 1;
    j["config"] = cfg;
    j["rng_seed"] = params.rng_seed();
    auto frozen = nlohmann::json::array();
    for (ParamGroup g : all_groups())
        if (params.frozen(g)) frozen.push_back(to_string(g));
    j["frozen"] = std::move(frozen);
    nlohmann::json entries;
    for (const auto& [name, t] : params.entries()) {
        nlohmann::json e;
        e["group"] = to_string(params.group(name));
        e["shape"] = t.shape();
        e["data"] = t.flat();
        entries[name] = std::move(e);
    }
    j["params"] = std::move(entries);
    if (!features.empty()) j["features"] = features;
    if (scaling) {
        nlohmann::json s;
        s["fmin"] = scaling->fmin;
        s["fmax"] = scaling->fmax;
        s["seen"] = scaling->seen;
        j["scaling"] = std::move(s);
    }
    return j;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ParamStore& params,
                            const std::vector<std::string>& features = {},
                            const ScalingStats* scaling = nullptr) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write checkpoint: " + path.string());
    out << checkpoint_to_json(cfg, params, features, scaling).dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ": bad checkpoint json: " + std::string(e.what()));
    }
    try {
        if (j.at("format") != "icurisk-checkpoint")
            throw data_error(path.string() + ": not a checkpoint file");
        Checkpoint ck;
        ck.config = j.at("config").get<ModelConfig>();
        ck.params.set_rng_seed(j.at("rng_seed").get<std::uint64_t>());
        for (const auto& [name, e] : j.at("params").items()) {
            const ParamGroup group = parse_group(e.at("group").get<std::string>());
            const auto shape = e.at("shape").get<std::vector<std::size_t>>();
            Tensor t(shape);
            const auto data = e.at("data").get<std::vector<double>>();
            if (data.size() != t.size())
                throw data_error(path.string() + ": parameter " + name + " size mismatch");
            for (std::size_t i = 0; i < data.size(); ++i) t[i] = data[i];
            ck.params.add(name, group, std::move(t));
        }
        for (const auto& g : j.at("frozen"))
            ck.params.set_frozen(parse_group(g.get<std::string>()), true);
        if (j.contains("features"))
            ck.features = j.at("features").get<std::vector<std::string>>();
        if (j.contains("scaling")) {
            ScalingStats s;
            s.fmin = j.at("scaling").at("fmin").get<std::vector<double>>();
            s.fmax = j.at("scaling").at("fmax").get<std::vector<double>>();
            s.seen = j.at("scaling").at("seen").get<std::vector<std::uint8_t>>();
            ck.scaling = std::move(s);
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path.string() + ": bad checkpoint: " + std::string(e.what()));
    }
}

}  // namespace icurisk
