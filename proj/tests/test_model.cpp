#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include <icurisk/model.hpp>
#include <icurisk/optim.hpp>
#include <icurisk/train.hpp>

#include "support.hpp"

using namespace icurisk;

TEST_CASE("model configuration validates its fields") {
    ModelConfig cfg = testsupport::tiny_model_config(5);
    REQUIRE_NOTHROW(cfg.validate());
    ModelConfig bad = cfg;
    bad.n_features = 0;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad = cfg;
    bad.dropout = 1.0;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    bad = cfg;
    bad.kernel_size = 0;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("freshly built models have the documented shapes and zero biases") {
    ModelConfig cfg;
    cfg.n_features = 41;
    const ParamStore params = build_model(cfg, 123);
    REQUIRE(params.at("conv.kernel").shape() == std::vector<std::size_t>{5, 41, 64});
    REQUIRE(params.at("lstm.w_ih").shape() == std::vector<std::size_t>{64, 280});
    REQUIRE(params.at("lstm.w_hh").shape() == std::vector<std::size_t>{70, 280});
    REQUIRE(params.at("dense1.weight").shape() == std::vector<std::size_t>{70, 64});
    REQUIRE(params.at("dense2.weight").shape() == std::vector<std::size_t>{64, 1});
    for (const char* name : {"conv.bias", "lstm.bias", "dense1.bias", "dense2.bias"})
        for (double v : params.at(name).flat()) REQUIRE(v == 0.0);
    // Same seed reproduces the model bit for bit; another seed does not.
    const ParamStore again = build_model(cfg, 123);
    REQUIRE(params.at("conv.kernel") == again.at("conv.kernel"));
    const ParamStore other = build_model(cfg, 124);
    REQUIRE(!(params.at("conv.kernel") == other.at("conv.kernel")));
}

TEST_CASE("initial weights follow the fan-in scaling") {
    ModelConfig cfg;
    cfg.n_features = 41;
    const ParamStore params = build_model(cfg, 5);
    const Tensor& k = params.at("conv.kernel");  // fan_in = K*F = 205
    double sq = 0.0;
    for (double v : k.flat()) sq += v * v;
    const double std_observed = std::sqrt(sq / k.size());
    REQUIRE(std_observed == Catch::Approx(1.0 / std::sqrt(205.0)).epsilon(0.05));
}

TEST_CASE("forward pass emits one risk and one representation per hour") {
    const ModelConfig cfg = testsupport::tiny_model_config(4);
    const ParamStore params = build_model(cfg, 7);
    Rng rng(99);
    const Tensor values = testsupport::random_episode_values(rng, kHours, 4);
    const DynamicPrediction pred = model_forward(cfg, params, values);
    REQUIRE(pred.risks.shape() == std::vector<std::size_t>{kHours});
    REQUIRE(pred.representations.shape() == std::vector<std::size_t>{kHours, cfg.lstm_hidden});
    for (double r : pred.risks.flat()) {
        REQUIRE(r > 0.0);
        REQUIRE(r < 1.0);
    }
}

TEST_CASE("risk at hour t never depends on later measurements") {
    const ModelConfig cfg = testsupport::tiny_model_config(3);
    const ParamStore params = build_model(cfg, 21);
    Rng rng(22);
    const Tensor values = testsupport::random_episode_values(rng, kHours, 3);
    const DynamicPrediction base = model_forward(cfg, params, values);

    for (std::size_t cut : {5ul, 17ul, 40ul}) {
        Tensor poked = values;
        for (std::size_t h = cut; h < kHours; ++h)
            for (std::size_t f = 0; f < 3; ++f) poked(h, f) = rng.uniform() * 10.0;
        const DynamicPrediction after = model_forward(cfg, params, poked);
        for (std::size_t t = 0; t < cut; ++t) {
            REQUIRE(base.risks(t) == after.risks(t));
            for (std::size_t j = 0; j < cfg.lstm_hidden; ++j)
                REQUIRE(base.representations(t, j) == after.representations(t, j));
        }
    }
}

TEST_CASE("truncating the input reproduces the prefix of the risks") {
    // The same property expressed the other way: the first y rows alone give
    // exactly the first y risks, so one full pass serves every horizon.
    const ModelConfig cfg = testsupport::tiny_model_config(3);
    const ParamStore params = build_model(cfg, 31);
    Rng rng(32);
    const Tensor values = testsupport::random_episode_values(rng, kHours, 3);
    const DynamicPrediction full = model_forward(cfg, params, values);
    for (std::size_t y : {1ul, 8ul, 24ul}) {
        Tensor prefix({y, 3});
        for (std::size_t h = 0; h < y; ++h)
            for (std::size_t f = 0; f < 3; ++f) prefix(h, f) = values(h, f);
        const DynamicPrediction part = model_forward(cfg, params, prefix);
        REQUIRE(part.risks(y - 1) == full.risks(y - 1));
    }
}

TEST_CASE("predict_at_horizon indexes one-based hours") {
    const ModelConfig cfg = testsupport::tiny_model_config(3);
    const ParamStore params = build_model(cfg, 41);
    Rng rng(42);
    const Tensor values = testsupport::random_episode_values(rng, kHours, 3);
    const DynamicPrediction pred = model_forward(cfg, params, values);
    REQUIRE(predict_at_horizon(cfg, params, values, 1) == pred.risks(0));
    REQUIRE(predict_at_horizon(cfg, params, values, 48) == pred.risks(47));
    REQUIRE_THROWS_AS(predict_at_horizon(cfg, params, values, 0), usage_error);
    REQUIRE_THROWS_AS(predict_at_horizon(cfg, params, values, 49), usage_error);
}

TEST_CASE("whole-model gradient passes a finite-difference check") {
    ModelConfig cfg;
    cfg.n_features = 3;
    cfg.conv_filters = 4;
    cfg.kernel_size = 3;
    cfg.pool_window = 2;
    cfg.lstm_hidden = 4;
    cfg.dense_hidden = 3;
    cfg.dropout = 0.0;
    const ParamStore params = build_model(cfg, 55);
    Rng rng(56);
    const Tensor values = testsupport::random_episode_values(rng, 8, 3);

    for (int label : {0, 1}) {
        const auto report = gradient_check(
            [&](const ParamStore& p) { return episode_loss_and_grad(cfg, p, values, label); },
            params, 1e-4);
        INFO("label " << label << " worst " << report.worst.name << "[" << report.worst.index
                      << "] rel err " << report.max_rel_err);
        REQUIRE(report.pass);
    }
}

TEST_CASE("training mode with dropout demands an rng") {
    ModelConfig cfg = testsupport::tiny_model_config(3);
    cfg.dropout = 0.2;
    const ParamStore params = build_model(cfg, 61);
    Rng rng(62);
    const Tensor values = testsupport::random_episode_values(rng, 8, 3);
    REQUIRE_THROWS_AS(model_forward(cfg, params, values, true, nullptr), usage_error);
    Rng dropout_rng(63);
    REQUIRE_NOTHROW(model_forward(cfg, params, values, true, &dropout_rng));
}

TEST_CASE("checkpoints round-trip bit for bit") {
    const ModelConfig cfg = testsupport::tiny_model_config(5);
    ParamStore params = build_model(cfg, 71);
    params.set_frozen(ParamGroup::conv, true);

    ScalingStats stats;
    stats.fmin = {0.0, 1.0, 2.0, 3.0, 4.0};
    stats.fmax = {1.0, 2.0, 3.0, 4.0, 5.0};
    stats.seen = {1, 1, 0, 1, 1};
    const std::vector<std::string> features{"a", "b", "c", "d", "e"};

    testsupport::ScratchDir dir("checkpoint");
    const auto path = dir.path / "model.json";
    save_checkpoint(path, cfg, params, features, &stats);
    const Checkpoint ck = load_checkpoint(path);

    REQUIRE(ck.config.n_features == cfg.n_features);
    REQUIRE(ck.config.lstm_hidden == cfg.lstm_hidden);
    REQUIRE(ck.features == features);
    REQUIRE(ck.params.frozen(ParamGroup::conv));
    REQUIRE(!ck.params.frozen(ParamGroup::lstm));
    for (const auto& name : params.names()) REQUIRE(ck.params.at(name) == params.at(name));
    REQUIRE(ck.scaling.has_value());
    REQUIRE(ck.scaling->fmin == stats.fmin);
    REQUIRE(ck.scaling->fmax == stats.fmax);
    REQUIRE(ck.scaling->seen == stats.seen);

    REQUIRE_THROWS_AS(load_checkpoint(dir.path / "missing.json"), data_error);
}

TEST_CASE("training reduces validation loss on a separable toy problem") {
    const ModelConfig cfg = testsupport::tiny_model_config(2);
    const auto episodes = testsupport::toy_episode_set(81, 24, 2);
    std::vector<EpisodeTensor> train(episodes.begin(), episodes.begin() + 16);
    std::vector<EpisodeTensor> val(episodes.begin() + 16, episodes.end());

    TrainConfig tc;
    tc.batch_size = 8;
    tc.max_epochs = 30;
    tc.patience = 30;
    tc.seed = 82;

    ParamStore params = build_model(cfg, 83);
    const double before = mean_validation_loss(cfg, params, val);
    const TrainResult result = train_loop(cfg, params, train, val, tc);
    REQUIRE(result.best_val_loss < before);
    REQUIRE(result.trace.size() == static_cast<std::size_t>(result.epochs_run));
    REQUIRE(result.best_epoch >= 1);

    // The returned parameters are the best snapshot, not the last epoch.
    REQUIRE(mean_validation_loss(cfg, result.params, val) ==
            Catch::Approx(result.best_val_loss).epsilon(1e-12));
}

TEST_CASE("training is deterministic given the seed") {
    const ModelConfig cfg = testsupport::tiny_model_config(2);
    const auto episodes = testsupport::toy_episode_set(91, 12, 2);
    std::vector<EpisodeTensor> train(episodes.begin(), episodes.begin() + 8);
    std::vector<EpisodeTensor> val(episodes.begin() + 8, episodes.end());
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_epochs = 5;
    tc.patience = 5;
    tc.seed = 92;

    const TrainResult a = train_loop(cfg, build_model(cfg, 93), train, val, tc);
    const TrainResult b = train_loop(cfg, build_model(cfg, 93), train, val, tc);
    for (const auto& name : a.params.names()) REQUIRE(a.params.at(name) == b.params.at(name));
    REQUIRE(a.best_val_loss == b.best_val_loss);
}

TEST_CASE("early stopping waits out the configured patience") {
    EarlyStopper stop(3);
    REQUIRE(stop.observe(1.0));
    REQUIRE(!stop.observe(1.1));
    REQUIRE(!stop.should_stop());
    REQUIRE(!stop.observe(1.2));
    REQUIRE(!stop.observe(1.3));
    REQUIRE(stop.should_stop());  // three epochs without improvement
    EarlyStopper improves(2);
    REQUIRE(improves.observe(1.0));
    REQUIRE(!improves.observe(1.0));  // ties do not count as improvement
    REQUIRE(improves.observe(0.9));
    REQUIRE(!improves.should_stop());
}

TEST_CASE("empty training or validation sets are rejected") {
    const ModelConfig cfg = testsupport::tiny_model_config(2);
    const auto episodes = testsupport::toy_episode_set(95, 4, 2);
    TrainConfig tc;
    tc.seed = 96;
    REQUIRE_THROWS_AS(train_loop(cfg, build_model(cfg, 97), {}, episodes, tc), usage_error);
    REQUIRE_THROWS_AS(train_loop(cfg, build_model(cfg, 97), episodes, {}, tc), usage_error);
}
