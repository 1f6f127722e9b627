#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace icurisk {

// ---------------------------------------------------------------------------
// Mini-batch training with validation-loss early stopping. The best-validation
// parameter snapshot is what a run returns, not the last iterate.
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::size_t patience = 15;
    std::uint64_t seed = 0;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    ParamStore params;  // best-validation snapshot
    std::vector<EpochStats> trace;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::size_t epochs_run = 0;
};

class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    // Returns true when this epoch improved on the best validation loss.
    bool observe(double val_loss) {
        if (!has_best_ || val_loss < best_) {
            best_ = val_loss;
            has_best_ = true;
            since_best_ = 0;
            return true;
        }
        ++since_best_;
        return false;
    }

    bool should_stop() const { return since_best_ >= patience_; }
    double best() const { return best_; }

private:
    std::size_t patience_;
    std::size_t since_best_ = 0;
    double best_ = 0.0;
    bool has_best_ = false;
};

inline double mean_validation_loss(const ModelConfig& cfg, const ParamStore& params,
                                   const std::vector<EpisodeTensor>& val) {
    double total = 0.0;
    for (const auto& ep : val) total += episode_loss(cfg, params, ep.values, ep.outcome);
    return total / static_cast<double>(val.size());
}

inline TrainResult train_loop(const ModelConfig& cfg, ParamStore params,
                              const std::vector<EpisodeTensor>& train,
                              const std::vector<EpisodeTensor>& val, const TrainConfig& tc) {
    if (train.empty()) throw usage_error("train_loop: empty training set");
    if (val.empty()) throw usage_error("train_loop: empty validation set");
    cfg.validate();

    Rng run_rng(tc.seed);
    Rng shuffle_rng = run_rng.child(1);
    Rng dropout_rng = run_rng.child(2);

    AdamState adam(cfg.learning_rate);
    EarlyStopper stopper(tc.patience);
    TrainResult result;
    result.params = params;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            GradMap batch_grads = params.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const auto& ep = train[order[i]];
                auto [loss, grads] =
                    episode_loss_and_grad(cfg, params, ep.values, ep.outcome, true, &dropout_rng);
                batch_loss += loss;
                accumulate(batch_grads, grads);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            scale(batch_grads, inv);
            adam_step(params, batch_grads, adam);
            epoch_loss += batch_loss * inv;
            ++n_batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(n_batches);
        stats.val_loss = mean_validation_loss(cfg, params, val);
        result.trace.push_back(stats);
        result.epochs_run = epoch;

        if (stopper.observe(stats.val_loss)) {
            result.params = params;
            result.best_epoch = epoch;
            result.best_val_loss = stats.val_loss;
        }
        if (stopper.should_stop()) break;
    }
    return result;
}

inline void write_trace_csv(const std::vector<EpochStats>& trace,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write trace file: " + path.string());
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : trace)
        out << e.epoch << "," << format_double(e.train_loss) << ","
            << format_double(e.val_loss) << "\n";
}

}  // namespace icurisk
