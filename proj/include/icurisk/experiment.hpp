#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "data.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "train.hpp"
#include "transfer.hpp"

namespace icurisk {

// Stable seed derivation for independent phases of one experiment.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return Rng(base).child(salt).next_u64();
}

// Runs fn(0..n-1) on a bounded worker pool. Results must go into per-index
// slots; assembly in index order keeps outputs deterministic regardless of
// scheduling.
inline void parallel_for(std::size_t n, std::size_t jobs,
                         const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct ExperimentConfig {
    std::string target_domain;
    std::vector<std::string> strategies{"A1", "A2", "A3", "A4", "A5"};
    std::size_t horizon = 48;
    int n_folds = 5;
    std::uint64_t seed = 0;
    ModelConfig model;  // n_features is filled from the cohort when left 0
    TrainConfig train;
    std::size_t jobs = 1;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::string> warnings;
    FoldResult folds;
};

namespace detail {

inline std::vector<EpisodeTensor> preprocess_ids(
    const std::map<std::string, const RawEpisode*>& by_id, const std::vector<std::string>& ids,
    const ScalingStats& stats) {
    std::vector<EpisodeTensor> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw usage_error("unknown patient id in fold: " + id);
        out.push_back(fill_and_impute(*it->second, stats));
    }
    return out;
}

inline std::vector<EpisodeTensor> filter_domain(const std::vector<EpisodeTensor>& episodes,
                                                const std::string& domain, bool keep) {
    std::vector<EpisodeTensor> out;
    for (const auto& ep : episodes)
        if ((ep.domain == domain) == keep) out.push_back(ep);
    return out;
}

}  // namespace detail

// One fold of the adaptation experiment: scaling statistics from the fold's
// training patients only, pretraining on the non-target domains, then the
// target-only control, the untuned pooled model, and each requested strategy.
inline std::vector<ResultRow> run_fold(const Cohort& cohort, const FoldSpec& fold,
                                       const ExperimentConfig& cfg,
                                       std::map<std::string, ParamStore>* out_models = nullptr) {
    std::map<std::string, const RawEpisode*> by_id;
    for (const auto& ep : cohort.episodes) by_id.emplace(ep.id, &ep);

    std::vector<const RawEpisode*> train_raw;
    for (const auto& id : fold.train_ids) train_raw.push_back(by_id.at(id));
    const ScalingStats stats = ScalingStats::compute(train_raw);

    const auto train_all = detail::preprocess_ids(by_id, fold.train_ids, stats);
    const auto val_all = detail::preprocess_ids(by_id, fold.val_ids, stats);
    const auto test_all = detail::preprocess_ids(by_id, fold.test_ids, stats);

    const std::string& target = cfg.target_domain;
    const auto source_train = detail::filter_domain(train_all, target, false);
    const auto source_val = detail::filter_domain(val_all, target, false);
    const auto target_train = detail::filter_domain(train_all, target, true);
    const auto target_val = detail::filter_domain(val_all, target, true);
    const auto target_test = detail::filter_domain(test_all, target, true);
    if (target_train.empty() || target_val.empty() || target_test.empty())
        throw usage_error("fold " + std::to_string(fold.fold_id) + ": target domain " + target +
                          " missing from a split");

    const std::uint64_t fold_salt = static_cast<std::uint64_t>(fold.fold_id) * 1000;
    auto evaluate = [&](const ParamStore& params) {
        return auc_at_horizon(cfg.model, params, target_test, cfg.horizon);
    };
    auto record = [&](const std::string& model, const ParamStore& params) {
        if (out_models) out_models->emplace(model, params);
        return ResultRow{target, model, fold.fold_id, cfg.horizon, evaluate(params)};
    };

    std::vector<ResultRow> rows;

    TrainConfig tt_tc = cfg.train;
    tt_tc.seed = derive_seed(cfg.seed, fold_salt + 1);
    ParamStore tt_init = build_model(cfg.model, derive_seed(cfg.seed, fold_salt + 2));
    TrainResult tt = train_loop(cfg.model, std::move(tt_init), target_train, target_val, tt_tc);
    rows.push_back(record("TT", tt.params));

    TrainConfig src_tc = cfg.train;
    src_tc.seed = derive_seed(cfg.seed, fold_salt + 3);
    TrainResult source = pretrain_source(cfg.model, source_train, source_val, target, src_tc);
    rows.push_back(record("pooled", source.params));

    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        const TransferPlan& plan = transfer_plan(cfg.strategies[s]);
        ParamStore prepared =
            apply_plan(source.params, plan, derive_seed(cfg.seed, fold_salt + 10 + s));
        TrainConfig ft_tc = cfg.train;
        ft_tc.seed = derive_seed(cfg.seed, fold_salt + 30 + s);
        TrainResult tuned =
            fine_tune(cfg.model, std::move(prepared), target_train, target_val, ft_tc);
        rows.push_back(record(plan.name, tuned.params));
    }
    return rows;
}

inline ExperimentResult run_experiment(const Cohort& cohort, ExperimentConfig cfg) {
    if (cohort.episodes.empty()) throw usage_error("run_experiment: empty cohort");
    std::set<std::string> domains;
    for (const auto& ep : cohort.episodes) domains.insert(ep.domain);
    if (domains.size() < 2)
        throw usage_error("run_experiment: adaptation needs at least 2 domains");
    if (!domains.count(cfg.target_domain))
        throw usage_error("run_experiment: cohort has no domain " + cfg.target_domain);
    if (cfg.model.n_features == 0) cfg.model.n_features = cohort.n_features();
    cfg.model.validate();

    ExperimentResult result;
    result.folds = make_folds(cohort.episodes, derive_seed(cfg.seed, 1), cfg.n_folds);
    result.warnings = result.folds.warnings;

    std::vector<std::vector<ResultRow>> slots(result.folds.folds.size());
    parallel_for(result.folds.folds.size(), cfg.jobs, [&](std::size_t i) {
        slots[i] = run_fold(cohort, result.folds.folds[i], cfg);
    });
    for (auto& rows : slots)
        result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    return result;
}

// ---------------------------------------------------------------------------
// Per-strategy aggregation against the target-only control.
// ---------------------------------------------------------------------------

struct StrategySummary {
    std::string model;
    double mean_auc = 0.0;
    double gain_vs_tt_pct = 0.0;
    double p_vs_tt = 1.0;
    bool significant = false;
};

inline std::vector<StrategySummary> summarize_strategies(const std::vector<ResultRow>& rows,
                                                         const std::string& domain) {
    const auto tt = fold_aucs(rows, domain, "TT");
    if (tt.empty()) throw usage_error("summarize_strategies: no TT rows for " + domain);
    std::vector<std::string> models;
    for (const auto& r : rows)
        if (r.target_domain == domain &&
            std::find(models.begin(), models.end(), r.model) == models.end())
            models.push_back(r.model);
    std::vector<StrategySummary> out;
    const double tt_mean = mean_of(tt);
    for (const auto& m : models) {
        const auto v = fold_aucs(rows, domain, m);
        StrategySummary s;
        s.model = m;
        s.mean_auc = mean_of(v);
        s.gain_vs_tt_pct = percent_gain(s.mean_auc, tt_mean);
        if (m != "TT" && v.size() == tt.size() && v.size() >= 2) {
            s.p_vs_tt = paired_ttest(v, tt).p;
            s.significant = s.p_vs_tt <= 0.05;
        }
        out.push_back(s);
    }
    return out;
}

inline void write_summary_csv(const std::vector<StrategySummary>& summary,
                              const std::string& domain, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write summary file: " + path.string());
    out << "target_domain,model,mean_auc,gain_vs_tt_pct,p_vs_tt,significant\n";
    for (const auto& s : summary)
        out << domain << "," << s.model << "," << format_double(s.mean_auc) << ","
            << format_double(s.gain_vs_tt_pct) << "," << format_double(s.p_vs_tt) << ","
            << (s.significant ? 1 : 0) << "\n";
}

// ---------------------------------------------------------------------------
// Single-split adaptation run: the desk-scale protocol for measuring the
// adaptation benefit on a small target domain. One stratified split per seed
// instead of the full cross-validation.
// ---------------------------------------------------------------------------

struct AdaptationConfig {
    std::string target_domain;
    std::vector<std::string> strategies{"A1", "A2", "A3", "A4", "A5"};
    std::size_t horizon = 48;
    std::uint64_t seed = 0;
    ModelConfig model;
    TrainConfig train;
    double target_train_frac = 0.4;
    double target_val_frac = 0.2;  // remainder is the target test set
    double source_val_frac = 0.2;
};

struct AdaptationOutcome {
    double tt_auc = 0.0;
    double pooled_auc = 0.0;
    std::map<std::string, double> strategy_auc;
    std::string best_strategy;
    double best_auc = 0.0;
    std::vector<std::string> target_test_ids;
};

namespace detail {

// Outcome-stratified three-way id split of one domain's episodes.
inline void three_way_split(const std::vector<const RawEpisode*>& episodes, double f_train,
                            double f_val, Rng& rng, std::vector<std::string>& train,
                            std::vector<std::string>& val, std::vector<std::string>& test) {
    for (int outcome : {0, 1}) {
        std::vector<std::string> ids;
        for (const auto* ep : episodes)
            if (ep->outcome == outcome) ids.push_back(ep->id);
        std::sort(ids.begin(), ids.end());
        rng.shuffle(ids);
        const std::size_t n = ids.size();
        const std::size_t n_train =
            static_cast<std::size_t>(std::llround(f_train * static_cast<double>(n)));
        const std::size_t n_val = std::min(
            n - n_train,
            static_cast<std::size_t>(std::llround(f_val * static_cast<double>(n))));
        for (std::size_t i = 0; i < n; ++i) {
            if (i < n_train)
                train.push_back(ids[i]);
            else if (i < n_train + n_val)
                val.push_back(ids[i]);
            else
                test.push_back(ids[i]);
        }
    }
}

}  // namespace detail

inline AdaptationOutcome run_adaptation_split(const Cohort& cohort, AdaptationConfig cfg) {
    if (cfg.model.n_features == 0) cfg.model.n_features = cohort.n_features();
    cfg.model.validate();
    std::map<std::string, const RawEpisode*> by_id;
    std::vector<const RawEpisode*> target_eps, source_eps;
    for (const auto& ep : cohort.episodes) {
        by_id.emplace(ep.id, &ep);
        (ep.domain == cfg.target_domain ? target_eps : source_eps).push_back(&ep);
    }
    if (target_eps.empty())
        throw usage_error("run_adaptation_split: no patients in target domain " +
                          cfg.target_domain);
    if (source_eps.empty())
        throw usage_error("run_adaptation_split: no source-domain patients");

    Rng split_rng(derive_seed(cfg.seed, 77));
    std::vector<std::string> tgt_train, tgt_val, tgt_test;
    detail::three_way_split(target_eps, cfg.target_train_frac, cfg.target_val_frac, split_rng,
                            tgt_train, tgt_val, tgt_test);
    std::vector<std::string> src_train, src_val, src_unused;
    detail::three_way_split(source_eps, 1.0 - cfg.source_val_frac, cfg.source_val_frac,
                            split_rng, src_train, src_val, src_unused);
    for (auto* ids : {&tgt_train, &tgt_val, &tgt_test, &src_train, &src_val})
        std::sort(ids->begin(), ids->end());

    // Scaling statistics from training patients only (source + target train).
    std::vector<const RawEpisode*> stats_eps;
    for (const auto& id : src_train) stats_eps.push_back(by_id.at(id));
    for (const auto& id : tgt_train) stats_eps.push_back(by_id.at(id));
    const ScalingStats stats = ScalingStats::compute(stats_eps);

    const auto source_train = detail::preprocess_ids(by_id, src_train, stats);
    const auto source_val = detail::preprocess_ids(by_id, src_val, stats);
    const auto target_train = detail::preprocess_ids(by_id, tgt_train, stats);
    const auto target_val = detail::preprocess_ids(by_id, tgt_val, stats);
    const auto target_test = detail::preprocess_ids(by_id, tgt_test, stats);
    if (target_train.empty() || target_val.empty() || target_test.empty())
        throw usage_error("run_adaptation_split: target splits are empty; "
                          "domain too small for the requested fractions");

    auto evaluate = [&](const ParamStore& params) {
        return auc_at_horizon(cfg.model, params, target_test, cfg.horizon);
    };

    AdaptationOutcome out;
    out.target_test_ids = tgt_test;

    TrainConfig tt_tc = cfg.train;
    tt_tc.seed = derive_seed(cfg.seed, 101);
    ParamStore tt_init = build_model(cfg.model, derive_seed(cfg.seed, 102));
    out.tt_auc = evaluate(
        train_loop(cfg.model, std::move(tt_init), target_train, target_val, tt_tc).params);

    TrainConfig src_tc = cfg.train;
    src_tc.seed = derive_seed(cfg.seed, 103);
    TrainResult source =
        pretrain_source(cfg.model, source_train, source_val, cfg.target_domain, src_tc);
    out.pooled_auc = evaluate(source.params);

    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
        const TransferPlan& plan = transfer_plan(cfg.strategies[s]);
        ParamStore prepared = apply_plan(source.params, plan, derive_seed(cfg.seed, 110 + s));
        TrainConfig ft_tc = cfg.train;
        ft_tc.seed = derive_seed(cfg.seed, 130 + s);
        const double auc_value = evaluate(
            fine_tune(cfg.model, std::move(prepared), target_train, target_val, ft_tc).params);
        out.strategy_auc[plan.name] = auc_value;
        if (out.best_strategy.empty() || auc_value > out.best_auc) {
            out.best_strategy = plan.name;
            out.best_auc = auc_value;
        }
    }
    return out;
}

}  // namespace icurisk
