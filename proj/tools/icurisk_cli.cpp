// Command-line front door: ingest, synth, experiment, adapt, curves, project,
// attribute, gradcheck. Every artifact directory is self-describing: it holds
// a config.json with the resolved run configuration, seed, and code version.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <icurisk/icurisk.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icurisk;

namespace {

void write_run_config(const fs::path& dir, const std::string& command, json options) {
    json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["options"] = std::move(options);
    fs::create_directories(dir);
    std::ofstream out(dir / "config.json");
    if (!out) throw data_error("cannot write " + (dir / "config.json").string());
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint_or_usage(const std::string& path) {
    if (!fs::exists(path))
        throw usage_error("checkpoint not found: " + path +
                          " (train one with `experiment` or `adapt` first)");
    return load_checkpoint(path);
}

// Preprocesses a raw cohort with the scaling statistics stored in a
// checkpoint, validating that the channel lists line up.
std::vector<EpisodeTensor> preprocess_with_checkpoint(const Cohort& cohort,
                                                      const Checkpoint& ck) {
    if (!ck.scaling)
        throw usage_error("checkpoint lacks scaling statistics; re-train with this version");
    if (!ck.features.empty() && ck.features != cohort.features)
        throw usage_error("checkpoint feature list does not match the cohort's channels");
    if (ck.scaling->fmin.size() != cohort.n_features())
        throw usage_error("checkpoint scaling width does not match the cohort's channels");
    std::vector<EpisodeTensor> out;
    out.reserve(cohort.episodes.size());
    for (const auto& ep : cohort.episodes) out.push_back(fill_and_impute(ep, *ck.scaling));
    return out;
}

std::vector<std::string> domains_present(const std::vector<EpisodeTensor>& episodes) {
    std::set<std::string> seen;
    for (const auto& ep : episodes) seen.insert(ep.domain);
    return {seen.begin(), seen.end()};
}

struct ModelFlags {
    ModelConfig cfg;
    TrainConfig train;

    void attach(CLI::App* cmd) {
        cmd->add_option("--conv-filters", cfg.conv_filters, "convolution filter count");
        cmd->add_option("--kernel", cfg.kernel_size, "convolution kernel length");
        cmd->add_option("--pool", cfg.pool_window, "max-pooling window");
        cmd->add_option("--lstm-hidden", cfg.lstm_hidden, "recurrent state width");
        cmd->add_option("--dense-hidden", cfg.dense_hidden, "dense hidden width");
        cmd->add_option("--dropout", cfg.dropout, "dropout rate");
        cmd->add_option("--lr", cfg.learning_rate, "learning rate");
        cmd->add_option("--batch-size", train.batch_size, "mini-batch size");
        cmd->add_option("--epochs", train.max_epochs, "epoch cap");
        cmd->add_option("--patience", train.patience, "early-stopping patience");
    }

    json to_json() const {
        json cfg_json;
        icurisk::to_json(cfg_json, cfg);
        cfg_json["batch_size"] = train.batch_size;
        cfg_json["max_epochs"] = train.max_epochs;
        cfg_json["patience"] = train.patience;
        return cfg_json;
    }
};

int cmd_ingest(const std::string& data_dir, const std::string& out_file) {
    const auto records = parse_physionet(data_dir);
    const Cohort cohort = to_cohort(records);
    write_cohort(cohort, out_file);
    json options{{"data", data_dir}, {"out", out_file}};
    write_run_config(fs::path(out_file).has_parent_path() ? fs::path(out_file).parent_path()
                                                          : fs::path("."),
                     "ingest", options);
    std::cout << "cohort: " << cohort.episodes.size() << " patients, "
              << cohort.n_features() << " channels -> " << out_file << "\n";
    for (const auto& [domain, n, rate] : domain_summary(cohort.episodes))
        std::cout << "  " << domain << ": " << n << " patients, mortality "
                  << format_double(100.0 * rate, 3) << "%\n";
    return 0;
}

int cmd_synth(const std::string& spec_file, const std::string& preset, std::uint64_t seed,
              const std::string& out_dir) {
    SynthSpec spec;
    if (!spec_file.empty())
        spec = load_synth_spec(spec_file);
    else if (preset == "default")
        spec = default_synth_spec();
    else if (preset == "adaptation")
        spec = adaptation_synth_spec();
    else
        throw config_error("unknown preset: " + preset + " (use default or adaptation)");
    spec.validate();

    const GeneratedCohort gen = generate_cohort(spec, seed);
    write_physionet_dir(gen.records, out_dir);
    write_true_risk_csv(gen, fs::path(out_dir) / "true_risk.csv");
    save_synth_spec(spec, fs::path(out_dir) / "generator_spec.json");
    write_run_config(out_dir, "synth",
                     json{{"spec", spec_file}, {"preset", preset}, {"seed", seed},
                          {"out", out_dir}});
    std::cout << "generated " << gen.records.size() << " records in " << out_dir << "\n";
    std::map<std::string, std::pair<std::size_t, std::size_t>> acc;
    for (const auto& r : gen.records) {
        acc[r.icu_domain].first += 1;
        acc[r.icu_domain].second += static_cast<std::size_t>(r.outcome == 1);
    }
    for (const auto& [domain, nd] : acc)
        std::cout << "  " << domain << ": " << nd.first << " patients, " << nd.second
                  << " deaths\n";
    return 0;
}

int cmd_experiment(const std::string& cohort_file, const std::string& target,
                   std::vector<std::string> strategies, int folds, std::uint64_t seed,
                   std::size_t horizon, std::size_t jobs, const ModelFlags& flags,
                   const std::string& out_dir) {
    const Cohort cohort = read_cohort(cohort_file);
    ExperimentConfig cfg;
    cfg.target_domain = target;
    cfg.strategies = std::move(strategies);
    cfg.n_folds = folds;
    cfg.seed = seed;
    cfg.horizon = horizon;
    cfg.jobs = jobs;
    cfg.model = flags.cfg;
    cfg.train = flags.train;

    const ExperimentResult result = run_experiment(cohort, cfg);

    fs::create_directories(out_dir);
    write_results_csv(result.rows, fs::path(out_dir) / "results.csv");
    const auto summary = summarize_strategies(result.rows, target);
    write_summary_csv(summary, target, fs::path(out_dir) / "summary.csv");
    std::vector<std::string> models{"TT", "pooled"};
    models.insert(models.end(), cfg.strategies.begin(), cfg.strategies.end());
    const std::string table = render_result_table(result.rows, {target}, models);
    std::ofstream(fs::path(out_dir) / "table.csv") << table;
    if (!result.warnings.empty()) {
        std::ofstream warn(fs::path(out_dir) / "warnings.txt");
        for (const auto& w : result.warnings) warn << w << "\n";
    }
    json options{{"cohort", cohort_file},   {"target", target},
                 {"strategies", cfg.strategies}, {"folds", folds},
                 {"seed", seed},            {"horizon", horizon},
                 {"jobs", jobs},            {"model", flags.to_json()}};
    write_run_config(out_dir, "experiment", options);

    std::cout << table;
    for (const auto& s : summary)
        std::cout << s.model << ": mean AUC " << format_double(s.mean_auc, 4)
                  << (s.model != "TT"
                          ? ", gain vs TT " + format_double(s.gain_vs_tt_pct, 3) + "%" +
                                ", p " + format_double(s.p_vs_tt, 3) +
                                (s.significant ? " (significant)" : "")
                          : "")
                  << "\n";
    return 0;
}

int cmd_adapt(const std::string& cohort_file, const std::string& target,
              const std::string& strategy, int folds, std::uint64_t seed, std::size_t horizon,
              const ModelFlags& flags, const std::string& out_dir) {
    const Cohort cohort = read_cohort(cohort_file);
    ExperimentConfig cfg;
    cfg.target_domain = target;
    cfg.strategies = {transfer_plan(strategy).name};
    cfg.n_folds = folds;
    cfg.seed = seed;
    cfg.horizon = horizon;
    cfg.model = flags.cfg;
    cfg.train = flags.train;
    if (cfg.model.n_features == 0) cfg.model.n_features = cohort.n_features();

    const FoldResult fold_result = make_folds(cohort.episodes, derive_seed(seed, 1), folds);
    fs::create_directories(out_dir);
    std::ofstream rows_out(fs::path(out_dir) / "results.jsonl");

    std::map<std::string, const RawEpisode*> by_id;
    for (const auto& ep : cohort.episodes) by_id.emplace(ep.id, &ep);

    for (const auto& fold : fold_result.folds) {
        std::map<std::string, ParamStore> models;
        const auto rows = run_fold(cohort, fold, cfg, &models);
        for (const auto& r : rows) {
            json row{{"target", r.target_domain}, {"strategy", r.model}, {"fold", r.fold},
                     {"auc", r.auc}};
            rows_out << row.dump() << "\n";
        }
        std::vector<const RawEpisode*> train_raw;
        for (const auto& id : fold.train_ids) train_raw.push_back(by_id.at(id));
        const ScalingStats stats = ScalingStats::compute(train_raw);
        save_checkpoint(fs::path(out_dir) /
                            ("checkpoint_fold" + std::to_string(fold.fold_id) + ".json"),
                        cfg.model, models.at(strategy), cohort.features, &stats);
        std::cout << "fold " << fold.fold_id << ": strategy " << strategy << " AUC "
                  << format_double(rows.back().auc, 4) << "\n";
    }
    write_run_config(out_dir, "adapt",
                     json{{"cohort", cohort_file}, {"target", target}, {"strategy", strategy},
                          {"folds", folds}, {"seed", seed}, {"horizon", horizon},
                          {"model", flags.to_json()}});
    return 0;
}

int cmd_curves(const std::string& cohort_file, const std::string& checkpoint_file,
               std::vector<std::size_t> grid, const std::string& domain_filter,
               std::uint64_t seed, const std::string& out_dir) {
    const Checkpoint ck = load_checkpoint_or_usage(checkpoint_file);
    const Cohort cohort = read_cohort(cohort_file);
    const auto episodes = preprocess_with_checkpoint(cohort, ck);

    fs::create_directories(out_dir);
    std::ofstream combined(fs::path(out_dir) / "curves.csv");
    combined << "domain,hours,auc\n";
    std::map<std::string, std::vector<HorizonAuc>> per_domain;
    for (const auto& domain : domains_present(episodes)) {
        if (!domain_filter.empty() && domain != domain_filter) continue;
        std::vector<EpisodeTensor> subset;
        for (const auto& ep : episodes)
            if (ep.domain == domain) subset.push_back(ep);
        const auto curve = auc_vs_hours(ck.config, ck.params, subset, grid);
        write_horizon_csv(curve, fs::path(out_dir) / ("curve_" + domain + ".csv"));
        for (const auto& point : curve)
            combined << domain << "," << point.hours << "," << format_double(point.auc) << "\n";
        per_domain.emplace(domain, curve);
        std::cout << domain << ": AUC(" << grid.front() << "h) "
                  << format_double(curve.front().auc, 4) << " -> AUC(" << grid.back() << "h) "
                  << format_double(curve.back().auc, 4) << "\n";
    }
    if (per_domain.empty()) throw usage_error("no episodes matched the domain filter");
    write_run_config(out_dir, "curves",
                     json{{"cohort", cohort_file}, {"checkpoint", checkpoint_file},
                          {"hours", grid}, {"domain", domain_filter}, {"seed", seed}});
    return 0;
}

int cmd_project(const std::string& cohort_file, const std::string& checkpoint_file,
                const std::string& domain_filter, bool raw, double perplexity,
                std::size_t iterations, std::size_t max_points, std::uint64_t seed,
                const std::string& out_dir) {
    const Checkpoint ck = load_checkpoint_or_usage(checkpoint_file);
    const Cohort cohort = read_cohort(cohort_file);
    const auto episodes = preprocess_with_checkpoint(cohort, ck);

    TsneConfig tsne_cfg;
    tsne_cfg.perplexity = perplexity;
    tsne_cfg.iterations = iterations;
    tsne_cfg.max_points = max_points;
    tsne_cfg.seed = seed;

    fs::create_directories(out_dir);
    bool wrote_any = false;
    for (const auto& domain : domains_present(episodes)) {
        if (!domain_filter.empty() && domain != domain_filter) continue;
        std::vector<EpisodeTensor> subset;
        for (const auto& ep : episodes)
            if (ep.domain == domain) subset.push_back(ep);
        const ProjectedSpace space =
            project_risk_space(subset, ck.config, ck.params, tsne_cfg, raw);
        write_trajectories_csv(space, fs::path(out_dir) / ("trajectories_" + domain + ".csv"));
        try {
            const SpaceDynamics dyn = risk_space_dynamics(space);
            write_dynamics_csv(dyn, fs::path(out_dir) / ("dynamics_" + domain + ".csv"));
        } catch (const usage_error& e) {
            std::cerr << "note: skipping dynamics for " << domain << ": " << e.what() << "\n";
        }
        std::cout << domain << ": projected " << space.kept_patients.size()
                  << " patients, final KL " << format_double(space.kl_trace.back(), 6) << "\n";
        wrote_any = true;
    }
    if (!wrote_any) throw usage_error("no episodes matched the domain filter");
    write_run_config(out_dir, "project",
                     json{{"cohort", cohort_file}, {"checkpoint", checkpoint_file},
                          {"domain", domain_filter}, {"raw", raw}, {"perplexity", perplexity},
                          {"iterations", iterations}, {"max_points", max_points},
                          {"seed", seed}});
    return 0;
}

int cmd_attribute(const std::string& cohort_file, const std::string& checkpoint_file,
                  const std::vector<std::string>& patients, std::size_t permutations, bool exact,
                  std::uint64_t seed, const std::string& out_dir) {
    const Checkpoint ck = load_checkpoint_or_usage(checkpoint_file);
    const Cohort cohort = read_cohort(cohort_file);
    const auto episodes = preprocess_with_checkpoint(cohort, ck);

    fs::create_directories(out_dir);
    for (const auto& id : patients) {
        const EpisodeTensor* episode = nullptr;
        for (const auto& ep : episodes)
            if (ep.id == id) episode = &ep;
        if (!episode) throw usage_error("patient " + id + " not found in the cohort");
        const AttributionMatrix attr =
            exact ? shapley_exact(ck.config, ck.params, episode->values, id)
                  : shapley_mc(ck.config, ck.params, episode->values, permutations, seed, id);
        write_attribution_csv(attr, cohort.features, episode->values,
                              fs::path(out_dir) / ("attribution_" + id + ".csv"));
        const auto ranking = rank_channels(attr, cohort.features);
        std::cout << id << ": top channels";
        for (std::size_t i = 0; i < std::min<std::size_t>(3, ranking.size()); ++i)
            std::cout << (i ? ", " : " ") << ranking[i].name;
        std::cout << "\n";
    }
    write_run_config(out_dir, "attribute",
                     json{{"cohort", cohort_file}, {"checkpoint", checkpoint_file},
                          {"patients", patients}, {"permutations", permutations},
                          {"exact", exact}, {"seed", seed}});
    return 0;
}

int cmd_gradcheck(std::size_t features, std::size_t hours, double tolerance,
                  std::uint64_t seed) {
    ModelConfig cfg;
    cfg.n_features = features;
    cfg.conv_filters = 4;
    cfg.kernel_size = 3;
    cfg.pool_window = 2;
    cfg.lstm_hidden = 5;
    cfg.dense_hidden = 4;
    cfg.dropout = 0.0;  // finite differences need a deterministic loss
    ParamStore params = build_model(cfg, seed);

    Rng rng(derive_seed(seed, 5));
    Tensor values({hours, features});
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = rng.uniform();
    const int label = 1;

    const auto report = gradient_check(
        [&](const ParamStore& p) {
            ModelCache cache;
            DynamicPrediction pred = model_forward(cfg, p, values, false, nullptr, &cache);
            BceResult bce = bce_loss(pred.risks, label);
            return std::pair<double, GradMap>(bce.loss,
                                              model_backward(cfg, p, cache, bce.grad));
        },
        params, tolerance);

    std::cout << "checked " << report.checked << " coordinates, max relative error "
              << format_double(report.max_rel_err, 6) << " at " << report.worst.name << "["
              << report.worst.index << "]\n";
    if (!report.pass) {
        std::cerr << "gradient check FAILED (tolerance " << format_double(tolerance, 6) << ")\n";
        return 4;
    }
    std::cout << "gradient check passed (tolerance " << format_double(tolerance, 6) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convolutional-recurrent ICU mortality models with domain adaptation"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse a raw data directory into a cohort file");
    std::string in_data, in_out;
    ingest->add_option("--data", in_data, "directory of per-record files + Outcomes CSV")
        ->required()
        ->check(CLI::ExistingDirectory);
    ingest->add_option("--out", in_out, "cohort file to write")->required();
    ingest->set_config("--config");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic cohort directory");
    std::string sy_spec, sy_preset = "default", sy_out;
    std::uint64_t sy_seed = 0;
    synth->add_option("--spec", sy_spec, "generator spec JSON")->check(CLI::ExistingFile);
    synth->add_option("--preset", sy_preset, "built-in spec: default|adaptation");
    synth->add_option("--seed", sy_seed, "generator seed");
    synth->add_option("--out", sy_out, "output directory")->required();
    synth->set_config("--config");

    // experiment
    auto* exp = app.add_subcommand("experiment", "cross-validated domain-adaptation experiment");
    std::string ex_cohort, ex_target, ex_out;
    std::vector<std::string> ex_strategies{"A1", "A2", "A3", "A4", "A5"};
    int ex_folds = 5;
    std::uint64_t ex_seed = 0;
    std::size_t ex_horizon = 48, ex_jobs = 1;
    ModelFlags ex_flags;
    exp->add_option("--cohort", ex_cohort, "cohort file")->required()->check(CLI::ExistingFile);
    exp->add_option("--target", ex_target, "target ICU domain")->required();
    exp->add_option("--strategies", ex_strategies, "strategies to run")->delimiter(',');
    exp->add_option("--folds", ex_folds, "cross-validation folds");
    exp->add_option("--seed", ex_seed, "experiment seed");
    exp->add_option("--horizon", ex_horizon, "evaluation horizon in hours");
    exp->add_option("--jobs", ex_jobs, "parallel fold workers");
    exp->add_option("--out", ex_out, "output directory")->required();
    ex_flags.attach(exp);
    exp->set_config("--config");

    // adapt
    auto* adapt = app.add_subcommand("adapt", "fine-tune one strategy and export checkpoints");
    std::string ad_cohort, ad_target, ad_strategy, ad_out;
    int ad_folds = 5;
    std::uint64_t ad_seed = 0;
    std::size_t ad_horizon = 48;
    ModelFlags ad_flags;
    adapt->add_option("--cohort", ad_cohort, "cohort file")->required()->check(CLI::ExistingFile);
    adapt->add_option("--target", ad_target, "target ICU domain")->required();
    adapt->add_option("--strategy", ad_strategy, "transfer strategy A1..A5")->required();
    adapt->add_option("--folds", ad_folds, "cross-validation folds");
    adapt->add_option("--seed", ad_seed, "experiment seed");
    adapt->add_option("--horizon", ad_horizon, "evaluation horizon in hours");
    adapt->add_option("--out", ad_out, "output directory")->required();
    ad_flags.attach(adapt);
    adapt->set_config("--config");

    // curves
    auto* curves = app.add_subcommand("curves", "AUC versus first-y-hours curves");
    std::string cu_cohort, cu_checkpoint, cu_domain, cu_out;
    std::vector<std::size_t> cu_grid{5, 10, 15, 20, 25, 30, 35, 40, 45, 48};
    std::uint64_t cu_seed = 0;
    curves->add_option("--cohort", cu_cohort, "cohort file")->required()->check(CLI::ExistingFile);
    curves->add_option("--checkpoint", cu_checkpoint, "model checkpoint")->required();
    curves->add_option("--hours", cu_grid, "horizon grid")->delimiter(',');
    curves->add_option("--domain", cu_domain, "restrict to one domain");
    curves->add_option("--seed", cu_seed, "stamped into the run config");
    curves->add_option("--out", cu_out, "output directory")->required();
    curves->set_config("--config");

    // project
    auto* project = app.add_subcommand("project", "risk-space trajectories and dynamics");
    std::string pr_cohort, pr_checkpoint, pr_domain, pr_out;
    bool pr_raw = false;
    double pr_perplexity = 30.0;
    std::size_t pr_iterations = 1000, pr_max_points = 5000;
    std::uint64_t pr_seed = 0;
    project->add_option("--cohort", pr_cohort, "cohort file")
        ->required()
        ->check(CLI::ExistingFile);
    project->add_option("--checkpoint", pr_checkpoint, "model checkpoint")->required();
    project->add_option("--domain", pr_domain, "restrict to one domain");
    project->add_flag("--raw", pr_raw, "project raw inputs instead of representations");
    project->add_option("--perplexity", pr_perplexity, "t-SNE perplexity");
    project->add_option("--iterations", pr_iterations, "t-SNE iterations");
    project->add_option("--max-points", pr_max_points, "point cap before patient subsampling");
    project->add_option("--seed", pr_seed, "subsampling seed");
    project->add_option("--out", pr_out, "output directory")->required();
    project->set_config("--config");

    // attribute
    auto* attribute = app.add_subcommand("attribute", "per-channel risk attributions");
    std::string at_cohort, at_checkpoint, at_out;
    std::vector<std::string> at_patients;
    std::size_t at_permutations = 500;
    bool at_exact = false;
    std::uint64_t at_seed = 0;
    attribute->add_option("--cohort", at_cohort, "cohort file")
        ->required()
        ->check(CLI::ExistingFile);
    attribute->add_option("--checkpoint", at_checkpoint, "model checkpoint")->required();
    attribute->add_option("--patient", at_patients, "patient id (repeatable)")->required();
    attribute->add_option("--permutations", at_permutations, "Monte-Carlo permutations");
    attribute->add_flag("--exact", at_exact, "exact enumeration (needs few channels)");
    attribute->add_option("--seed", at_seed, "sampling seed");
    attribute->add_option("--out", at_out, "output directory")->required();
    attribute->set_config("--config");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::size_t gc_features = 3, gc_hours = 8;
    double gc_tolerance = 1e-4;
    std::uint64_t gc_seed = 7;
    gradcheck->add_option("--features", gc_features, "input channels");
    gradcheck->add_option("--hours", gc_hours, "sequence length");
    gradcheck->add_option("--tolerance", gc_tolerance, "max relative error allowed");
    gradcheck->add_option("--seed", gc_seed, "parameter/input seed");
    gradcheck->set_config("--config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(in_data, in_out);
        if (*synth) return cmd_synth(sy_spec, sy_preset, sy_seed, sy_out);
        if (*exp)
            return cmd_experiment(ex_cohort, ex_target, ex_strategies, ex_folds, ex_seed,
                                  ex_horizon, ex_jobs, ex_flags, ex_out);
        if (*adapt)
            return cmd_adapt(ad_cohort, ad_target, ad_strategy, ad_folds, ad_seed, ad_horizon,
                             ad_flags, ad_out);
        if (*curves) return cmd_curves(cu_cohort, cu_checkpoint, cu_grid, cu_domain, cu_seed, cu_out);
        if (*project)
            return cmd_project(pr_cohort, pr_checkpoint, pr_domain, pr_raw, pr_perplexity,
                               pr_iterations, pr_max_points, pr_seed, pr_out);
        if (*attribute)
            return cmd_attribute(at_cohort, at_checkpoint, at_patients, at_permutations,
                                 at_exact, at_seed, at_out);
        if (*gradcheck) return cmd_gradcheck(gc_features, gc_hours, gc_tolerance, gc_seed);
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const config_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const leakage_error& e) {
        std::cerr << "leakage assertion: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
