#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <icurisk/eval.hpp>
#include <icurisk/model.hpp>

#include "support.hpp"

using namespace icurisk;

TEST_CASE("midranks average the positions of tied values") {
    const std::vector<double> v{3.0, 1.0, 3.0, 2.0, 3.0};
    const auto r = midranks(v);
    // sorted: 1(rank1), 2(rank2), 3,3,3 (ranks 3,4,5 -> 4 each)
    REQUIRE(r == std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0});
}

TEST_CASE("rank-sum auc equals the brute-force pair count on tie-heavy data") {
    Rng rng(301);
    for (int instance = 0; instance < 40; ++instance) {
        const std::size_t n = 10 + rng.below(120);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid of score values forces many exact ties.
            scores[i] = static_cast<double>(rng.below(8)) / 7.0;
            labels[i] = rng.bernoulli(0.4) ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos) labels[0] = 1;
        if (!has_neg) labels[n - 1] = 0;
        const double fast = auc(scores, labels);
        const double slow = testsupport::auc_bruteforce(scores, labels);
        REQUIRE(fast == Catch::Approx(slow).epsilon(1e-12));
    }
}

TEST_CASE("auc handles textbook cases and rejects single-class inputs") {
    REQUIRE(auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
    REQUIRE(auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
    REQUIRE(auc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == 0.5);
    REQUIRE_THROWS_AS(auc({0.5, 0.6}, {1, 1}), usage_error);
    REQUIRE_THROWS_AS(auc({0.5, 0.6}, {0, 0}), usage_error);
}

TEST_CASE("spearman is the pearson correlation of midranks") {
    // Perfectly monotone, non-linear relation.
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> y{1.0, 8.0, 27.0, 64.0, 125.0};
    REQUIRE(spearman(x, y) == Catch::Approx(1.0));
    std::vector<double> yr(y.rbegin(), y.rend());
    REQUIRE(spearman(x, yr) == Catch::Approx(-1.0));

    // Hand-computed with one tie: x = 1,2,3 ranks 1,2,3; y = 5,5,9 ranks 1.5,1.5,3.
    const double r = spearman({1.0, 2.0, 3.0}, {5.0, 5.0, 9.0});
    // Pearson of (1,2,3) vs (1.5,1.5,3): cov = (—1)(—0.5)+0+1(1) = 1.5/3,
    // sd_x = sqrt(2/3), sd_y = sqrt(1.5/3)
    const double expected = 0.5 / (std::sqrt(2.0 / 3.0) * std::sqrt(0.5));
    REQUIRE(r == Catch::Approx(expected).epsilon(1e-12));
    REQUIRE_THROWS_AS(spearman({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), usage_error);
}

TEST_CASE("the t distribution tail matches numerical integration of its density") {
    for (double df : {1.0, 2.0, 5.0, 17.0, 99.0}) {
        for (double t : {0.0, 0.31, 1.0, 2.5, 6.0}) {
            const double lib = t_two_sided_p(t, df);
            const double oracle = testsupport::t_two_sided_p_oracle(t, df);
            INFO("df " << df << " t " << t);
            REQUIRE(lib == Catch::Approx(oracle).margin(1e-9));
        }
    }
}

TEST_CASE("paired t-test matches hand-computed statistics") {
    // Differences: 2, 4, 6 -> mean 4, sd 2, se = 2/sqrt(3), t = 4*sqrt(3)/2.
    const TtestResult r = paired_ttest({12.0, 14.0, 16.0}, {10.0, 10.0, 10.0});
    REQUIRE(r.mean_diff == Catch::Approx(4.0));
    REQUIRE(r.df == 2.0);
    REQUIRE(r.t == Catch::Approx(4.0 / (2.0 / std::sqrt(3.0))));
    REQUIRE(r.p == Catch::Approx(testsupport::t_two_sided_p_oracle(r.t, 2.0)).margin(1e-9));

    // Symmetric inputs swap the sign but not the p-value.
    const TtestResult s = paired_ttest({10.0, 10.0, 10.0}, {12.0, 14.0, 16.0});
    REQUIRE(s.t == Catch::Approx(-r.t));
    REQUIRE(s.p == Catch::Approx(r.p));
}

TEST_CASE("degenerate paired t-tests resolve deterministically") {
    // Zero variance, nonzero mean difference: infinitely strong evidence.
    const TtestResult sure = paired_ttest({2.0, 2.0, 2.0}, {1.0, 1.0, 1.0});
    REQUIRE(sure.p == 0.0);
    // Identical samples: no evidence at all.
    const TtestResult none = paired_ttest({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0});
    REQUIRE(none.p == 1.0);
    REQUIRE_THROWS_AS(paired_ttest({1.0}, {2.0}), usage_error);
    REQUIRE_THROWS_AS(paired_ttest({1.0, 2.0}, {2.0}), usage_error);
}

TEST_CASE("percent gain is relative to the baseline") {
    REQUIRE(percent_gain(0.88, 0.80) == Catch::Approx(10.0));
    REQUIRE(percent_gain(0.72, 0.80) == Catch::Approx(-10.0));
    REQUIRE_THROWS_AS(percent_gain(0.5, 0.0), usage_error);
}

TEST_CASE("the dynamic risk matrix stacks one forward pass per patient") {
    const ModelConfig cfg = testsupport::tiny_model_config(3);
    const ParamStore params = build_model(cfg, 310);
    const auto episodes = testsupport::toy_episode_set(311, 6, 3);
    const Tensor m = dynamic_risk_matrix(cfg, params, episodes);
    REQUIRE(m.shape() == std::vector<std::size_t>{6, kHours});
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const DynamicPrediction pred = model_forward(cfg, params, episodes[i].values);
        for (std::size_t t = 0; t < kHours; ++t) REQUIRE(m(i, t) == pred.risks(t));
    }
}

TEST_CASE("horizon auc agrees with scoring by per-patient prefix prediction") {
    const ModelConfig cfg = testsupport::tiny_model_config(3);
    const ParamStore params = build_model(cfg, 312);
    const auto episodes = testsupport::toy_episode_set(313, 20, 3);
    for (std::size_t y : {5ul, 24ul, 48ul}) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& ep : episodes) {
            scores.push_back(predict_at_horizon(cfg, params, ep.values, y));
            labels.push_back(ep.outcome);
        }
        REQUIRE(auc_at_horizon(cfg, params, episodes, y) == Catch::Approx(auc(scores, labels)));
    }
}

TEST_CASE("auc-versus-hours rows keep the requested grid order") {
    const ModelConfig cfg = testsupport::tiny_model_config(3);
    const ParamStore params = build_model(cfg, 314);
    const auto episodes = testsupport::toy_episode_set(315, 14, 3);
    const std::vector<std::size_t> grid{5, 10, 48};
    const auto rows = auc_vs_hours(cfg, params, episodes, grid);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        REQUIRE(rows[i].hours == grid[i]);
        REQUIRE(rows[i].auc == Catch::Approx(auc_at_horizon(cfg, params, episodes, grid[i])));
    }

    testsupport::ScratchDir dir("horizon");
    write_horizon_csv(rows, dir.path / "curve.csv");
    const std::string body = testsupport::read_file(dir.path / "curve.csv");
    REQUIRE(body.rfind("hours,auc\n", 0) == 0);
    REQUIRE(body.find("\n5,") != std::string::npos);
}

TEST_CASE("gain tables line up two curve sets by domain and horizon") {
    std::map<std::string, std::vector<HorizonAuc>> ours{
        {"Medical", {{5, 0.66}, {48, 0.88}}}};
    std::map<std::string, std::vector<HorizonAuc>> base{
        {"Medical", {{5, 0.60}, {48, 0.80}}}};
    const auto rows = gains_table(ours, base);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].domain == "Medical");
    REQUIRE(rows[0].hours == 5);
    REQUIRE(rows[0].gain_pct == Catch::Approx(10.0));
    REQUIRE(rows[1].gain_pct == Catch::Approx(10.0));

    std::map<std::string, std::vector<HorizonAuc>> mismatched{
        {"Medical", {{5, 0.6}}}};
    REQUIRE_THROWS_AS(gains_table(ours, mismatched), usage_error);
    std::map<std::string, std::vector<HorizonAuc>> missing{
        {"Surgical", {{5, 0.6}, {48, 0.8}}}};
    REQUIRE_THROWS_AS(gains_table(ours, missing), usage_error);
}

TEST_CASE("result csv export and fold extraction") {
    std::vector<ResultRow> rows;
    rows.push_back({"Cardiac", "A4", 2, 48, 0.91});
    rows.push_back({"Cardiac", "A4", 1, 48, 0.89});
    rows.push_back({"Cardiac", "TT", 1, 48, 0.80});
    rows.push_back({"Medical", "A4", 1, 48, 0.70});

    const auto aucs = fold_aucs(rows, "Cardiac", "A4");
    REQUIRE(aucs == std::vector<double>{0.89, 0.91});  // ordered by fold id
    REQUIRE(mean_of(aucs) == Catch::Approx(0.90));

    testsupport::ScratchDir dir("results");
    write_results_csv(rows, dir.path / "results.csv");
    const std::string body = testsupport::read_file(dir.path / "results.csv");
    REQUIRE(body.rfind("target_domain,model,fold,horizon,auc\n", 0) == 0);
    REQUIRE(body.find("Cardiac,A4,2,48,0.91") != std::string::npos);

    const std::string table =
        render_result_table(rows, {"Cardiac", "Medical"}, {"TT", "A4"});
    REQUIRE(table.find("macro_avg") != std::string::npos);
    REQUIRE(table.find("A4") != std::string::npos);
}
