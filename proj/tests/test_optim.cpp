#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <icurisk/core.hpp>
#include <icurisk/optim.hpp>
#include <icurisk/params.hpp>

using namespace icurisk;

TEST_CASE("bce loss matches hand arithmetic for both labels") {
    Tensor p = Tensor::vec(2);
    p(0) = 0.8;
    p(1) = 0.6;
    const BceResult pos = bce_loss(p, 1);
    REQUIRE(pos.loss == Catch::Approx(-(std::log(0.8) + std::log(0.6)) / 2.0).epsilon(1e-12));
    const BceResult neg = bce_loss(p, 0);
    REQUIRE(neg.loss ==
            Catch::Approx(-(std::log(0.2) + std::log(0.4)) / 2.0).epsilon(1e-12));
}

TEST_CASE("bce gradient matches finite differences inside the clamp") {
    Tensor p = Tensor::vec(4);
    p(0) = 0.1;
    p(1) = 0.45;
    p(2) = 0.7;
    p(3) = 0.99;
    for (int label : {0, 1}) {
        const BceResult r = bce_loss(p, label);
        for (std::size_t t = 0; t < p.size(); ++t) {
            const double saved = p(t);
            const double h = 1e-7;
            p(t) = saved + h;
            const double up = bce_loss(p, label).loss;
            p(t) = saved - h;
            const double down = bce_loss(p, label).loss;
            p(t) = saved;
            REQUIRE(r.grad(t) == Catch::Approx((up - down) / (2.0 * h)).margin(1e-4));
        }
    }
}

TEST_CASE("bce clamps extreme predictions and zeroes their gradient") {
    Tensor p = Tensor::vec(2);
    p(0) = 0.0;   // below the clamp floor
    p(1) = 1.0;   // above the clamp ceiling
    const BceResult r = bce_loss(p, 1);
    REQUIRE(std::isfinite(r.loss));
    REQUIRE(r.loss == Catch::Approx(-(std::log(1e-7) + std::log(1.0 - 1e-7)) / 2.0));
    REQUIRE(r.grad(0) == 0.0);
    REQUIRE(r.grad(1) == 0.0);
}

TEST_CASE("adam follows the textbook update for three hand-computed steps") {
    // Single scalar parameter, constant gradient 1. With m,v starting at 0:
    //   step 1: m=0.1, v=0.001, mhat=1, vhat=1       -> delta = lr/(1+eps)
    //   step 2: m=0.19, v=0.001999, mhat=1, vhat=1   -> same delta
    // (bias correction makes mhat = vhat = 1 exactly for a constant gradient)
    ParamStore params;
    params.add("w", ParamGroup::dense, Tensor::vec(1, 5.0));
    AdamState state(0.001, 0.9, 0.999, 1e-8);
    GradMap g;
    g.emplace("w", Tensor::vec(1, 1.0));

    double x = 5.0, m = 0.0, v = 0.0;
    for (int step = 1; step <= 3; ++step) {
        adam_step(params, g, state);
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        const double mhat = m / (1.0 - std::pow(0.9, step));
        const double vhat = v / (1.0 - std::pow(0.999, step));
        x -= 0.001 * mhat / (std::sqrt(vhat) + 1e-8);
        REQUIRE(params.at("w")(0) == Catch::Approx(x).epsilon(1e-15));
        REQUIRE(state.m("w")(0) == Catch::Approx(m).epsilon(1e-15));
        REQUIRE(state.v("w")(0) == Catch::Approx(v).epsilon(1e-15));
    }
}

TEST_CASE("adam converges on a quadratic bowl") {
    ParamStore params;
    params.add("w", ParamGroup::dense, Tensor::vec(1, 3.0));
    AdamState state(0.05);
    for (int i = 0; i < 2000; ++i) {
        GradMap g;
        g.emplace("w", Tensor::vec(1, 2.0 * params.at("w")(0)));  // d/dw w^2
        adam_step(params, g, state);
    }
    REQUIRE(std::fabs(params.at("w")(0)) < 1e-3);
}

TEST_CASE("frozen groups receive neither updates nor moment accumulation") {
    ParamStore params;
    params.add("conv.w", ParamGroup::conv, Tensor::vec(2, 1.0));
    params.add("dense.w", ParamGroup::dense, Tensor::vec(2, 1.0));
    params.set_frozen(ParamGroup::conv, true);

    AdamState state(0.01);
    state.ensure_slots(params);
    const Tensor conv_before = params.at("conv.w");
    const Tensor m_before = state.m("conv.w");
    const Tensor v_before = state.v("conv.w");

    GradMap g;
    g.emplace("conv.w", Tensor::vec(2, 7.0));
    g.emplace("dense.w", Tensor::vec(2, 7.0));
    for (int i = 0; i < 50; ++i) adam_step(params, g, state);

    // Bit-identical parameters and untouched moments for the frozen group.
    REQUIRE(params.at("conv.w") == conv_before);
    REQUIRE(state.m("conv.w") == m_before);
    REQUIRE(state.v("conv.w") == v_before);
    REQUIRE(params.at("dense.w")(0) != 1.0);
}

TEST_CASE("unfreezing resumes updates from clean moments") {
    ParamStore params;
    params.add("lstm.w", ParamGroup::lstm, Tensor::vec(1, 2.0));
    params.set_frozen(ParamGroup::lstm, true);
    AdamState state(0.1);
    GradMap g;
    g.emplace("lstm.w", Tensor::vec(1, 1.0));
    adam_step(params, g, state);
    REQUIRE(params.at("lstm.w")(0) == 2.0);
    params.set_frozen(ParamGroup::lstm, false);
    adam_step(params, g, state);
    REQUIRE(params.at("lstm.w")(0) < 2.0);
}

TEST_CASE("relative error helper guards small denominators") {
    REQUIRE(gradcheck_rel_err(1.0, 1.0) == 0.0);
    REQUIRE(gradcheck_rel_err(0.0, 0.0) == 0.0);
    REQUIRE(gradcheck_rel_err(2.0, 1.0) == Catch::Approx(1.0 / 3.0));
    // Tiny values fall back to the absolute scale.
    REQUIRE(gradcheck_rel_err(1e-9, 0.0) == Catch::Approx(1e-3));
}

TEST_CASE("gradient_check accepts a correct gradient and rejects a wrong one") {
    ParamStore params;
    params.add("w", ParamGroup::dense, Tensor::vec(3, 0.5));

    // loss = sum w_i^2, gradient 2w.
    auto good = [](const ParamStore& p) {
        double loss = 0.0;
        GradMap g;
        Tensor grad = Tensor::vec(3);
        for (std::size_t i = 0; i < 3; ++i) {
            loss += p.at("w")(i) * p.at("w")(i);
            grad(i) = 2.0 * p.at("w")(i);
        }
        g.emplace("w", grad);
        return std::pair<double, GradMap>(loss, g);
    };
    const GradCheckReport ok = gradient_check(good, params, 1e-4);
    REQUIRE(ok.pass);
    REQUIRE(ok.max_rel_err < 1e-4);
    REQUIRE(ok.checked == 3);

    auto bad = [](const ParamStore& p) {
        double loss = 0.0;
        GradMap g;
        Tensor grad = Tensor::vec(3);
        for (std::size_t i = 0; i < 3; ++i) {
            loss += p.at("w")(i) * p.at("w")(i);
            grad(i) = 3.0 * p.at("w")(i);  // deliberately wrong
        }
        g.emplace("w", grad);
        return std::pair<double, GradMap>(loss, g);
    };
    const GradCheckReport fail = gradient_check(bad, params, 1e-4);
    REQUIRE(!fail.pass);
    REQUIRE(fail.worst.name == "w");
}

TEST_CASE("parameter groups parse and print round-trip") {
    for (ParamGroup g : all_groups()) REQUIRE(parse_group(to_string(g)) == g);
    REQUIRE_THROWS_AS(parse_group("banana"), config_error);
}

TEST_CASE("param store group bookkeeping") {
    ParamStore params;
    params.add("conv.kernel", ParamGroup::conv, Tensor::vec(2));
    params.add("lstm.w_ih", ParamGroup::lstm, Tensor::vec(2));
    params.add("dense1.weight", ParamGroup::dense, Tensor::vec(2));
    REQUIRE(params.names_in_group(ParamGroup::lstm) ==
            std::vector<std::string>{"lstm.w_ih"});
    REQUIRE_THROWS_AS(params.add("conv.kernel", ParamGroup::conv, Tensor::vec(1)),
                      config_error);
    REQUIRE_THROWS_AS(params.at("missing"), usage_error);
    const GradMap z = params.zero_grads();
    REQUIRE(z.size() == 3);
    REQUIRE(z.at("conv.kernel").size() == 2);
}
