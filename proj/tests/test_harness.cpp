#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "relloc/harness.hpp"

using namespace relloc;

TEST_CASE("estimator and sweep-variable names round-trip") {
    for (Estimator e : {Estimator::MVUE, Estimator::MLE, Estimator::NA,
                        Estimator::SORT, Estimator::DD, Estimator::PWA,
                        Estimator::DDN, Estimator::TAU, Estimator::TNA,
                        Estimator::TAU_SYNC})
        CHECK(estimator_from_name(estimator_name(e)) == e);
    CHECK_THROWS_AS(estimator_from_name("BOGUS"), ValidationError);
    for (SweepVar v : {SweepVar::Distance, SweepVar::KPerObserver,
                       SweepVar::SigmaDir, SweepVar::NAlien,
                       SweepVar::SnrScale, SweepVar::PLos})
        CHECK(sweep_var_from_name(sweep_var_name(v)) == v);
}

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
    cfg = ExperimentConfig{};
    cfg.grid.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
    cfg = ExperimentConfig{};
    cfg.sweep_var = SweepVar::PLos;
    cfg.grid = {0.5, 1.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigInvalid);
}

TEST_CASE("reports are bit-identical across runs") {
    ExperimentConfig cfg;
    cfg.trials = 50;
    cfg.estimators = {Estimator::MVUE, Estimator::DD};
    cfg.grid = {1.0, 2.5};
    const RmseReport r1 = run_experiment(cfg);
    const RmseReport r2 = run_experiment(cfg);
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].rmse_m == r2.rows[i].rmse_m);
        CHECK(r1.rows[i].bias_m == r2.rows[i].bias_m);
        CHECK(r1.rows[i].median_abs_err_m == r2.rows[i].median_abs_err_m);
    }
    cfg.base_seed = 2;
    const RmseReport r3 = run_experiment(cfg);
    CHECK(r3.rows[0].rmse_m != r1.rows[0].rmse_m);
}

TEST_CASE("small experiment produces sane MVUE numbers") {
    ExperimentConfig cfg;
    cfg.trials = 2000;
    cfg.estimators = {Estimator::MVUE};
    cfg.grid = {2.5};
    const RmseReport r = run_experiment(cfg);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].failures == 0);
    CHECK(r.rows[0].rmse_m > 0.1);
    CHECK(r.rows[0].rmse_m < 0.6);
    CHECK(r.rows[0].stderr_m > 0);
    CHECK(r.rows[0].trials == 2000);
}

TEST_CASE("failures are counted, not fatal") {
    ExperimentConfig cfg;
    cfg.channel.n_observers = 1;
    cfg.channel.k_per_observer = 3; // K = 3 < 4: async position solve fails
    cfg.trials = 20;
    cfg.estimators = {Estimator::DD};
    cfg.grid = {2.5};
    const RmseReport r = run_experiment(cfg);
    CHECK(r.rows[0].failures == 20);
    CHECK(r.rows[0].rmse_m == 0.0);
}

TEST_CASE("sweep variables are applied") {
    ExperimentConfig cfg;
    cfg.trials = 200;
    cfg.estimators = {Estimator::MVUE};
    cfg.sweep_var = SweepVar::KPerObserver;
    cfg.grid = {2, 12};
    const RmseReport r = run_experiment(cfg);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].rmse_m > r.rows[1].rmse_m); // more MPCs, lower RMSE
}

TEST_CASE("RSS beat threshold matches tabulated breakpoints") {
    CHECK(rss_beat_threshold(2.0, 3.0) == 4);
    CHECK(rss_beat_threshold(2.0, 6.14492392567659) == 2);
    CHECK(rss_beat_threshold(2.0, 6.13878207267742) == 3);
    // monotone decreasing in sigma_sh
    int prev = 1 << 20;
    for (double s = 0.5; s < 10.0; s += 0.25) {
        const int k = rss_beat_threshold(2.0, s);
        CHECK(k <= prev);
        prev = k;
    }
    CHECK(rss_beat_threshold(2.0, 0.01) > 500);
    CHECK_THROWS_AS(rss_beat_threshold(-1.0, 3.0), ValidationError);
}

TEST_CASE("TOA criterion flips at 18 to 19") {
    CHECK(!toa_beat_criterion(1));
    CHECK(!toa_beat_criterion(18));
    CHECK(toa_beat_criterion(19));
    CHECK_THROWS_AS(toa_beat_criterion(0), ValidationError);
}
