#pragma once
#include <cstdint>
#include <string>
#include <vector>
#include "relloc/channel.hpp"

// Monte Carlo experiment runner: sweeps one scenario parameter over a grid,
// runs the selected distance/position estimators on deterministic substreams,
// and aggregates RMSE, bias, median absolute error, and failure counts.

namespace relloc {

enum class Estimator {
    MVUE,     // closed-form distance MVUE, true association
    MLE,      // numeric Gaussian distance MLE
    NA,       // distance MLE without association (permanent likelihood)
    SORT,     // distance MVUE after delay-sort association
    DD,       // delay-difference position LSE, true association
    PWA,      // delay-difference LSE under the plane-wave assumption
    DDN,      // delay-difference LSE, association estimated (Hungarian)
    TAU,      // raw-delay LSE with joint clock offsets
    TNA,      // raw-delay LSE, association estimated
    MVUE_SYNC, // known-offset variants
    MLE_SYNC,
    DD_SYNC,
    TAU_SYNC,
};

std::string estimator_name(Estimator e);
Estimator estimator_from_name(const std::string& name);
bool estimator_is_position(Estimator e);

enum class SweepVar { Distance, KPerObserver, SigmaDir, NAlien, SnrScale, PLos };

std::string sweep_var_name(SweepVar v);
SweepVar sweep_var_from_name(const std::string& name);

struct ExperimentConfig {
    ChannelConfig channel;
    double d_m = 2.5;
    double sigma_dir_deg = 0;
    int n_alien = 0;
    double snr_scale = 1.0; // multiplies the reference path energy e1
    SweepVar sweep_var = SweepVar::Distance;
    std::vector<double> grid = {2.5};
    std::vector<Estimator> estimators = {Estimator::MVUE};
    int trials = 1000;
    uint64_t base_seed = 1;

    void validate() const;
};

struct ReportRow {
    std::string sweep_var;
    double sweep_value = 0;
    std::string estimator;
    double rmse_m = 0;
    double bias_m = 0;
    double median_abs_err_m = 0;
    long trials = 0;
    long failures = 0;
    double stderr_m = 0;
};

struct RmseReport {
    std::vector<ReportRow> rows;
};

RmseReport run_experiment(const ExperimentConfig& cfg);

// Smallest K at which the multipath distance estimator outperforms RSS
// ranging with path-loss exponent alpha and shadowing sigma_sh (dB):
// K_min = ceil(sqrt(x^2 + 9/4) - 1/2), x = (10*sqrt(2)/ln 10) * alpha/sigma_sh.
int rss_beat_threshold(double alpha, double sigma_sh_db);

// Equal-sigma criterion for beating two-way TOA ranging.
bool toa_beat_criterion(int k_total);

} // namespace relloc
