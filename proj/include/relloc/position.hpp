#pragma once
#include <Eigen/Dense>
#include <functional>
#include <vector>
#include "relloc/geometry.hpp"

// Relative-position estimators: delay-difference LSE / weighted MLE (with
// plane-wave and synchronized variants), raw-delay LSE with joint clock
// offsets, per-observer-offset extensions, and the analytic RMSE
// approximation.

namespace relloc {

// One paired MPC measurement used for position estimation.
struct PosMpc {
    int observer_index = 0;
    double tau_a_ns = 0; // measured
    double tau_b_ns = 0;
    Vec3 dir_a = Vec3::Zero();
    Vec3 dir_b = Vec3::Zero();

    double delta_ns() const { return tau_b_ns - tau_a_ns; }
};

using PosObservation = std::vector<PosMpc>;

struct ProjectionSystem {
    Eigen::Matrix4Xd E;           // columns [s; 1]
    std::vector<Vec3> s;          // per-column s vectors
    std::vector<int> observer_index;
    std::vector<int> mpc_index;   // index into the source observation
};

struct PositionEstimate {
    Vec3 d_hat = Vec3::Zero();
    double eps_hat_ns = 0;
    std::vector<double> eps_per_obs_ns; // per-observer offsets when solved
    double residual_norm_m = 0;
    double cond = 0; // condition number of the normal matrix
};

ProjectionSystem build_projection_system(const PosObservation& obs, bool pwa);

struct WeightedMleParams {
    Eigen::VectorXd mu_ns;    // per-MPC delta-error mean
    Eigen::MatrixXd cov_ns2;  // per-MPC delta-error covariance
};

enum class DeltaMode { LSE, WeightedMLE, Sync, FullyAsync };

struct DeltaModeParams {
    DeltaMode mode = DeltaMode::LSE;
    WeightedMleParams weighted; // WeightedMLE only
    double sync_eps_ns = 0;     // Sync only
};

// LSE: [d; c*eps] = (E E^T)^-1 E (c*delta). WeightedMLE applies the
// Sigma-weighted formula; Sync removes the offset column and solves the K x 3
// system; FullyAsync augments E with per-observer offset indicator rows.
PositionEstimate estimate_position_by_delta(const PosObservation& obs,
                                            const DeltaModeParams& params,
                                            bool pwa);

// Mean over MPCs of delta - s^T d / c.
double estimate_clock_offset_given_d(const PosObservation& obs,
                                     const Vec3& d_known, bool pwa);

enum class TauMode { Joint, Sync, FullyAsync };

struct TauModeParams {
    TauMode mode = TauMode::Joint;
    std::vector<double> eps_a_per_obs_ns; // Sync only: known offsets
    std::vector<double> eps_b_per_obs_ns;
};

// Joint: rows c*tauB*eB - c*tauA*eA = d + c*eps*eB + c*epsA_o*(eB - eA),
// solved as a (3K) x (4+N) LSE. Sync: per-MPC mean of the offset-corrected
// vector equality. FullyAsync: unknowns [d, c*epsA_1..N, c*epsB_1..N].
PositionEstimate estimate_position_by_tau(const PosObservation& obs,
                                          const TauModeParams& params);

// Multistart simplex maximization of a user likelihood over (d, eps), seeded
// from the LSE; general non-Gaussian path.
PositionEstimate estimate_position_mle(
    const PosObservation& obs,
    const std::function<double(const Vec3&, double)>& loglik_d_eps, bool pwa);

// 3 c sigma / sqrt(K).
double approx_position_rmse(double sigma_ns, int k_total);

} // namespace relloc
