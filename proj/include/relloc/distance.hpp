#pragma once
#include <optional>
#include <string>
#include <vector>
#include "relloc/errors.hpp"

// Distance estimators from per-observer delay differences: general Gaussian
// MLE, zero-error closed forms (MLE/MVUE), clock-offset estimation, analytic
// RMSE laws, the unknown-association MLE (matrix-permanent likelihood), the
// fully-asynchronous variants, and the velocity likelihood.

namespace relloc {

struct DeltaObservation {
    std::vector<std::vector<double>> delta_ns; // grouped by observer
    std::vector<std::vector<double>> sigma_ns; // empty => zero-sigma model
    std::optional<double> sync_eps_ns;         // known clock offset
    bool per_observer_offsets = false;         // fully asynchronous mode

    int total() const {
        int k = 0;
        for (const auto& g : delta_ns) k += int(g.size());
        return k;
    }
    bool has_sigmas() const { return !sigma_ns.empty(); }
    void validate() const;
};

struct DistanceEstimate {
    double d_hat_m = 0;
    double eps_hat_ns = 0;
    std::vector<double> eps_per_obs_ns;                        // fully async
    std::vector<std::pair<double, double>> eps_intervals_ns;   // diagnostics
    double loglik = 0;
    std::string method;
    int iterations = 0;
};

enum class ClosedFormVariant { MLE, MVUE };
enum class RmseCase { AsyncDist, EpsOffset, SyncDist };

// log[ d^-K * prod I_ko(delta - eps, d) ]; zero-sigma entries use the hard
// indicator (-inf when violated).
double distance_loglik(const DeltaObservation& obs, double d_hyp_m,
                       double eps_hyp_ns);

DistanceEstimate estimate_distance_mle(const DeltaObservation& obs);

DistanceEstimate estimate_distance_closedform(const DeltaObservation& obs,
                                              ClosedFormVariant variant);

// d*sqrt(2)/sqrt((K-1)(K+2)) | (d/c)*sqrt(2)/sqrt((K+1)(K+2)) | d/sqrt(K(K+2))
double analytic_rmse(double d_m, int k_total, RmseCase which);

struct NoAssocInput {
    std::vector<std::vector<double>> tau_a_ns; // grouped by observer
    std::vector<std::vector<double>> tau_b_ns; // same group sizes
    std::vector<std::vector<double>> sigma_ns; // combined delta sigma, optional
    std::optional<double> sync_eps_ns;
    void validate() const;
    int total() const {
        int k = 0;
        for (const auto& g : tau_a_ns) k += int(g.size());
        return k;
    }
};

// Permutation-sum likelihood of the unknown-association model, evaluated via
// matrix permanents (Ryser); exposed for oracle tests.
double noassoc_loglik(const NoAssocInput& in, double d_hyp_m,
                      double eps_hyp_ns);

DistanceEstimate estimate_distance_noassoc(const NoAssocInput& in);

DistanceEstimate estimate_distance_fullyasync(const DeltaObservation& obs);

// L(v, eps) = distance likelihood at d = v * T.
double velocity_loglik(const DeltaObservation& obs, double elapsed_s,
                       double v_hyp_m_per_s, double eps_hyp_ns);

// log of the standard normal CDF, stable far into the lower tail.
double log_normal_cdf(double z);

} // namespace relloc
