#include "relloc/distance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include "relloc/geometry.hpp"
#include "relloc/simplex.hpp"

namespace relloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinDistM = 1e-6;
constexpr double kHardTolNs = 1e-9;

} // namespace

double log_normal_cdf(double z) {
    if (z > -8.0) return std::log(0.5 * std::erfc(-z * M_SQRT1_2));
    // Asymptotic lower tail: phi(z)/(-z) * (1 - 1/z^2 + 3/z^4).
    const double z2 = z * z;
    return -0.5 * z2 - 0.918938533204672742 - std::log(-z) +
           std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

namespace {

// log of the soft indicator I(x, d) = F(x + d/c) - F(x - d/c), where F is
// the Gaussian CDF with the given sigma; x and sigma in ns, d in m.
double log_soft_indicator(double x_ns, double d_m, double sigma_ns) {
    const double half = d_m / kSpeedOfLight;
    if (sigma_ns <= 0.0)
        return std::abs(x_ns) <= half + kHardTolNs ? 0.0 : -kInf;
    const double la = log_normal_cdf((x_ns - half) / sigma_ns);
    const double lb = log_normal_cdf((x_ns + half) / sigma_ns);
    if (lb == -kInf) return -kInf;
    const double diff = la - lb;
    return diff >= 0.0 ? -kInf : lb + std::log1p(-std::exp(diff));
}

double sigma_at(const std::vector<std::vector<double>>& sigmas, int o, int k) {
    return sigmas.empty() ? 0.0 : sigmas[size_t(o)][size_t(k)];
}

// log-permanent of a small nonnegative matrix by Ryser's formula, with row
// scaling to keep the subset sums in range. Returns -inf for permanent 0.
double log_permanent(const Eigen::MatrixXd& a) {
    const int n = int(a.rows());
    double log_scale = 0;
    Eigen::MatrixXd m = a;
    for (int i = 0; i < n; ++i) {
        const double r = m.row(i).maxCoeff();
        if (r <= 0.0) return -kInf;
        m.row(i) /= r;
        log_scale += std::log(r);
    }
    double sum = 0;
    for (uint32_t s = 1; s < (1u << n); ++s) {
        double prod = 1.0;
        for (int i = 0; i < n; ++i) {
            double row = 0;
            for (int j = 0; j < n; ++j)
                if (s & (1u << j)) row += m(i, j);
            prod *= row;
            if (prod == 0.0) break;
        }
        const int bits = __builtin_popcount(s);
        sum += ((n - bits) % 2 == 0 ? 1.0 : -1.0) * prod;
    }
    if (sum <= 0.0) return -kInf;
    return log_scale + std::log(sum);
}

std::vector<double> flatten(const std::vector<std::vector<double>>& g) {
    std::vector<double> out;
    for (const auto& v : g) out.insert(out.end(), v.begin(), v.end());
    return out;
}

struct Seed2d {
    double d, eps, score;
};

// Multistart Nelder-Mead over the (d, eps) or d-only objective; the objective
// must return +inf outside the domain.
DistanceEstimate run_multistart(
    const std::function<double(double, double)>& neg_loglik,
    const std::vector<Seed2d>& seeds, bool eps_free, double eps_fixed,
    const std::string& method) {
    DistanceEstimate best;
    best.loglik = -kInf;
    int iters = 0;
    for (const auto& s : seeds) {
        Eigen::VectorXd x0(eps_free ? 2 : 1);
        x0(0) = std::max(s.d, kMinDistM);
        if (eps_free) x0(1) = s.eps;
        auto f = [&](const Eigen::VectorXd& x) {
            return neg_loglik(x(0), eps_free ? x(1) : eps_fixed);
        };
        const SimplexResult r = nelder_mead(f, x0, 0.05, 400, 1e-12, 1e-9);
        iters += r.iterations;
        if (-r.fval > best.loglik) {
            best.d_hat_m = r.x(0);
            best.eps_hat_ns = eps_free ? r.x(1) : eps_fixed;
            best.loglik = -r.fval;
        }
    }
    best.method = method;
    best.iterations = iters;
    return best;
}

} // namespace

void DeltaObservation::validate() const {
    if (delta_ns.empty() || total() < 1)
        throw InsufficientMpcs("need at least one delay difference");
    if (!sigma_ns.empty()) {
        if (sigma_ns.size() != delta_ns.size())
            throw CountMismatch("sigma groups must match delta groups");
        for (size_t o = 0; o < delta_ns.size(); ++o) {
            if (sigma_ns[o].size() != delta_ns[o].size())
                throw CountMismatch("sigma entries must match delta entries");
            for (double s : sigma_ns[o])
                if (s < 0) throw ValidationError("sigma must be >= 0");
        }
    }
    if (per_observer_offsets && sync_eps_ns)
        throw ConfigInvalid("per-observer offsets exclude a known sync offset");
}

double distance_loglik(const DeltaObservation& obs, double d_hyp_m,
                       double eps_hyp_ns) {
    obs.validate();
    if (d_hyp_m <= 0)
        throw NonpositiveDistanceHypothesis("d hypothesis must be > 0");
    const double eps = obs.sync_eps_ns.value_or(eps_hyp_ns);
    double ll = -double(obs.total()) * std::log(d_hyp_m);
    for (size_t o = 0; o < obs.delta_ns.size(); ++o)
        for (size_t k = 0; k < obs.delta_ns[o].size(); ++k) {
            ll += log_soft_indicator(obs.delta_ns[o][k] - eps, d_hyp_m,
                                     sigma_at(obs.sigma_ns, int(o), int(k)));
            if (ll == -kInf) return ll;
        }
    return ll;
}

DistanceEstimate estimate_distance_closedform(const DeltaObservation& obs,
                                              ClosedFormVariant variant) {
    obs.validate();
    if (obs.per_observer_offsets) {
        if (variant == ClosedFormVariant::MVUE)
            throw ConfigInvalid(
                "no closed-form MVUE with per-observer offsets");
        return estimate_distance_fullyasync(obs);
    }
    const std::vector<double> d = flatten(obs.delta_ns);
    const int k = int(d.size());
    DistanceEstimate e;
    if (obs.sync_eps_ns) {
        const double eps = *obs.sync_eps_ns;
        double m = 0;
        for (double v : d) m = std::max(m, std::abs(v - eps));
        e.d_hat_m = kSpeedOfLight * m;
        if (variant == ClosedFormVariant::MVUE)
            e.d_hat_m *= double(k + 1) / double(k);
        e.eps_hat_ns = eps;
        e.method = variant == ClosedFormVariant::MVUE ? "sync-mvue" : "sync-mle";
    } else {
        if (k < 2)
            throw InsufficientMpcs("async closed form needs >= 2 MPCs");
        const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
        e.d_hat_m = 0.5 * kSpeedOfLight * (*mx - *mn);
        if (variant == ClosedFormVariant::MVUE)
            e.d_hat_m *= double(k + 1) / double(k - 1);
        e.eps_hat_ns = 0.5 * (*mx + *mn);
        e.method = variant == ClosedFormVariant::MVUE ? "async-mvue" : "async-mle";
    }
    e.d_hat_m = std::max(e.d_hat_m, kMinDistM);
    e.loglik = 0;
    return e;
}

DistanceEstimate estimate_distance_mle(const DeltaObservation& obs) {
    obs.validate();
    if (obs.per_observer_offsets) return estimate_distance_fullyasync(obs);
    bool any_sigma = false;
    for (const auto& g : obs.sigma_ns)
        for (double s : g) any_sigma |= s > 0;
    DistanceEstimate seed =
        estimate_distance_closedform(obs, ClosedFormVariant::MLE);
    if (!any_sigma) return seed;

    double sbar = 0;
    int n = 0;
    for (const auto& g : obs.sigma_ns)
        for (double s : g) { sbar += s; ++n; }
    sbar /= double(n);

    auto neg = [&](double d, double eps) {
        if (d < kMinDistM) return kInf;
        return -distance_loglik(obs, d, eps);
    };
    const bool eps_free = !obs.sync_eps_ns.has_value();
    const double eps0 = seed.eps_hat_ns;

    // Seed from the zero-error closed form plus a 5x5 coarse grid around it;
    // keep the best three starting points.
    std::vector<Seed2d> grid;
    for (double fd : {0.5, 0.75, 1.0, 1.5, 2.0})
        for (double fe : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            const double d = std::max(seed.d_hat_m * fd,
                                      kMinDistM + kSpeedOfLight * sbar * fd);
            const double eps = eps0 + fe * sbar;
            grid.push_back({d, eps, neg(d, eps)});
            if (!eps_free) break;
        }
    std::sort(grid.begin(), grid.end(),
              [](const Seed2d& a, const Seed2d& b) { return a.score < b.score; });
    grid.resize(std::min<size_t>(grid.size(), 3));
    grid.push_back({std::max(seed.d_hat_m, kMinDistM + sbar), eps0, 0.0});

    DistanceEstimate e =
        run_multistart(neg, grid, eps_free, obs.sync_eps_ns.value_or(0.0),
                       obs.sync_eps_ns ? "sync-mle-numeric" : "async-mle-numeric");
    if (e.loglik == -kInf) throw SolverNoConverge("no feasible MLE point found");
    return e;
}

double analytic_rmse(double d_m, int k_total, RmseCase which) {
    if (d_m <= 0) throw ValidationError("d must be > 0");
    const double k = double(k_total);
    switch (which) {
        case RmseCase::AsyncDist:
            if (k_total < 2) throw InsufficientMpcs("async RMSE needs K >= 2");
            return d_m * std::sqrt(2.0 / ((k - 1.0) * (k + 2.0)));
        case RmseCase::EpsOffset:
            if (k_total < 2) throw InsufficientMpcs("offset RMSE needs K >= 2");
            return d_m / kSpeedOfLight * std::sqrt(2.0 / ((k + 1.0) * (k + 2.0)));
        case RmseCase::SyncDist:
            if (k_total < 1) throw InsufficientMpcs("sync RMSE needs K >= 1");
            return d_m / std::sqrt(k * (k + 2.0));
    }
    throw ValidationError("unknown RMSE case");
}

void NoAssocInput::validate() const {
    if (tau_a_ns.size() != tau_b_ns.size())
        throw CountMismatch("observer group counts differ");
    if (tau_a_ns.empty() || total() < 1)
        throw InsufficientMpcs("need at least one MPC");
    for (size_t o = 0; o < tau_a_ns.size(); ++o) {
        if (tau_a_ns[o].size() != tau_b_ns[o].size())
            throw CountMismatch("per-observer MPC counts differ");
        if (tau_a_ns[o].size() > 8)
            throw PermutationBudgetExceeded(
                "unknown-association estimator capped at 8 MPCs per observer");
    }
    if (!sigma_ns.empty()) {
        if (sigma_ns.size() != tau_a_ns.size())
            throw CountMismatch("sigma groups must match delay groups");
        for (size_t o = 0; o < sigma_ns.size(); ++o) {
            if (sigma_ns[o].size() != tau_a_ns[o].size())
                throw CountMismatch("sigma entries must match delay entries");
            for (double s : sigma_ns[o])
                if (s < 0) throw ValidationError("sigma must be >= 0");
        }
    }
}

namespace {

double noassoc_loglik_impl(const NoAssocInput& in, double d, double eps,
                           bool force_hard) {
    if (d <= 0)
        throw NonpositiveDistanceHypothesis("d hypothesis must be > 0");
    double ll = -double(in.total()) * std::log(d);
    for (size_t o = 0; o < in.tau_a_ns.size(); ++o) {
        const int ko = int(in.tau_a_ns[o].size());
        Eigen::MatrixXd m(ko, ko);
        for (int k = 0; k < ko; ++k) {
            const double s =
                force_hard ? 0.0 : sigma_at(in.sigma_ns, int(o), k);
            for (int l = 0; l < ko; ++l) {
                const double x =
                    in.tau_b_ns[o][size_t(l)] - in.tau_a_ns[o][size_t(k)] - eps;
                const double li = log_soft_indicator(x, d, s);
                m(k, l) = li == -kInf ? 0.0 : std::exp(li);
            }
        }
        const double lp = log_permanent(m);
        if (lp == -kInf) return -kInf;
        ll += lp;
    }
    return ll;
}

} // namespace

double noassoc_loglik(const NoAssocInput& in, double d_hyp_m,
                      double eps_hyp_ns) {
    in.validate();
    const double eps = in.sync_eps_ns.value_or(eps_hyp_ns);
    return noassoc_loglik_impl(in, d_hyp_m, eps, false);
}

DistanceEstimate estimate_distance_noassoc(const NoAssocInput& in) {
    in.validate();
    const bool sync = in.sync_eps_ns.has_value();
    bool any_sigma = false;
    for (const auto& g : in.sigma_ns)
        for (double s : g) any_sigma |= s > 0;

    // Zero-error candidate set. Sync: c*|delta - eps| over all cross pairs.
    // Async: extreme delay differences achievable over per-observer
    // permutations; the global (max, min) pair comes from the union over
    // observers of the per-permutation maxima L and minima S.
    std::vector<std::pair<double, double>> cands; // (d, eps)
    if (sync) {
        const double eps = *in.sync_eps_ns;
        for (size_t o = 0; o < in.tau_a_ns.size(); ++o)
            for (double ta : in.tau_a_ns[o])
                for (double tb : in.tau_b_ns[o])
                    cands.emplace_back(
                        std::max(kSpeedOfLight * std::abs(tb - ta - eps),
                                 kMinDistM),
                        eps);
    } else {
        std::set<double> lset, sset;
        for (size_t o = 0; o < in.tau_a_ns.size(); ++o) {
            const int ko = int(in.tau_a_ns[o].size());
            std::vector<int> perm(ko);
            std::iota(perm.begin(), perm.end(), 0);
            do {
                double mx = -kInf, mn = kInf;
                for (int k = 0; k < ko; ++k) {
                    const double dl = in.tau_b_ns[o][size_t(perm[size_t(k)])] -
                                      in.tau_a_ns[o][size_t(k)];
                    mx = std::max(mx, dl);
                    mn = std::min(mn, dl);
                }
                lset.insert(mx);
                sset.insert(mn);
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
        for (double l : lset)
            for (double s : sset)
                if (l >= s)
                    cands.emplace_back(
                        std::max(0.5 * kSpeedOfLight * (l - s), kMinDistM),
                        0.5 * (l + s));
    }

    // Score candidates under the hard-indicator likelihood; ties resolve to
    // the smallest distance, then the smallest |offset|.
    DistanceEstimate best;
    best.loglik = -kInf;
    std::vector<Seed2d> seeds;
    for (const auto& [d, eps] : cands) {
        const double ll = noassoc_loglik_impl(in, d, eps, true);
        if (ll == -kInf) continue;
        seeds.push_back({d, eps, -ll});
        const bool better =
            ll > best.loglik + 1e-12 ||
            (std::abs(ll - best.loglik) <= 1e-12 &&
             (d < best.d_hat_m ||
              (d == best.d_hat_m && std::abs(eps) < std::abs(best.eps_hat_ns))));
        if (better) {
            best.d_hat_m = d;
            best.eps_hat_ns = eps;
            best.loglik = ll;
        }
    }
    if (best.loglik == -kInf)
        throw SolverNoConverge("no feasible association candidate");
    if (!any_sigma) {
        best.method = sync ? "noassoc-sync-zero" : "noassoc-zero";
        return best;
    }

    auto neg = [&](double d, double eps) {
        if (d < kMinDistM) return kInf;
        return -noassoc_loglik_impl(in, d, eps, false);
    };
    for (auto& s : seeds) s.score = neg(s.d, s.eps);
    std::sort(seeds.begin(), seeds.end(),
              [](const Seed2d& a, const Seed2d& b) { return a.score < b.score; });
    seeds.resize(std::min<size_t>(seeds.size(), 5));
    DistanceEstimate e =
        run_multistart(neg, seeds, !sync, in.sync_eps_ns.value_or(0.0),
                       sync ? "noassoc-sync-numeric" : "noassoc-numeric");
    if (e.loglik == -kInf) throw SolverNoConverge("no feasible MLE point found");
    return e;
}

DistanceEstimate estimate_distance_fullyasync(const DeltaObservation& obs) {
    obs.validate();
    const int n = int(obs.delta_ns.size());
    for (const auto& g : obs.delta_ns)
        if (g.size() < 2)
            throw InsufficientMpcs(
                "fully asynchronous estimator needs >= 2 MPCs per observer");

    DistanceEstimate e;
    e.method = "fullyasync";
    double dmax = 0;
    std::vector<double> mins(static_cast<size_t>(n)),
        maxs(static_cast<size_t>(n));
    for (int o = 0; o < n; ++o) {
        const auto [mn, mx] = std::minmax_element(obs.delta_ns[size_t(o)].begin(),
                                                  obs.delta_ns[size_t(o)].end());
        mins[size_t(o)] = *mn;
        maxs[size_t(o)] = *mx;
        dmax = std::max(dmax, 0.5 * kSpeedOfLight * (*mx - *mn));
    }
    e.d_hat_m = std::max(dmax, kMinDistM);
    for (int o = 0; o < n; ++o) {
        // Feasible offset interval for this observer at d_hat; its midpoint
        // is the per-observer estimate.
        const double half = e.d_hat_m / kSpeedOfLight;
        e.eps_intervals_ns.emplace_back(maxs[size_t(o)] - half,
                                        mins[size_t(o)] + half);
        e.eps_per_obs_ns.push_back(0.5 * (maxs[size_t(o)] + mins[size_t(o)]));
    }
    e.eps_hat_ns = e.eps_per_obs_ns.front();

    bool any_sigma = false;
    for (const auto& g : obs.sigma_ns)
        for (double s : g) any_sigma |= s > 0;
    if (!any_sigma) return e;

    // Joint numeric refinement over (d, eps_1..eps_N).
    auto neg = [&](const Eigen::VectorXd& x) {
        const double d = x(0);
        if (d < kMinDistM) return kInf;
        double ll = -double(obs.total()) * std::log(d);
        for (int o = 0; o < n; ++o)
            for (size_t k = 0; k < obs.delta_ns[size_t(o)].size(); ++k) {
                ll += log_soft_indicator(
                    obs.delta_ns[size_t(o)][k] - x(o + 1), d,
                    sigma_at(obs.sigma_ns, o, int(k)));
                if (ll == -kInf) return kInf;
            }
        return -ll;
    };
    double sbar = 0;
    int cnt = 0;
    for (const auto& g : obs.sigma_ns)
        for (double s : g) { sbar += s; ++cnt; }
    sbar /= double(cnt);
    Eigen::VectorXd x0(n + 1);
    x0(0) = std::max(e.d_hat_m, kMinDistM + kSpeedOfLight * sbar);
    for (int o = 0; o < n; ++o) x0(o + 1) = e.eps_per_obs_ns[size_t(o)];
    const SimplexResult r = nelder_mead(neg, x0, 0.05, 800, 1e-12, 1e-9);
    if (std::isfinite(r.fval)) {
        e.d_hat_m = r.x(0);
        for (int o = 0; o < n; ++o) e.eps_per_obs_ns[size_t(o)] = r.x(o + 1);
        e.eps_hat_ns = e.eps_per_obs_ns.front();
        e.loglik = -r.fval;
        e.iterations = r.iterations;
        e.method = "fullyasync-numeric";
    }
    return e;
}

double velocity_loglik(const DeltaObservation& obs, double elapsed_s,
                       double v_hyp_m_per_s, double eps_hyp_ns) {
    if (elapsed_s <= 0) throw ValidationError("elapsed time must be > 0");
    if (v_hyp_m_per_s <= 0)
        throw NonpositiveDistanceHypothesis("speed hypothesis must be > 0");
    return distance_loglik(obs, v_hyp_m_per_s * elapsed_s, eps_hyp_ns);
}

} // namespace relloc
