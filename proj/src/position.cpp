#include "relloc/position.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include "relloc/errors.hpp"
#include "relloc/simplex.hpp"

namespace relloc {

namespace {

constexpr double kCondLimit = 1e10;

int count_observers(const PosObservation& obs) {
    std::set<int> ids;
    for (const auto& m : obs) {
        if (m.observer_index < 0)
            throw ValidationError("observer_index must be >= 0");
        ids.insert(m.observer_index);
    }
    return ids.empty() ? 0 : *ids.rbegin() + 1;
}

// Rank-revealing least squares via SVD; cond refers to the normal matrix
// M^T M, i.e. the squared singular-value ratio of M.
Eigen::VectorXd solve_lse(const Eigen::MatrixXd& m, const Eigen::VectorXd& y,
                          double& cond_out) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    cond_out = smin > 0 ? std::pow(sv(0) / smin, 2.0)
                        : std::numeric_limits<double>::infinity();
    if (!(cond_out <= kCondLimit))
        throw RankDeficient("normal-matrix condition number exceeds 1e10");
    return svd.solve(y);
}

} // namespace

ProjectionSystem build_projection_system(const PosObservation& obs, bool pwa) {
    ProjectionSystem sys;
    const int k = int(obs.size());
    sys.E.resize(4, k);
    for (int i = 0; i < k; ++i) {
        const PosMpc& m = obs[size_t(i)];
        require_unit(m.dir_a);
        Vec3 s;
        if (pwa) {
            s = m.dir_a;
        } else {
            require_unit(m.dir_b);
            s = s_vector(m.dir_a, m.dir_b);
        }
        sys.E.col(i) << s, 1.0;
        sys.s.push_back(s);
        sys.observer_index.push_back(m.observer_index);
        sys.mpc_index.push_back(i);
    }
    return sys;
}

PositionEstimate estimate_position_by_delta(const PosObservation& obs,
                                            const DeltaModeParams& params,
                                            bool pwa) {
    const int k = int(obs.size());
    const ProjectionSystem sys = build_projection_system(obs, pwa);
    Eigen::VectorXd cdelta(k);
    for (int i = 0; i < k; ++i)
        cdelta(i) = kSpeedOfLight * obs[size_t(i)].delta_ns();

    PositionEstimate e;
    switch (params.mode) {
        case DeltaMode::LSE:
        case DeltaMode::WeightedMLE: {
            if (k < 4)
                throw InsufficientMpcs("async position solve needs K >= 4");
            Eigen::MatrixXd m = sys.E.transpose();
            Eigen::VectorXd y = cdelta;
            if (params.mode == DeltaMode::WeightedMLE) {
                const auto& w = params.weighted;
                if (w.mu_ns.size() != k || w.cov_ns2.rows() != k ||
                    w.cov_ns2.cols() != k)
                    throw CountMismatch("weighted params must be K-sized");
                y -= kSpeedOfLight * w.mu_ns;
                if (w.cov_ns2.isDiagonal(0.0)) {
                    for (int i = 0; i < k; ++i) {
                        const double s = std::sqrt(w.cov_ns2(i, i));
                        if (s <= 0)
                            throw ValidationError("covariance must be PD");
                        m.row(i) /= s;
                        y(i) /= s;
                    }
                } else {
                    const Eigen::LLT<Eigen::MatrixXd> llt(w.cov_ns2);
                    if (llt.info() != Eigen::Success)
                        throw ValidationError("covariance must be PD");
                    m = llt.matrixL().solve(m);
                    y = llt.matrixL().solve(y);
                }
            }
            const Eigen::VectorXd theta = solve_lse(m, y, e.cond);
            e.d_hat = theta.head<3>();
            e.eps_hat_ns = theta(3) / kSpeedOfLight;
            e.residual_norm_m = (y - m * theta).norm();
            break;
        }
        case DeltaMode::Sync: {
            if (k < 3)
                throw InsufficientMpcs("sync position solve needs K >= 3");
            const Eigen::MatrixXd m = sys.E.topRows<3>().transpose();
            const Eigen::VectorXd y =
                cdelta.array() - kSpeedOfLight * params.sync_eps_ns;
            const Eigen::VectorXd theta = solve_lse(m, y, e.cond);
            e.d_hat = theta;
            e.eps_hat_ns = params.sync_eps_ns;
            e.residual_norm_m = (y - m * theta).norm();
            break;
        }
        case DeltaMode::FullyAsync: {
            const int n = count_observers(obs);
            if (k < 3 + n)
                throw InsufficientMpcs(
                    "per-observer-offset solve needs K >= 3 + N");
            std::vector<int> per_obs(size_t(n), 0);
            for (const auto& m : obs) ++per_obs[size_t(m.observer_index)];
            for (int c : per_obs)
                if (c == 0)
                    throw InsufficientMpcs("every observer needs >= 1 MPC");
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, 3 + n);
            for (int i = 0; i < k; ++i) {
                m.block<1, 3>(i, 0) = sys.s[size_t(i)].transpose();
                m(i, 3 + obs[size_t(i)].observer_index) = 1.0;
            }
            const Eigen::VectorXd theta = solve_lse(m, cdelta, e.cond);
            e.d_hat = theta.head<3>();
            for (int o = 0; o < n; ++o)
                e.eps_per_obs_ns.push_back(theta(3 + o) / kSpeedOfLight);
            e.eps_hat_ns = e.eps_per_obs_ns.front();
            e.residual_norm_m = (cdelta - m * theta).norm();
            break;
        }
    }
    return e;
}

double estimate_clock_offset_given_d(const PosObservation& obs,
                                     const Vec3& d_known, bool pwa) {
    if (obs.empty()) throw InsufficientMpcs("need at least one MPC");
    const ProjectionSystem sys = build_projection_system(obs, pwa);
    double acc = 0;
    for (size_t i = 0; i < obs.size(); ++i)
        acc += obs[i].delta_ns() - sys.s[i].dot(d_known) / kSpeedOfLight;
    return acc / double(obs.size());
}

PositionEstimate estimate_position_by_tau(const PosObservation& obs,
                                          const TauModeParams& params) {
    const int k = int(obs.size());
    if (k < 1) throw InsufficientMpcs("need at least one MPC");
    for (const auto& m : obs) {
        require_unit(m.dir_a);
        require_unit(m.dir_b);
    }
    const int n = count_observers(obs);

    PositionEstimate e;
    if (params.mode == TauMode::Sync) {
        if (int(params.eps_a_per_obs_ns.size()) != n ||
            int(params.eps_b_per_obs_ns.size()) != n)
            throw CountMismatch("sync mode needs per-observer known offsets");
        Vec3 acc = Vec3::Zero();
        for (const auto& m : obs) {
            const int o = m.observer_index;
            acc += kSpeedOfLight *
                   ((m.tau_b_ns - params.eps_b_per_obs_ns[size_t(o)]) * m.dir_b -
                    (m.tau_a_ns - params.eps_a_per_obs_ns[size_t(o)]) * m.dir_a);
        }
        e.d_hat = acc / double(k);
        e.eps_hat_ns = 0;
        e.cond = 1;
        return e;
    }

    const int unknowns =
        params.mode == TauMode::Joint ? 4 + n : 3 + 2 * n;
    if (3 * k < unknowns)
        throw InsufficientMpcs("too few MPCs for the raw-delay solve");

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3 * k, unknowns);
    Eigen::VectorXd t(3 * k);
    for (int i = 0; i < k; ++i) {
        const PosMpc& m = obs[size_t(i)];
        const int o = m.observer_index;
        g.block<3, 3>(3 * i, 0) = Eigen::Matrix3d::Identity();
        if (params.mode == TauMode::Joint) {
            g.block<3, 1>(3 * i, 3) = m.dir_b;
            g.block<3, 1>(3 * i, 4 + o) = m.dir_b - m.dir_a;
        } else {
            g.block<3, 1>(3 * i, 3 + o) = -m.dir_a;
            g.block<3, 1>(3 * i, 3 + n + o) = m.dir_b;
        }
        t.segment<3>(3 * i) =
            kSpeedOfLight * (m.tau_b_ns * m.dir_b - m.tau_a_ns * m.dir_a);
    }
    const Eigen::VectorXd theta = solve_lse(g, t, e.cond);
    e.d_hat = theta.head<3>();
    if (params.mode == TauMode::Joint) {
        e.eps_hat_ns = theta(3) / kSpeedOfLight;
        for (int o = 0; o < n; ++o)
            e.eps_per_obs_ns.push_back(theta(4 + o) / kSpeedOfLight);
    } else {
        for (int o = 0; o < 2 * n; ++o)
            e.eps_per_obs_ns.push_back(theta(3 + o) / kSpeedOfLight);
        e.eps_hat_ns =
            e.eps_per_obs_ns[size_t(n)] - e.eps_per_obs_ns[0];
    }
    e.residual_norm_m = (t - g * theta).norm();
    return e;
}

PositionEstimate estimate_position_mle(
    const PosObservation& obs,
    const std::function<double(const Vec3&, double)>& loglik_d_eps, bool pwa) {
    DeltaModeParams lse;
    PositionEstimate seed = estimate_position_by_delta(obs, lse, pwa);

    auto neg = [&](const Eigen::VectorXd& x) {
        return -loglik_d_eps(Vec3(x(0), x(1), x(2)), x(3));
    };
    const double scale = std::max(seed.d_hat.norm(), 0.1);
    PositionEstimate best = seed;
    double best_f = neg((Eigen::VectorXd(4) << seed.d_hat, seed.eps_hat_ns)
                            .finished());
    for (double f : {0.0, -0.5, 0.5}) {
        Eigen::VectorXd x0(4);
        x0 << seed.d_hat + f * scale * Vec3::Ones(), seed.eps_hat_ns;
        const SimplexResult r = nelder_mead(neg, x0, 0.1, 1000, 1e-12, 1e-9);
        if (r.fval < best_f) {
            best_f = r.fval;
            best.d_hat = r.x.head<3>();
            best.eps_hat_ns = r.x(3);
        }
    }
    return best;
}

double approx_position_rmse(double sigma_ns, int k_total) {
    if (sigma_ns <= 0) throw ValidationError("sigma must be > 0");
    if (k_total < 4) throw InsufficientMpcs("approximation assumes K >= 4");
    return 3.0 * kSpeedOfLight * sigma_ns / std::sqrt(double(k_total));
}

} // namespace relloc
