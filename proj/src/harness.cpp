#include "relloc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include "relloc/association.hpp"
#include "relloc/distance.hpp"
#include "relloc/position.hpp"

namespace relloc {

namespace {

const std::map<Estimator, std::string> kEstimatorNames = {
    {Estimator::MVUE, "MVUE"},   {Estimator::MLE, "MLE"},
    {Estimator::NA, "NA"},       {Estimator::SORT, "SORT"},
    {Estimator::DD, "DD"},       {Estimator::PWA, "PWA"},
    {Estimator::DDN, "DDN"},     {Estimator::TAU, "TAU"},
    {Estimator::TNA, "TNA"},     {Estimator::MVUE_SYNC, "MVUE_SYNC"},
    {Estimator::MLE_SYNC, "MLE_SYNC"}, {Estimator::DD_SYNC, "DD_SYNC"},
    {Estimator::TAU_SYNC, "TAU_SYNC"},
};

const std::map<SweepVar, std::string> kSweepNames = {
    {SweepVar::Distance, "d"},        {SweepVar::KPerObserver, "k"},
    {SweepVar::SigmaDir, "sigma_dir"}, {SweepVar::NAlien, "n_alien"},
    {SweepVar::SnrScale, "snr_scale"}, {SweepVar::PLos, "p_los"},
};

DeltaObservation delta_obs_from_scenario(const Scenario& s, bool sync) {
    DeltaObservation obs;
    for (const auto& group : s.mpcs) {
        std::vector<double> d, sig;
        for (const auto& m : group) {
            d.push_back(m.delta_meas_ns());
            sig.push_back(m.sigma_delta_ns());
        }
        obs.delta_ns.push_back(std::move(d));
        obs.sigma_ns.push_back(std::move(sig));
    }
    if (sync) obs.sync_eps_ns = s.eps_ns;
    return obs;
}

NoAssocInput noassoc_from_scenario(const Scenario& s) {
    NoAssocInput in;
    for (const auto& group : s.mpcs) {
        std::vector<double> a, b, sig;
        for (const auto& m : group) {
            a.push_back(m.tau_meas_a_ns);
            b.push_back(m.tau_meas_b_ns);
            sig.push_back(m.sigma_delta_ns());
        }
        in.tau_a_ns.push_back(std::move(a));
        in.tau_b_ns.push_back(std::move(b));
        in.sigma_ns.push_back(std::move(sig));
    }
    return in;
}

// B-side reordering per observer: perm[o][k] = B index paired with A index k,
// or -1 for rejected pairs.
using GroupPerms = std::vector<std::vector<int>>;

GroupPerms identity_perms(const Scenario& s) {
    GroupPerms p;
    for (const auto& group : s.mpcs) {
        std::vector<int> idx(group.size());
        for (size_t k = 0; k < group.size(); ++k) idx[k] = int(k);
        p.push_back(std::move(idx));
    }
    return p;
}

GroupPerms sort_perms(const Scenario& s) {
    GroupPerms p;
    for (const auto& group : s.mpcs) {
        std::vector<AssocMpc> a, b;
        for (const auto& m : group) {
            a.push_back({m.tau_meas_a_ns, m.geometry.dir_a, {}, m.path_id,
                         m.is_alien});
            b.push_back({m.tau_meas_b_ns, m.geometry.dir_b, {}, m.path_id_b,
                         m.is_alien});
        }
        p.push_back(associate_by_delay_sort(a, b).perm);
    }
    return p;
}

GroupPerms hungarian_perms(const Scenario& s, double tau_rms_ns) {
    AssocParams params;
    params.lambda_per_ns = tau_rms_ns > 0 ? 1.0 / tau_rms_ns : 0.0;
    GroupPerms p;
    for (const auto& group : s.mpcs) {
        std::vector<AssocMpc> a, b;
        for (const auto& m : group) {
            a.push_back({m.tau_meas_a_ns, m.geometry.dir_a, {}, m.path_id,
                         m.is_alien});
            b.push_back({m.tau_meas_b_ns, m.geometry.dir_b, {}, m.path_id_b,
                         m.is_alien});
        }
        p.push_back(associate(a, b, params).perm);
    }
    return p;
}

PosObservation pos_obs_from_scenario(const Scenario& s, const GroupPerms& perms) {
    PosObservation obs;
    for (size_t o = 0; o < s.mpcs.size(); ++o)
        for (size_t k = 0; k < s.mpcs[o].size(); ++k) {
            const int l = perms[o][k];
            if (l < 0) continue;
            const Mpc& ma = s.mpcs[o][k];
            const Mpc& mb = s.mpcs[o][size_t(l)];
            obs.push_back({int(o), ma.tau_meas_a_ns, mb.tau_meas_b_ns,
                           ma.geometry.dir_a, mb.geometry.dir_b});
        }
    return obs;
}

DeltaObservation delta_obs_permuted(const Scenario& s, const GroupPerms& perms) {
    DeltaObservation obs;
    for (size_t o = 0; o < s.mpcs.size(); ++o) {
        std::vector<double> d;
        for (size_t k = 0; k < s.mpcs[o].size(); ++k) {
            const int l = perms[o][k];
            if (l < 0) continue;
            d.push_back(s.mpcs[o][size_t(l)].tau_meas_b_ns -
                        s.mpcs[o][k].tau_meas_a_ns);
        }
        if (!d.empty()) obs.delta_ns.push_back(std::move(d));
    }
    return obs;
}

// Signed scalar error: distance estimators report d_hat - d; position
// estimators report ||d_hat - d|| with the sign of the range error.
double run_estimator(Estimator e, const Scenario& s, double tau_rms_ns) {
    const double d_true = (s.pos_b - s.pos_a).norm();
    const Vec3 d_vec = s.pos_b - s.pos_a;
    switch (e) {
        case Estimator::MVUE:
            return estimate_distance_closedform(delta_obs_from_scenario(s, false),
                                                ClosedFormVariant::MVUE)
                       .d_hat_m -
                   d_true;
        case Estimator::MVUE_SYNC:
            return estimate_distance_closedform(delta_obs_from_scenario(s, true),
                                                ClosedFormVariant::MVUE)
                       .d_hat_m -
                   d_true;
        case Estimator::MLE:
            return estimate_distance_mle(delta_obs_from_scenario(s, false))
                       .d_hat_m -
                   d_true;
        case Estimator::MLE_SYNC:
            return estimate_distance_mle(delta_obs_from_scenario(s, true))
                       .d_hat_m -
                   d_true;
        case Estimator::NA:
            return estimate_distance_noassoc(noassoc_from_scenario(s)).d_hat_m -
                   d_true;
        case Estimator::SORT: {
            DeltaObservation obs = delta_obs_permuted(s, sort_perms(s));
            return estimate_distance_closedform(obs, ClosedFormVariant::MVUE)
                       .d_hat_m -
                   d_true;
        }
        case Estimator::DD:
        case Estimator::PWA:
        case Estimator::DD_SYNC: {
            const PosObservation obs = pos_obs_from_scenario(s, identity_perms(s));
            DeltaModeParams p;
            if (e == Estimator::DD_SYNC) {
                p.mode = DeltaMode::Sync;
                p.sync_eps_ns = s.eps_ns;
            }
            const PositionEstimate pe =
                estimate_position_by_delta(obs, p, e == Estimator::PWA);
            const double err = (pe.d_hat - d_vec).norm();
            return pe.d_hat.norm() >= d_true ? err : -err;
        }
        case Estimator::DDN: {
            const PosObservation obs =
                pos_obs_from_scenario(s, hungarian_perms(s, tau_rms_ns));
            const PositionEstimate pe =
                estimate_position_by_delta(obs, DeltaModeParams{}, false);
            const double err = (pe.d_hat - d_vec).norm();
            return pe.d_hat.norm() >= d_true ? err : -err;
        }
        case Estimator::TAU:
        case Estimator::TNA:
        case Estimator::TAU_SYNC: {
            const GroupPerms perms = e == Estimator::TNA
                                         ? hungarian_perms(s, tau_rms_ns)
                                         : identity_perms(s);
            const PosObservation obs = pos_obs_from_scenario(s, perms);
            TauModeParams p;
            if (e == Estimator::TAU_SYNC) {
                p.mode = TauMode::Sync;
                p.eps_a_per_obs_ns = s.eps_a_per_obs;
                p.eps_b_per_obs_ns = s.eps_b_per_obs;
            }
            const PositionEstimate pe = estimate_position_by_tau(obs, p);
            const double err = (pe.d_hat - d_vec).norm();
            return pe.d_hat.norm() >= d_true ? err : -err;
        }
    }
    throw ConfigInvalid("unknown estimator");
}

uint64_t trial_seed(uint64_t base, uint64_t point, uint64_t trial) {
    uint64_t s = base;
    splitmix64_step(s);
    s ^= 0x9e3779b97f4a7c15ULL * (point + 1);
    splitmix64_step(s);
    s ^= 0xc2b2ae3d27d4eb4fULL * (trial + 1);
    return splitmix64_step(s);
}

} // namespace

std::string estimator_name(Estimator e) { return kEstimatorNames.at(e); }

Estimator estimator_from_name(const std::string& name) {
    for (const auto& [e, n] : kEstimatorNames)
        if (n == name) return e;
    throw ValidationError("unknown estimator: " + name);
}

bool estimator_is_position(Estimator e) {
    switch (e) {
        case Estimator::DD:
        case Estimator::PWA:
        case Estimator::DDN:
        case Estimator::TAU:
        case Estimator::TNA:
        case Estimator::DD_SYNC:
        case Estimator::TAU_SYNC:
            return true;
        default:
            return false;
    }
}

std::string sweep_var_name(SweepVar v) { return kSweepNames.at(v); }

SweepVar sweep_var_from_name(const std::string& name) {
    for (const auto& [v, n] : kSweepNames)
        if (n == name) return v;
    throw ValidationError("unknown sweep variable: " + name);
}

void ExperimentConfig::validate() const {
    channel.validate();
    if (grid.empty()) throw ConfigInvalid("sweep grid must be non-empty");
    if (estimators.empty()) throw ConfigInvalid("select at least one estimator");
    if (trials < 1) throw ConfigInvalid("trials must be >= 1");
    if (d_m <= 0) throw ConfigInvalid("d must be > 0");
    if (sigma_dir_deg < 0) throw ConfigInvalid("sigma_dir must be >= 0");
    if (n_alien < 0) throw ConfigInvalid("n_alien must be >= 0");
    if (snr_scale <= 0) throw ConfigInvalid("snr_scale must be > 0");
    if (sweep_var == SweepVar::PLos)
        for (double v : grid)
            if (v < 0 || v > 1)
                throw ConfigInvalid("p_los grid values must be in [0,1]");
    if (sweep_var == SweepVar::KPerObserver)
        for (double v : grid)
            if (v < 1 || v != std::floor(v))
                throw ConfigInvalid("k grid values must be positive integers");
    if (sweep_var == SweepVar::NAlien)
        for (double v : grid)
            if (v < 0 || v != std::floor(v))
                throw ConfigInvalid("n_alien grid values must be integers >= 0");
}

RmseReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    RmseReport report;
    for (size_t pi = 0; pi < cfg.grid.size(); ++pi) {
        const double value = cfg.grid[pi];
        ChannelConfig ch = cfg.channel;
        double d = cfg.d_m;
        double sigma_dir = cfg.sigma_dir_deg;
        int n_alien = cfg.n_alien;
        double snr_scale = cfg.snr_scale;
        switch (cfg.sweep_var) {
            case SweepVar::Distance: d = value; break;
            case SweepVar::KPerObserver: ch.k_per_observer = int(value); break;
            case SweepVar::SigmaDir: sigma_dir = value; break;
            case SweepVar::NAlien: n_alien = int(value); break;
            case SweepVar::SnrScale: snr_scale = value; break;
            case SweepVar::PLos: ch.p_los = value; break;
        }
        ch.e1 *= snr_scale;
        if (d <= 0) throw ConfigInvalid("swept d must be > 0");
        const ChannelSampler sampler(ch);

        struct Acc {
            std::vector<double> abs_err;
            double sum = 0, sum_sq = 0, sum_q = 0;
            long failures = 0;
        };
        std::vector<Acc> accs(cfg.estimators.size());

        for (int t = 0; t < cfg.trials; ++t) {
            const uint64_t seed = trial_seed(cfg.base_seed, pi, uint64_t(t));
            Scenario s = sampler.sample_scenario(d, seed);
            try {
                if (n_alien > 0) s = sampler.inject_aliens(s, n_alien, seed + 1);
                if (sigma_dir > 0)
                    s = corrupt_directions(s, sigma_dir, seed + 2);
            } catch (const Error&) {
                for (auto& a : accs) ++a.failures;
                continue;
            }
            for (size_t ei = 0; ei < cfg.estimators.size(); ++ei) {
                try {
                    const double err = run_estimator(
                        cfg.estimators[ei], s, sampler.rms_delay_spread_ns());
                    Acc& a = accs[ei];
                    a.abs_err.push_back(std::abs(err));
                    a.sum += err;
                    a.sum_sq += err * err;
                    a.sum_q += err * err * err * err;
                } catch (const Error&) {
                    ++accs[ei].failures;
                }
            }
        }

        for (size_t ei = 0; ei < cfg.estimators.size(); ++ei) {
            Acc& a = accs[ei];
            ReportRow row;
            row.sweep_var = sweep_var_name(cfg.sweep_var);
            row.sweep_value = value;
            row.estimator = estimator_name(cfg.estimators[ei]);
            row.trials = cfg.trials;
            row.failures = a.failures;
            const long n = long(a.abs_err.size());
            if (n > 0) {
                row.rmse_m = std::sqrt(a.sum_sq / double(n));
                row.bias_m = a.sum / double(n);
                std::sort(a.abs_err.begin(), a.abs_err.end());
                row.median_abs_err_m =
                    n % 2 ? a.abs_err[size_t(n / 2)]
                          : 0.5 * (a.abs_err[size_t(n / 2 - 1)] +
                                   a.abs_err[size_t(n / 2)]);
                // Delta-method standard error of the RMSE from the variance
                // of the squared errors.
                const double mean_sq = a.sum_sq / double(n);
                const double var_sq =
                    std::max(0.0, a.sum_q / double(n) - mean_sq * mean_sq);
                if (row.rmse_m > 0)
                    row.stderr_m = std::sqrt(var_sq / double(n)) /
                                   (2.0 * row.rmse_m);
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

int rss_beat_threshold(double alpha, double sigma_sh_db) {
    if (alpha <= 0 || sigma_sh_db <= 0)
        throw ValidationError("alpha and sigma_sh must be > 0");
    const double x = 10.0 * std::sqrt(2.0) / std::log(10.0) * alpha / sigma_sh_db;
    return int(std::ceil(std::sqrt(x * x + 2.25) - 0.5));
}

bool toa_beat_criterion(int k_total) {
    if (k_total < 1) throw ValidationError("K must be >= 1");
    return k_total > 18;
}

} // namespace relloc
