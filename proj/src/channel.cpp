#include "relloc/channel.hpp"

#include <algorithm>
#include <cmath>
#include "relloc/errors.hpp"

namespace relloc {

void ChannelConfig::validate() const {
    if (n_observers < 1) throw ConfigInvalid("n_observers must be >= 1");
    if (k_per_observer < 1) throw ConfigInvalid("k_per_observer must be >= 1");
    if (observer_radius_m <= 0) throw ConfigInvalid("observer_radius_m must be > 0");
    if (p_los < 0 || p_los > 1) throw ConfigInvalid("p_los must be in [0,1]");
    if (gamma_rise_ns <= 0 || gamma_1_ns <= 0)
        throw ConfigInvalid("PDP time constants must be > 0");
    if (chi < 0 || chi > 1) throw ConfigInvalid("chi must be in [0,1]");
    if (omega_1 <= 0 || n0 <= 0 || e1 <= 0)
        throw ConfigInvalid("power parameters must be > 0");
    if (bandwidth_ghz <= 0) throw ConfigInvalid("bandwidth_ghz must be > 0");
    if (excess_truncation_ns <= 0)
        throw ConfigInvalid("excess_truncation_ns must be > 0");
}

namespace {

double pdp_shape(double t, const ChannelConfig& cfg) {
    return (1.0 - cfg.chi * std::exp(-t / cfg.gamma_rise_ns)) *
           std::exp(-t / cfg.gamma_1_ns);
}

// Analytic integral of the shape over [0, inf):
// gamma_1 - chi / (1/gamma_rise + 1/gamma_1).
double pdp_shape_integral(const ChannelConfig& cfg) {
    return cfg.gamma_1_ns -
           cfg.chi / (1.0 / cfg.gamma_rise_ns + 1.0 / cfg.gamma_1_ns);
}

constexpr double kGridStepNs = 0.01;

} // namespace

double pdp_value(double excess_delay_ns, const ChannelConfig& cfg) {
    const double a = cfg.omega_1 / pdp_shape_integral(cfg);
    return a * pdp_shape(excess_delay_ns, cfg);
}

std::pair<double, double> measurement_sigma(double path_amp_sq,
                                            double excess_delay_ns,
                                            const ChannelConfig& cfg) {
    const double interference =
        cfg.pulse_duration_ns() * pdp_value(excess_delay_ns, cfg);
    const double sinr = path_amp_sq / (cfg.n0 + interference);
    const double sigma = 1.0 / (M_PI * cfg.beta_ghz() * std::sqrt(8.0 * sinr));
    return {sinr, sigma};
}

ChannelSampler::ChannelSampler(const ChannelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const size_t n = size_t(cfg_.excess_truncation_ns / kGridStepNs) + 1;
    grid_ns_.resize(n);
    cdf_.resize(n);
    double acc = 0;
    double m1 = 0, m2 = 0;
    for (size_t i = 0; i < n; ++i) {
        const double t = double(i) * kGridStepNs;
        grid_ns_[i] = t;
        const double w = pdp_shape(t, cfg_);
        acc += w;
        m1 += w * t;
        m2 += w * t * t;
        cdf_[i] = acc;
    }
    for (auto& v : cdf_) v /= acc;
    mean_excess_ = m1 / acc;
    rms_spread_ = std::sqrt(m2 / acc - mean_excess_ * mean_excess_);
}

double ChannelSampler::sample_excess_ns(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const size_t hi = std::min(size_t(it - cdf_.begin()), cdf_.size() - 1);
    if (hi == 0) return grid_ns_[0];
    const double c0 = cdf_[hi - 1], c1 = cdf_[hi];
    const double f = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
    return grid_ns_[hi - 1] + f * kGridStepNs;
}

Scenario ChannelSampler::sample_scenario(double d_m, uint64_t seed) const {
    return sample_scenario(Vec3(d_m, 0.0, 0.0), seed);
}

Scenario ChannelSampler::sample_scenario(const Vec3& pos_b,
                                         uint64_t seed) const {
    Rng rng = Rng::substream(seed, {0x5ce4a101u});
    Scenario s;
    s.pos_a = Vec3::Zero();
    s.pos_b = pos_b;
    s.eps_ns = cfg_.eps_ns;

    uint64_t next_path_id = 1;
    for (int o = 0; o < cfg_.n_observers; ++o) {
        s.observers.push_back(cfg_.observer_radius_m * rng.unit_sphere());
        const double eps_a =
            rng.uniform(-cfg_.clock_offset_range_ns, cfg_.clock_offset_range_ns);
        const double eps_b =
            cfg_.per_observer_offsets
                ? rng.uniform(-cfg_.clock_offset_range_ns,
                              cfg_.clock_offset_range_ns)
                : eps_a + cfg_.eps_ns;
        s.eps_a_per_obs.push_back(eps_a);
        s.eps_b_per_obs.push_back(eps_b);

        const Vec3& obs = s.observers.back();
        const bool has_los = rng.uniform() < cfg_.p_los;
        const double tau_min = cfg_.tau_min_ns();
        const double tau_min_b = (s.pos_b - obs).norm() / kSpeedOfLight;

        std::vector<Mpc> group;
        for (int k = 0; k < cfg_.k_per_observer; ++k) {
            Mpc m;
            m.observer_index = o;
            m.mpc_index = k;
            m.path_id = m.path_id_b = next_path_id++;
            m.is_los = has_los && k == 0;

            double excess_a;
            if (m.is_los) {
                excess_a = 0.0;
                m.geometry.tau_a_ns = tau_min;
                m.geometry.dir_a = (s.pos_a - obs).normalized();
                m.geometry.virtual_source = obs;
            } else {
                excess_a = sample_excess_ns(rng);
                m.geometry.tau_a_ns = tau_min + excess_a;
                m.geometry.dir_a = rng.unit_sphere();
                m.geometry.virtual_source =
                    s.pos_a - kSpeedOfLight * m.geometry.tau_a_ns * m.geometry.dir_a;
            }
            // Triangle closure: b = c*tau_a*e_a + d.
            const Vec3 b =
                kSpeedOfLight * m.geometry.tau_a_ns * m.geometry.dir_a +
                (s.pos_b - s.pos_a);
            m.geometry.tau_b_ns = b.norm() / kSpeedOfLight;
            m.geometry.dir_b = b.normalized();
            const double excess_b =
                std::max(0.0, m.geometry.tau_b_ns - tau_min_b);

            const double xi = m.is_los ? 1.0 : cfg_.xi_nlos();
            const double amp_a =
                xi * cfg_.e1 /
                std::pow(kSpeedOfLight * m.geometry.tau_a_ns, 2.0);
            const double amp_b =
                xi * cfg_.e1 /
                std::pow(kSpeedOfLight * m.geometry.tau_b_ns, 2.0);
            std::tie(m.sinr_a, m.sigma_a_ns) =
                measurement_sigma(amp_a, excess_a, cfg_);
            std::tie(m.sinr_b, m.sigma_b_ns) =
                measurement_sigma(amp_b, excess_b, cfg_);

            m.tau_meas_a_ns =
                m.geometry.tau_a_ns + rng.normal(0.0, m.sigma_a_ns) + eps_a;
            m.tau_meas_b_ns =
                m.geometry.tau_b_ns + rng.normal(0.0, m.sigma_b_ns) + eps_b;
            group.push_back(m);
        }
        s.mpcs.push_back(std::move(group));
    }
    return s;
}

Scenario ChannelSampler::inject_aliens(const Scenario& s, int n_alien,
                                       uint64_t seed) const {
    const int total = s.total_mpcs();
    if (n_alien < 0 || n_alien > total)
        throw ConfigInvalid("n_alien out of range");
    Scenario out = s;
    if (n_alien == 0) return out;

    Rng rng = Rng::substream(seed, {0xa11e7u});

    // Flatten slot indices and pick n_alien without replacement.
    std::vector<std::pair<int, int>> slots;
    for (int o = 0; o < int(s.mpcs.size()); ++o)
        for (int k = 0; k < int(s.mpcs[o].size()); ++k)
            slots.emplace_back(o, k);
    for (int i = 0; i < n_alien; ++i) {
        const int j = i + int(rng.uniform() * double(slots.size() - i));
        std::swap(slots[i], slots[std::min(j, int(slots.size()) - 1)]);
    }

    uint64_t fresh_id = 1u << 20; // beyond any sampled path_id
    for (int i = 0; i < n_alien; ++i) {
        auto [o, k] = slots[i];
        auto& group = out.mpcs[o];
        const Vec3& obs = out.observers[o];
        const double tau_min_b = (out.pos_b - obs).norm() / kSpeedOfLight;

        // Rank of the old measured B delay among the group.
        auto rank_of = [&](double v, int skip) {
            int r = 0;
            for (int j = 0; j < int(group.size()); ++j)
                if (j != skip && group[j].tau_meas_b_ns < v) ++r;
            return r;
        };
        const int old_rank = rank_of(group[k].tau_meas_b_ns, k);

        bool placed = false;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            const double excess = sample_excess_ns(rng);
            const double tau_b = tau_min_b + excess;
            const double amp =
                cfg_.xi_nlos() * cfg_.e1 /
                std::pow(kSpeedOfLight * tau_b, 2.0);
            auto [sinr, sigma] = measurement_sigma(amp, excess, cfg_);
            const double tau_meas =
                tau_b + rng.normal(0.0, sigma) + out.eps_b_per_obs[o];
            if (rank_of(tau_meas, k) != old_rank) continue;

            Mpc& m = group[k];
            m.geometry.tau_b_ns = tau_b;
            m.geometry.dir_b = rng.unit_sphere();
            m.sinr_b = sinr;
            m.sigma_b_ns = sigma;
            m.tau_meas_b_ns = tau_meas;
            m.path_id_b = fresh_id++;
            m.is_alien = true;
            m.is_los = false;
            placed = true;
            break;
        }
        if (!placed)
            throw RejectionBudgetExceeded(
                "could not keep B-side delay order after 1e4 redraws");
    }
    return out;
}

Scenario corrupt_directions(const Scenario& s, double sigma_dir_deg,
                            uint64_t seed) {
    if (sigma_dir_deg < 0) throw ConfigInvalid("sigma_dir must be >= 0");
    Scenario out = s;
    if (sigma_dir_deg == 0) return out;
    Rng rng = Rng::substream(seed, {0xd14ec7u});
    const double sigma_rad = sigma_dir_deg * M_PI / 180.0;

    auto deflect = [&](const Vec3& e) {
        const double alpha = std::abs(rng.normal(0.0, sigma_rad));
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        // Orthonormal frame around e.
        Vec3 u = std::abs(e.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        u = (u - u.dot(e) * e).normalized();
        const Vec3 v = e.cross(u);
        return (std::cos(alpha) * e +
                std::sin(alpha) * (std::cos(phi) * u + std::sin(phi) * v))
            .normalized();
    };

    for (auto& group : out.mpcs)
        for (auto& m : group) {
            m.geometry.dir_a = deflect(m.geometry.dir_a);
            m.geometry.dir_b = deflect(m.geometry.dir_b);
        }
    return out;
}

} // namespace relloc
