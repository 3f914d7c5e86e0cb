#include "relloc/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include "relloc/errors.hpp"

namespace relloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double delay_spread(const std::vector<AssocMpc>& set) {
    if (set.size() < 2) return 0;
    double m = 0;
    for (const auto& x : set) m += x.tau_ns;
    m /= double(set.size());
    double v = 0;
    for (const auto& x : set) v += (x.tau_ns - m) * (x.tau_ns - m);
    return std::sqrt(v / double(set.size()));
}

double mean_delay(const std::vector<AssocMpc>& set) {
    double m = 0;
    for (const auto& x : set) m += x.tau_ns;
    return set.empty() ? 0 : m / double(set.size());
}

// Hungarian algorithm (potentials formulation), O(n^3), square cost matrix.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const int n = int(cost.size());
    std::vector<double> u(size_t(n) + 1), v(size_t(n) + 1);
    std::vector<int> p(size_t(n) + 1, 0), way(size_t(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(size_t(n) + 1, kInf);
        std::vector<char> used(size_t(n) + 1, false);
        do {
            used[size_t(j0)] = true;
            const int i0 = p[size_t(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j)
                if (!used[size_t(j)]) {
                    const double cur = cost[size_t(i0 - 1)][size_t(j - 1)] -
                                       u[size_t(i0)] - v[size_t(j)];
                    if (cur < minv[size_t(j)]) {
                        minv[size_t(j)] = cur;
                        way[size_t(j)] = j0;
                    }
                    if (minv[size_t(j)] < delta) {
                        delta = minv[size_t(j)];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j)
                if (used[size_t(j)]) {
                    u[size_t(p[size_t(j)])] += delta;
                    v[size_t(j)] -= delta;
                } else {
                    minv[size_t(j)] -= delta;
                }
            j0 = j1;
        } while (p[size_t(j0)] != 0);
        do {
            const int j1 = way[size_t(j0)];
            p[size_t(j0)] = p[size_t(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> match(static_cast<size_t>(n));
    for (int j = 1; j <= n; ++j) match[size_t(p[size_t(j)] - 1)] = j - 1;
    return match;
}

} // namespace

void AssocParams::validate() const {
    if (angle_gate_deg <= 0 || angle_gate_deg > 180)
        throw ConfigInvalid("angle_gate_deg must be in (0, 180]");
    if (lambda_per_ns < 0) throw ConfigInvalid("lambda must be >= 0");
}

double association_cost(const AssocMpc& a, const AssocMpc& b,
                        const AssocParams& params, double mu_a_ns,
                        double mu_b_ns) {
    params.validate();
    require_unit(a.dir);
    require_unit(b.dir);
    const double cos_gate = std::cos(params.angle_gate_deg * M_PI / 180.0);
    if (a.dir.dot(b.dir) < cos_gate) return kInf;
    const double dt = (b.tau_ns - mu_b_ns) - (a.tau_ns - mu_a_ns);
    double cost = (b.dir - a.dir).squaredNorm() +
                  params.lambda_per_ns * params.lambda_per_ns * dt * dt;
    if (params.use_observer_directions && a.obs_dir && b.obs_dir)
        cost += (*b.obs_dir - *a.obs_dir).squaredNorm();
    return cost;
}

Association associate(const std::vector<AssocMpc>& set_a,
                      const std::vector<AssocMpc>& set_b,
                      const AssocParams& params) {
    params.validate();
    if (set_a.size() != set_b.size())
        throw CountMismatch("association needs equal set sizes");
    const int n = int(set_a.size());
    Association out;
    if (n == 0) return out;

    AssocParams p = params;
    if (p.lambda_per_ns <= 0) {
        const double spread = delay_spread(set_a);
        p.lambda_per_ns = spread > 0 ? 1.0 / spread : 0.0;
    }
    const double mu_a =
        p.mu_mode == MuMode::MeanDelay ? mean_delay(set_a) : p.eps_a_ns;
    const double mu_b =
        p.mu_mode == MuMode::MeanDelay ? mean_delay(set_b) : p.eps_b_ns;

    // Rejection cutoff: default is the direction-only cost at the gate angle.
    const double half = 0.5 * p.angle_gate_deg * M_PI / 180.0;
    const double cutoff = p.rejection_cost > 0
                              ? p.rejection_cost
                              : 4.0 * std::sin(half) * std::sin(half);

    // Raw costs, then an OSPA-style cap at the cutoff: the assignment may
    // route a bad pair through the capped cost, which realizes a rejection.
    // With an infinite cutoff, gated pairs get a large-finite sentinel
    // instead so the assignment stays square.
    std::vector<std::vector<double>> raw(
        static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n)));
    double max_finite = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double c = association_cost(set_a[size_t(i)],
                                              set_b[size_t(j)], p, mu_a, mu_b);
            raw[size_t(i)][size_t(j)] = c;
            if (std::isfinite(c)) max_finite = std::max(max_finite, c);
        }
    const double cap =
        std::isfinite(cutoff) ? cutoff : 1e6 * (1.0 + max_finite);
    std::vector<std::vector<double>> cost = raw;
    for (auto& row : cost)
        for (double& c : row) c = std::min(c, cap);

    std::vector<int> perm = hungarian(cost);

    // Deterministic tie-break: pairwise swaps toward the lexicographically
    // smallest permutation among equal-cost optima.
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < n && !changed; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double cur = cost[size_t(i)][size_t(perm[size_t(i)])] +
                                   cost[size_t(j)][size_t(perm[size_t(j)])];
                const double alt = cost[size_t(i)][size_t(perm[size_t(j)])] +
                                   cost[size_t(j)][size_t(perm[size_t(i)])];
                if (alt == cur && perm[size_t(j)] < perm[size_t(i)]) {
                    std::swap(perm[size_t(i)], perm[size_t(j)]);
                    changed = true;
                    break;
                }
            }
    }

    out.perm.assign(size_t(n), -1);
    for (int i = 0; i < n; ++i) {
        const double c = raw[size_t(i)][size_t(perm[size_t(i)])];
        if (c >= cutoff) {
            out.rejected_a.push_back(i);
            out.rejected_b.push_back(perm[size_t(i)]);
        } else {
            out.perm[size_t(i)] = perm[size_t(i)];
            out.total_cost += c;
        }
    }
    std::sort(out.rejected_b.begin(), out.rejected_b.end());
    return out;
}

Association associate_by_delay_sort(const std::vector<AssocMpc>& set_a,
                                    const std::vector<AssocMpc>& set_b) {
    if (set_a.size() != set_b.size())
        throw CountMismatch("association needs equal set sizes");
    const int n = int(set_a.size());
    std::vector<int> ia(static_cast<size_t>(n)), ib(static_cast<size_t>(n));
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    auto by_delay = [](const std::vector<AssocMpc>& s) {
        return [&s](int x, int y) {
            return s[size_t(x)].tau_ns != s[size_t(y)].tau_ns
                       ? s[size_t(x)].tau_ns < s[size_t(y)].tau_ns
                       : x < y;
        };
    };
    std::stable_sort(ia.begin(), ia.end(), by_delay(set_a));
    std::stable_sort(ib.begin(), ib.end(), by_delay(set_b));
    Association out;
    out.perm.assign(size_t(n), -1);
    for (int r = 0; r < n; ++r) out.perm[size_t(ia[size_t(r)])] = ib[size_t(r)];
    return out;
}

AssocEval evaluate_association(const Association& assoc,
                               const std::vector<AssocMpc>& set_a,
                               const std::vector<AssocMpc>& set_b) {
    AssocEval ev;
    for (size_t i = 0; i < assoc.perm.size(); ++i) {
        const int j = assoc.perm[i];
        if (j < 0) continue;
        const AssocMpc& a = set_a[i];
        const AssocMpc& b = set_b[size_t(j)];
        if (a.is_alien || b.is_alien) ++ev.n_alien;
        if (a.path_id != b.path_id && !(a.is_alien && b.is_alien))
            ++ev.n_errors;
    }
    ev.correct = ev.n_errors == 0;
    return ev;
}

} // namespace relloc
