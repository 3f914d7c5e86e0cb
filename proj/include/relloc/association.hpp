#pragma once
#include <cstdint>
#include <optional>
#include <vector>
#include "relloc/geometry.hpp"

// MPC association between the A-side and B-side sets of one observer:
// direction-plus-centered-delay assignment cost, optimal matching (Hungarian),
// angle gating with rejection, a delay-sort baseline, and scoring against
// ground-truth path identities.

namespace relloc {

struct AssocMpc {
    double tau_ns = 0; // measured delay
    Vec3 dir = Vec3::Zero();
    std::optional<Vec3> obs_dir; // direction of the observer, if measured
    uint64_t path_id = 0;
    bool is_alien = false;
};

enum class MuMode { MeanDelay, KnownOffset };

struct AssocParams {
    double lambda_per_ns = 0; // <= 0: estimate as 1 / sample spread of set A
    double angle_gate_deg = 30.0;
    MuMode mu_mode = MuMode::MeanDelay;
    double eps_a_ns = 0; // KnownOffset mode
    double eps_b_ns = 0;
    bool use_observer_directions = false;
    // OSPA-style cutoff: pairs with cost >= rejection_cost are left
    // unassociated. <= 0 derives the cutoff from the angle gate,
    // ||e_b - e_a||^2 at the gate angle; +inf disables cost-based rejection
    // (only gated pairs with no alternative are rejected).
    double rejection_cost = 0;

    void validate() const;
};

struct Association {
    std::vector<int> perm; // A-index -> B-index; -1 when rejected
    std::vector<int> rejected_a;
    std::vector<int> rejected_b;
    double total_cost = 0; // over non-rejected pairs
};

// J(k,l) = ||dir_b - dir_a||^2 + lambda^2 * |centered delay mismatch|^2,
// infinite when the direction angle exceeds the gate; mu are the centering
// values for the two sides.
double association_cost(const AssocMpc& a, const AssocMpc& b,
                        const AssocParams& params, double mu_a_ns,
                        double mu_b_ns);

Association associate(const std::vector<AssocMpc>& set_a,
                      const std::vector<AssocMpc>& set_b,
                      const AssocParams& params);

Association associate_by_delay_sort(const std::vector<AssocMpc>& set_a,
                                    const std::vector<AssocMpc>& set_b);

struct AssocEval {
    bool correct = true;
    int n_errors = 0; // pairs with mismatched path ids, alien-alien excluded
    int n_alien = 0;  // pairs involving at least one alien MPC
};

AssocEval evaluate_association(const Association& assoc,
                               const std::vector<AssocMpc>& set_a,
                               const std::vector<AssocMpc>& set_b);

} // namespace relloc
