#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include "relloc/association.hpp"
#include "relloc/rng.hpp"

using namespace relloc;

namespace {

AssocMpc mk(double tau, const Vec3& dir, uint64_t id = 0, bool alien = false) {
    return {tau, dir.normalized(), {}, id, alien};
}

double brute_force_cost(const std::vector<AssocMpc>& a,
                        const std::vector<AssocMpc>& b,
                        const AssocParams& p, double mu_a, double mu_b) {
    const int n = int(a.size());
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0;
        for (int i = 0; i < n; ++i) {
            const double v = association_cost(a[size_t(i)],
                                              b[size_t(perm[size_t(i)])], p,
                                              mu_a, mu_b);
            c += std::isfinite(v) ? v : 1e15;
        }
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

TEST_CASE("cost formula and gating") {
    AssocParams p;
    p.lambda_per_ns = 0.033;
    const AssocMpc a = mk(10.0, Vec3(1, 0, 0));
    CHECK(association_cost(a, a, p, 0.0, 0.0) == doctest::Approx(0.0));
    // 90 degrees exceeds the 30 degree gate
    CHECK(!std::isfinite(
        association_cost(a, mk(10.0, Vec3(0, 1, 0)), p, 0.0, 0.0)));
    // identical directions, centered delay mismatch 3 ns
    const AssocMpc b = mk(13.0, Vec3(1, 0, 0));
    CHECK(association_cost(a, b, p, 0.0, 0.0) ==
          doctest::Approx(0.009801).epsilon(1e-9));
    AssocParams bad;
    bad.angle_gate_deg = 0;
    CHECK_THROWS_AS(association_cost(a, b, bad, 0, 0), ConfigInvalid);
}

TEST_CASE("identity set associates identically with zero cost") {
    Rng rng(1);
    std::vector<AssocMpc> set;
    for (int i = 0; i < 5; ++i)
        set.push_back(mk(rng.uniform(0, 100), rng.unit_sphere(), uint64_t(i)));
    const Association assoc = associate(set, set, AssocParams{});
    for (int i = 0; i < 5; ++i) CHECK(assoc.perm[size_t(i)] == i);
    CHECK(assoc.total_cost == doctest::Approx(0.0));
    CHECK(assoc.rejected_a.empty());
}

TEST_CASE("Hungarian equals brute force on random instances") {
    Rng rng(2);
    AssocParams p;
    p.lambda_per_ns = 0.05;
    p.angle_gate_deg = 180.0; // no gating: pure assignment oracle
    p.rejection_cost = std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < 200; ++inst) {
        const int n = 2 + int(rng.uniform() * 6.0); // 2..7
        std::vector<AssocMpc> a, b;
        for (int i = 0; i < n; ++i) {
            a.push_back(mk(rng.uniform(0, 50), rng.unit_sphere()));
            b.push_back(mk(rng.uniform(0, 50), rng.unit_sphere()));
        }
        double mu_a = 0, mu_b = 0;
        for (const auto& x : a) mu_a += x.tau_ns / n;
        for (const auto& x : b) mu_b += x.tau_ns / n;
        const Association assoc = associate(a, b, p);
        CHECK(assoc.total_cost ==
              doctest::Approx(brute_force_cost(a, b, p, mu_a, mu_b))
                  .epsilon(1e-9));
    }
}

TEST_CASE("all-gated input rejects everything") {
    std::vector<AssocMpc> a = {mk(1, Vec3(1, 0, 0)), mk(2, Vec3(1, 0, 0))};
    std::vector<AssocMpc> b = {mk(1, Vec3(-1, 0, 0)), mk(2, Vec3(0, 0, -1))};
    const Association assoc = associate(a, b, AssocParams{});
    CHECK(assoc.rejected_a.size() == 2);
    CHECK(assoc.rejected_b.size() == 2);
    for (int v : assoc.perm) CHECK(v == -1);
    CHECK(assoc.total_cost == doctest::Approx(0.0));
}

TEST_CASE("delay-sort baseline") {
    std::vector<AssocMpc> a = {mk(1, Vec3(1, 0, 0)), mk(2, Vec3(1, 0, 0))};
    std::vector<AssocMpc> b = {mk(5, Vec3(1, 0, 0)), mk(4, Vec3(1, 0, 0))};
    const Association assoc = associate_by_delay_sort(a, b);
    CHECK(assoc.perm[0] == 1);
    CHECK(assoc.perm[1] == 0);
    const Association id = associate_by_delay_sort(a, a);
    CHECK(id.perm[0] == 0);
    CHECK(id.perm[1] == 1);
}

TEST_CASE("association symmetry: swapped inputs invert the permutation") {
    Rng rng(3);
    AssocParams p;
    p.angle_gate_deg = 180.0;
    p.lambda_per_ns = 0.05; // fixed: auto-lambda depends on which set is A
    p.rejection_cost = std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < 50; ++inst) {
        std::vector<AssocMpc> a, b;
        for (int i = 0; i < 5; ++i) {
            a.push_back(mk(rng.uniform(0, 30), rng.unit_sphere()));
            b.push_back(mk(rng.uniform(0, 30), rng.unit_sphere()));
        }
        const Association fwd = associate(a, b, p);
        const Association bwd = associate(b, a, p);
        CHECK(fwd.total_cost == doctest::Approx(bwd.total_cost).epsilon(1e-9));
        for (size_t i = 0; i < a.size(); ++i)
            if (fwd.perm[i] >= 0)
                CHECK(bwd.perm[size_t(fwd.perm[i])] == int(i));
    }
}

TEST_CASE("scale property: scaling deviations and 1/lambda together") {
    Rng rng(4);
    for (int inst = 0; inst < 30; ++inst) {
        std::vector<AssocMpc> a, b;
        for (int i = 0; i < 4; ++i) {
            a.push_back(mk(rng.uniform(0, 10), rng.unit_sphere()));
            b.push_back(mk(rng.uniform(0, 10), rng.unit_sphere()));
        }
        AssocParams p1;
        p1.angle_gate_deg = 180.0;
        p1.lambda_per_ns = 0.2;
        p1.rejection_cost = std::numeric_limits<double>::infinity();
        const double f = 4.0;
        std::vector<AssocMpc> a2 = a, b2 = b;
        for (auto& x : a2) x.tau_ns *= f;
        for (auto& x : b2) x.tau_ns *= f;
        AssocParams p2 = p1;
        p2.lambda_per_ns = p1.lambda_per_ns / f;
        const Association r1 = associate(a, b, p1);
        const Association r2 = associate(a2, b2, p2);
        CHECK(r1.perm == r2.perm);
    }
}

TEST_CASE("evaluation against ground-truth path ids") {
    std::vector<AssocMpc> a = {mk(1, Vec3(1, 0, 0), 10),
                               mk(2, Vec3(1, 0, 0), 11),
                               mk(3, Vec3(1, 0, 0), 12, true)};
    std::vector<AssocMpc> b = {mk(1, Vec3(1, 0, 0), 10),
                               mk(2, Vec3(1, 0, 0), 11),
                               mk(3, Vec3(1, 0, 0), 99, true)};
    Association id;
    id.perm = {0, 1, 2};
    const AssocEval ok = evaluate_association(id, a, b);
    CHECK(ok.correct);
    CHECK(ok.n_errors == 0); // alien-alien mismatch excluded
    CHECK(ok.n_alien == 1);

    Association swapped;
    swapped.perm = {1, 0, 2};
    const AssocEval bad = evaluate_association(swapped, a, b);
    CHECK(!bad.correct);
    CHECK(bad.n_errors == 2);
}

TEST_CASE("unequal sizes are rejected") {
    std::vector<AssocMpc> a = {mk(1, Vec3(1, 0, 0))};
    std::vector<AssocMpc> b;
    CHECK_THROWS_AS(associate(a, b, AssocParams{}), CountMismatch);
    CHECK_THROWS_AS(associate_by_delay_sort(a, b), CountMismatch);
}
