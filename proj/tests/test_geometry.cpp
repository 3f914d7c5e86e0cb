#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "relloc/geometry.hpp"
#include "relloc/rng.hpp"

using namespace relloc;

TEST_CASE("triangle construction from a virtual source") {
    const Vec3 src(-3, 0, 0), a(0, 0, 0), b(0, 1, 0);
    const MpcGeometry m = mpc_pair_from_virtual_source(src, a, b);
    CHECK(m.tau_a_ns == doctest::Approx(3.0 / kSpeedOfLight));
    CHECK(m.tau_b_ns == doctest::Approx(std::sqrt(10.0) / kSpeedOfLight));
    CHECK(m.dir_a.isApprox(Vec3(1, 0, 0)));
    CHECK((relpos_from_single_mpc(m) - (b - a)).norm() < 1e-12);

    const Vec3 s = s_vector(m.dir_a, m.dir_b);
    CHECK(s.x() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.y() == doctest::Approx(0.162277).epsilon(1e-4));
    CHECK(s.z() == doctest::Approx(0.0));
    CHECK(s.dot(b - a) == doctest::Approx(m.c_delta_m()).epsilon(1e-12));
}

TEST_CASE("degenerate and invalid inputs throw") {
    CHECK_THROWS_AS(
        mpc_pair_from_virtual_source(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, 0, 0)),
        DegenerateGeometry);
    CHECK_THROWS_AS(s_vector(Vec3(1, 0, 0), Vec3(-1, 0, 0)),
                    AntipodalDirections);
    MpcGeometry bad;
    bad.dir_a = Vec3(1, 1, 0); // not unit
    bad.dir_b = Vec3(1, 0, 0);
    CHECK_THROWS_AS(relpos_from_single_mpc(bad), NonUnitDirection);
}

TEST_CASE("random triangles satisfy the core identities") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        const Vec3 a = Vec3::Zero();
        Vec3 b;
        do {
            b = 5.0 * rng.unit_sphere() * rng.uniform(0.1, 1.0);
        } while (b.norm() < 1e-3);
        const Vec3 src = 20.0 * rng.unit_sphere() * rng.uniform(0.05, 1.0);
        MpcGeometry m;
        try {
            m = mpc_pair_from_virtual_source(src, a, b);
        } catch (const DegenerateGeometry&) {
            continue;
        }
        const double d = (b - a).norm();
        // |c delta| <= d
        CHECK(std::abs(m.c_delta_m()) <= d + 1e-9);
        // vector equality
        CHECK((relpos_from_single_mpc(m) - (b - a)).norm() < 1e-9);
        // projection equality
        CHECK(std::abs(projection_residual(m, b - a, ProjectionMode::Exact)) <
              1e-9);
        // s-vector equality unless nearly antipodal
        if (1.0 + m.dir_a.dot(m.dir_b) > 1e-6) {
            const Vec3 s = s_vector(m.dir_a, m.dir_b);
            CHECK(std::abs(s.dot(b - a) - m.c_delta_m()) < 1e-9);
        }
    }
}

TEST_CASE("PWA projection equals exact when directions coincide") {
    MpcGeometry m;
    m.dir_a = m.dir_b = Vec3(0, 0, 1);
    m.tau_a_ns = 10;
    m.tau_b_ns = 12;
    const Vec3 d(0.1, 0.2, 0.3);
    CHECK(projection_residual(m, d, ProjectionMode::PWA) ==
          doctest::Approx(projection_residual(m, d, ProjectionMode::Exact) / 2.0));
}
