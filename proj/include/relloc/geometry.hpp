#pragma once
#include <Eigen/Dense>
#include "relloc/errors.hpp"

// Exact propagation geometry: the virtual-source triangle and the identities
// relating delay differences, arrival directions, and the relative position.
// Units: meters for positions, nanoseconds for delays, c in m/ns.

namespace relloc {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 0.299792458; // m/ns

// One multipath component seen by both nodes: true delays and unit arrival
// directions at A and B, plus the generating virtual source.
struct MpcGeometry {
    double tau_a_ns = 0;
    double tau_b_ns = 0;
    Vec3 dir_a = Vec3::Zero();
    Vec3 dir_b = Vec3::Zero();
    Vec3 virtual_source = Vec3::Zero();

    double c_delta_m() const { return kSpeedOfLight * (tau_b_ns - tau_a_ns); }
};

inline void require_unit(const Vec3& v) {
    if (std::abs(v.norm() - 1.0) > 1e-6)
        throw NonUnitDirection("direction norm deviates from 1 by > 1e-6");
}

inline MpcGeometry mpc_pair_from_virtual_source(const Vec3& source,
                                                const Vec3& pos_a,
                                                const Vec3& pos_b) {
    const double ra = (pos_a - source).norm();
    const double rb = (pos_b - source).norm();
    if (ra < 1e-9 || rb < 1e-9)
        throw DegenerateGeometry("virtual source coincides with a node");
    MpcGeometry m;
    m.virtual_source = source;
    m.tau_a_ns = ra / kSpeedOfLight;
    m.tau_b_ns = rb / kSpeedOfLight;
    m.dir_a = (pos_a - source) / ra;
    m.dir_b = (pos_b - source) / rb;
    return m;
}

// Vector equality: d = c tau_b e_b - c tau_a e_a.
inline Vec3 relpos_from_single_mpc(const MpcGeometry& m) {
    require_unit(m.dir_a);
    require_unit(m.dir_b);
    return kSpeedOfLight * (m.tau_b_ns * m.dir_b - m.tau_a_ns * m.dir_a);
}

enum class ProjectionMode { Exact, PWA };

// Exact: (e_a + e_b)^T d - c*delta * (1 + e_a^T e_b); zero for consistent
// geometry. PWA drops e_b: e_a^T d - c*delta.
inline double projection_residual(const MpcGeometry& m, const Vec3& d,
                                  ProjectionMode mode) {
    require_unit(m.dir_a);
    if (mode == ProjectionMode::PWA)
        return m.dir_a.dot(d) - m.c_delta_m();
    require_unit(m.dir_b);
    return (m.dir_a + m.dir_b).dot(d) -
           m.c_delta_m() * (1.0 + m.dir_a.dot(m.dir_b));
}

// s = (e_a + e_b) / (1 + e_a^T e_b); satisfies s^T d = c*delta.
inline Vec3 s_vector(const Vec3& dir_a, const Vec3& dir_b) {
    const double denom = 1.0 + dir_a.dot(dir_b);
    if (denom <= 1e-9)
        throw AntipodalDirections("1 + e_a^T e_b <= 1e-9");
    return (dir_a + dir_b) / denom;
}

} // namespace relloc
