#pragma once

// shared fixtures and numeric utilities for the unit tests

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "kinvar/kinematics.hpp"

namespace testing {

inline double rel_err(double got, double want) {
    const double scale = std::max({std::abs(got), std::abs(want), 1e-12});
    return std::abs(got - want) / scale;
}

// central finite difference of f at x[i]; f must be a pure function of x
inline double fd(const std::function<double(std::span<const double>)>& f,
                 std::vector<double> x, std::size_t i, double h = 1e-6) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    return (fp - fm) / (2.0 * step);
}

// planar two-link arm: hinge-z anchored root, hinge-z child, a site at the
// end of each link.  closed-form world positions:
//   tip0 = L0 * (cos t0, sin t0, 0)
//   tip1 = s0*L1 * (cos t0, sin t0, 0) + s1*L2 * (cos(t0+t1), sin(t0+t1), 0)
inline kinvar::kin::Model two_link(double L0 = 0.6, double L1 = 1.0, double L2 = 0.8) {
    using namespace kinvar::kin;
    Model m;
    m.name = "two_link";
    Segment root;
    root.name = "upper";
    root.parent = -1;
    root.offset = {0, 0, 0};
    root.joint.type = JointType::Hinge;
    root.joint.axis = 2;
    root.joint.lo[0] = -3.0;
    root.joint.hi[0] = 3.0;
    root.scale_index = 0;
    Segment fore;
    fore.name = "fore";
    fore.parent = 0;
    fore.offset = {L1, 0, 0};
    fore.joint.type = JointType::Hinge;
    fore.joint.axis = 2;
    fore.joint.lo[0] = -2.5;
    fore.joint.hi[0] = 2.5;
    fore.scale_index = 1;
    m.segments = {root, fore};
    m.sites.push_back({"elbow", 0, {L0, 0, 0}});
    m.sites.push_back({"tip", 1, {L2, 0, 0}});
    m.num_scales = 2;
    m.finalize();
    return m;
}

} // namespace testing
