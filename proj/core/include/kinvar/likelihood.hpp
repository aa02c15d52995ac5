#pragma once

// Score-conditioned radial error model.  A detection's radial reprojection
// error eps = |y - yhat| gets a scale sigma(psi, score) from a softplus
// polynomial in the score, then a log-density from one of three heavy-to-
// light tailed families.

#include <span>
#include <string>

#include "kinvar/math.hpp"
#include "kinvar/scalar_ops.hpp"

namespace kinvar::lik {

enum class Family { Exponential, HalfCauchy, HalfNormal };

Family family_from_string(const std::string& s);
const char* family_name(Family f);

inline constexpr int kPsiSize = 3;
inline constexpr double kSigmaFloor = 1e-3;

// sigma(psi, s) = max(softplus(psi0) + softplus(psi1)*s + softplus(psi2)*s^2, floor)
double sigma_from_raw(std::span<const double> psi, double score);

namespace detail {
inline const double kLn2OverPi = std::log(2.0 / kPi);        // half-Cauchy normalizer
inline const double kHalfLn2OverPi = 0.5 * std::log(2.0 / kPi); // half-normal normalizer
}

// log p(eps | sigma) for eps >= 0; one definition serves the double and the
// tape path.
template <class S>
S log_density(Family f, S eps, S sigma) {
    using std::log;
    const S lns = log(sigma);
    switch (f) {
        case Family::Exponential: {
            // -ln sigma - eps/sigma
            return lin2s(lns, eps / sigma, -1.0, -1.0, 0.0);
        }
        case Family::HalfCauchy: {
            // ln(2/pi) - ln sigma - ln(1 + (eps/sigma)^2)
            const S q = square(eps / sigma);
            const S l1 = log(lin1s(q, 1.0, 1.0));
            return lin2s(lns, l1, -1.0, -1.0, detail::kLn2OverPi);
        }
        case Family::HalfNormal: {
            // 0.5 ln(2/pi) - ln sigma - eps^2 / (2 sigma^2)
            const S q = square(eps / sigma);
            return lin2s(lns, q, -1.0, -0.5, detail::kHalfLn2OverPi);
        }
    }
    return lin2s(lns, lns, 0.0, 0.0, 0.0); // unreachable
}

} // namespace kinvar::lik
