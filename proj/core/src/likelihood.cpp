#include "kinvar/likelihood.hpp"

namespace kinvar::lik {

Family family_from_string(const std::string& s) {
    if (s == "exponential") return Family::Exponential;
    if (s == "half_cauchy") return Family::HalfCauchy;
    if (s == "half_normal") return Family::HalfNormal;
    throw ParseError("unknown likelihood family '" + s + "'");
}

const char* family_name(Family f) {
    switch (f) {
        case Family::Exponential: return "exponential";
        case Family::HalfCauchy: return "half_cauchy";
        case Family::HalfNormal: return "half_normal";
    }
    return "?";
}

double sigma_from_raw(std::span<const double> psi, double score) {
    const double s = softplus(psi[0]) + softplus(psi[1]) * score + softplus(psi[2]) * score * score;
    return s > kSigmaFloor ? s : kSigmaFloor;
}

} // namespace kinvar::lik
