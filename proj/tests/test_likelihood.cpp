#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "kinvar/likelihood.hpp"
#include "kinvar/tape.hpp"

#include "helpers.hpp"

using namespace kinvar;
using lik::Family;

TEST_CASE("family names round trip and reject junk") {
    for (const char* n : {"exponential", "half_cauchy", "half_normal"}) {
        const Family f = lik::family_from_string(n);
        CHECK(std::string(lik::family_name(f)) == n);
    }
    CHECK_THROWS_AS(lik::family_from_string("gaussian"), ParseError);
    CHECK_THROWS_AS(lik::family_from_string(""), ParseError);
}

TEST_CASE("log densities match their closed forms at pinned points") {
    // exponential: -ln s - e/s
    CHECK(lik::log_density<double>(Family::Exponential, 0.0, 1.0) == doctest::Approx(0.0).scale(1));
    CHECK(lik::log_density<double>(Family::Exponential, 2.0, 2.0) ==
          doctest::Approx(-std::log(2.0) - 1.0).epsilon(1e-14));
    // half-Cauchy at the origin: ln(2/pi) - ln s
    CHECK(lik::log_density<double>(Family::HalfCauchy, 0.0, 1.0) ==
          doctest::Approx(std::log(2.0 / kPi)).epsilon(1e-14));
    CHECK(lik::log_density<double>(Family::HalfCauchy, 3.0, 1.5) ==
          doctest::Approx(std::log(2.0 / kPi) - std::log(1.5) - std::log(1.0 + 4.0)).epsilon(1e-14));
    // half-normal at the origin: 0.5 ln(2/pi) - ln s
    CHECK(lik::log_density<double>(Family::HalfNormal, 0.0, 2.0) ==
          doctest::Approx(0.5 * std::log(2.0 / kPi) - std::log(2.0)).epsilon(1e-14));
    CHECK(lik::log_density<double>(Family::HalfNormal, 1.0, 1.0) ==
          doctest::Approx(0.5 * std::log(2.0 / kPi) - 0.5).epsilon(1e-14));
}

TEST_CASE("each family integrates to one over the half line") {
    // Simpson on [0, L] with L big enough for the light tails; the half-Cauchy
    // needs its known tail mass added analytically
    for (const Family f : {Family::Exponential, Family::HalfCauchy, Family::HalfNormal}) {
        for (const double sigma : {0.5, 1.0, 3.0}) {
            const double L = f == Family::HalfCauchy ? 2000.0 * sigma : 60.0 * sigma;
            const int n = 600001;
            const double h = L / (n - 1);
            double acc = 0;
            for (int i = 0; i < n; ++i) {
                const double x = i * h;
                const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
                acc += w * std::exp(lik::log_density<double>(f, x, sigma));
            }
            double integral = acc * h / 3.0;
            if (f == Family::HalfCauchy)
                integral += 1.0 - 2.0 / kPi * std::atan(L / sigma); // exact tail
            CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("sigma_from_raw is the softplus polynomial with a floor") {
    const double psi0[3] = {0.0, 0.0, 0.0};
    // softplus(0) = ln 2 per coefficient
    CHECK(lik::sigma_from_raw(psi0, 1.0) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(lik::sigma_from_raw(psi0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(lik::sigma_from_raw(psi0, 2.0) ==
          doctest::Approx(std::log(2.0) * (1.0 + 2.0 + 4.0)).epsilon(1e-14));
    // all coefficients squashed to ~0: the floor takes over
    const double tiny[3] = {-40.0, -40.0, -40.0};
    CHECK(lik::sigma_from_raw(tiny, 1.0) == lik::kSigmaFloor);
    // monotone in score when the linear coefficient is active
    const double psi1[3] = {0.5, 1.0, -40.0};
    CHECK(lik::sigma_from_raw(psi1, 2.0) > lik::sigma_from_raw(psi1, 1.0));
    CHECK(lik::sigma_from_raw(psi1, 1.0) > lik::sigma_from_raw(psi1, 0.0));
}

TEST_CASE("tape and double log densities agree with matching gradients") {
    for (const Family f : {Family::Exponential, Family::HalfCauchy, Family::HalfNormal}) {
        std::vector<double> x = {1.7, 2.3}; // eps, sigma
        auto eval = [&](std::span<const double> p) {
            return lik::log_density<double>(f, p[0], p[1]);
        };
        ad::Tape tape;
        const auto i0 = tape.inputs(x);
        const ad::Value ll = lik::log_density<ad::Value>(f, ad::Value{&tape, i0},
                                                         ad::Value{&tape, i0 + 1});
        CHECK(ll.v() == doctest::Approx(eval(x)).epsilon(1e-14));
        tape.backward(ll.id);
        for (std::size_t i = 0; i < 2; ++i) {
            const double got = tape.adjoint(i0 + static_cast<ad::Tape::id_t>(i));
            const double want = testing::fd(eval, x, i);
            CHECK(testing::rel_err(got, want) < 1e-7);
        }
    }
}
