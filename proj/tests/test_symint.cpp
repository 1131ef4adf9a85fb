#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "symflow/bump.hpp"
#include "symflow/symint.hpp"

using namespace symflow;

namespace {

std::vector<NoisePath> representative_paths(std::size_t n) {
  return {sample_wiener({NoiseKind::wiener, 0.5, 1.0, n, 11}),
          sample_fbm({NoiseKind::fbm, 0.75, 1.0, n, 11}),
          sample_subfbm({NoiseKind::sub_fbm, 0.75, 1.0, n, 11}),
          deterministic_path([](double t) { return std::sin(t) + t; },
                             TimeGrid(1.0, n))};
}

Integrand sin_exp_integrand() {
  return {[](double y, double t) { return std::sin(y) * std::exp(t); },
          [](double y, double t) { return std::cos(y) * std::exp(t); },
          [](double y, double t) { return std::sin(y) * std::exp(t); },
          "sin(y)e^t"};
}

}  // namespace

TEST_CASE("constant weights telescope to the terminal value") {
  for (const NoisePath& mu : representative_paths(512)) {
    std::vector<double> ones(mu.values.size(), 1.0);
    const double sum = symmetric_sum(ones, mu);
    REQUIRE(std::abs(sum - mu.terminal()) <=
            1e-14 * std::max(1.0, std::abs(mu.terminal())));
  }
}

TEST_CASE("xi = mu telescopes to mu_T^2 / 2 for every kind and level") {
  for (std::size_t n : {256, 512, 1024}) {
    for (const NoisePath& mu : representative_paths(n)) {
      const double sum = symmetric_sum(mu.values, mu);
      const double want = 0.5 * mu.terminal() * mu.terminal();
      REQUIRE(std::abs(sum - want) <= 1e-13 * std::abs(want));
    }
  }
}

TEST_CASE("symmetric_sum is linear") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 256, 5});
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> xi(mu.values.size()), eta(mu.values.size());
  for (std::size_t k = 0; k < xi.size(); ++k) {
    xi[k] = unif(rng);
    eta[k] = unif(rng);
  }
  const double a = 1.7, b = -0.3;
  std::vector<double> combo(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) combo[k] = a * xi[k] + b * eta[k];
  const double lhs = symmetric_sum(combo, mu);
  const double rhs = a * symmetric_sum(xi, mu) + b * symmetric_sum(eta, mu);
  REQUIRE(std::abs(lhs - rhs) <=
          1e-13 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
}

TEST_CASE("symmetric_sum input validation") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 8, 5});
  std::vector<double> short_xi(4, 1.0);
  REQUIRE_THROWS_AS(symmetric_sum(short_xi, mu), PreconditionError);
  std::vector<double> bad(mu.values.size(), 1.0);
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(symmetric_sum(bad, mu), PreconditionError);
}

TEST_CASE("antiderivative closed forms") {
  SECTION("f = 1 gives F(z) = z exactly") {
    REQUIRE(antiderivative([](double, double) { return 1.0; }, 2.5, 0.0) ==
            Catch::Approx(2.5).margin(1e-14));
    REQUIRE(antiderivative([](double, double) { return 1.0; }, -2.5, 0.0) ==
            Catch::Approx(-2.5).margin(1e-14));
  }
  SECTION("f = y gives z^2/2 (Simpson exact on quadratics)") {
    for (double z : {-3.0, -0.7, 0.4, 1.9})
      REQUIRE(std::abs(antiderivative([](double y, double) { return y; }, z,
                                      0.0) -
                       0.5 * z * z) < 1e-12);
  }
  SECTION("f = sin(y)e^t against the closed form") {
    const double z = 1.3, t = 0.7;
    const double got =
        antiderivative([](double y, double v) { return std::sin(y) * std::exp(v); },
                       z, t);
    const double want = (1.0 - std::cos(z)) * std::exp(t);
    REQUIRE(std::abs(got - want) < 1e-9);
  }
  SECTION("non-finite integrand is reported") {
    REQUIRE_THROWS_AS(
        antiderivative([](double y, double) { return 1.0 / y; }, 1.0, 0.0),
        PreconditionError);
  }
}

TEST_CASE("d/dz of the antiderivative recovers the integrand") {
  const Integrand f = sin_exp_integrand();
  for (double z : {-1.5, -0.2, 0.8, 2.3}) {
    const double t = 0.4;
    const double fd = oracle::central_diff(
        [&](double zz) { return antiderivative(f, zz, t); }, z, 1e-5);
    REQUIRE(std::abs(fd - f.f(z, t)) <=
            1e-6 * std::max(1.0, std::abs(f.f(z, t))));
  }
}

TEST_CASE("chain_rule_rhs trivial integrands") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 256, 17});
  SECTION("f = 1: rhs is mu_T") {
    Integrand f{[](double, double) { return 1.0; },
                [](double, double) { return 0.0; },
                [](double, double) { return 0.0; }, "1"};
    REQUIRE(std::abs(chain_rule_rhs(f, mu) - mu.terminal()) < 1e-12);
  }
  SECTION("f = y: rhs is mu_T^2/2") {
    Integrand f{[](double y, double) { return y; },
                [](double, double) { return 1.0; },
                [](double, double) { return 0.0; }, "y"};
    REQUIRE(std::abs(chain_rule_rhs(f, mu) -
                     0.5 * mu.terminal() * mu.terminal()) < 1e-12);
  }
}

TEST_CASE("smooth-path chain rule: both sides agree at fine resolution") {
  const NoisePath mu = deterministic_path(
      [](double t) { return std::sin(t); }, TimeGrid(1.0, 4096));
  const Integrand f = sin_exp_integrand();
  const double lhs = symmetric_integral(f, mu);
  const double rhs = chain_rule_rhs(f, mu);
  REQUIRE(std::abs(lhs - rhs) < 1e-6);
}

TEST_CASE("f(y,t) = y^2 on a Wiener path matches the chain-rule form") {
  Integrand f{[](double y, double) { return y * y; },
              [](double y, double) { return 2.0 * y; },
              [](double, double) { return 0.0; }, "y^2"};
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 4096, 23});
  const double lhs = symmetric_integral(f, mu);
  const double rhs = chain_rule_rhs(f, mu);  // = mu_T^3 / 3
  REQUIRE(std::abs(rhs - std::pow(mu.terminal(), 3) / 3.0) < 1e-10);
  REQUIRE(std::abs(lhs - rhs) < 1e-2);
}

TEST_CASE("chain_rule_study: exact integrand stays at rounding level") {
  RefinementLadder ladder{{256, 512, 1024}, 3, NoiseKind::wiener, 0.5, 1.0,
                          nullptr};
  Integrand f{[](double y, double) { return y; },
              [](double, double) { return 1.0; },
              [](double, double) { return 0.0; }, "y"};
  const ChainRuleStudy study = chain_rule_study(f, ladder, 5);
  for (const auto& row : study.report.rows)
    REQUIRE(row.back() <= 1e-12);  // abs_error column
}

TEST_CASE("chain_rule_study: smooth path error at least halves per doubling") {
  RefinementLadder ladder{{256, 512, 1024, 2048}, 1, NoiseKind::deterministic,
                          0.5, 1.0, [](double t) { return std::sin(t); }};
  const ChainRuleStudy study = chain_rule_study(sin_exp_integrand(), ladder);
  std::vector<double> errors;
  for (const auto& row : study.report.rows) errors.push_back(row.back());
  REQUIRE(errors.size() == 4);
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    INFO("errors " << errors[i] << " -> " << errors[i + 1]);
    REQUIRE(errors[i] >= 1.4 * errors[i + 1]);
  }
}

TEST_CASE("chain_rule_study: fbm integrand converges for most seeds") {
  RefinementLadder ladder{{512, 1024, 2048}, 1, NoiseKind::fbm, 0.75, 1.0,
                          nullptr};
  Integrand f{[](double y, double) { return std::cos(y); },
              [](double y, double) { return -std::sin(y); },
              [](double, double) { return 0.0; }, "cos y"};
  const ChainRuleStudy study = chain_rule_study(f, ladder, 50, 1e-2);
  INFO("pass fraction " << study.final_pass_fraction);
  REQUIRE(study.final_pass_fraction >= 0.9);
}

TEST_CASE("fubini: separable families factor through both orderings") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 512, 29});
  auto psi = [](double x) { return smooth_bump(x / 2.0); };
  const double psi_mass =
      oracle::fine_simpson([&](double x) { return psi(x); }, -2.0, 2.0);

  // quadrature fine enough that the x-integral itself resolves to 1e-13,
  // so the factored closed form is comparable at the 1e-10 gate
  const XQuadSpec quad{10.0, 1024};

  SECTION("no (y, t) dependence") {
    ParamIntegrand f{[&](double, double, double x) { return psi(x); },
                     nullptr, nullptr, nullptr, nullptr, nullptr, "psi"};
    const FubiniResult res = fubini_check(f, mu, quad);
    REQUIRE(std::abs(res.lhs - res.rhs) < 1e-10);
    REQUIRE(std::abs(res.lhs - psi_mass * mu.terminal()) < 1e-10);
    REQUIRE_FALSE(res.truncation_warning);
  }
  SECTION("psi(x) * y") {
    ParamIntegrand f{[&](double y, double, double x) { return psi(x) * y; },
                     nullptr, nullptr, nullptr, nullptr, nullptr, "psi*y"};
    const FubiniResult res = fubini_check(f, mu, quad);
    REQUIRE(std::abs(res.lhs - res.rhs) < 1e-10);
    const double want = psi_mass * 0.5 * mu.terminal() * mu.terminal();
    REQUIRE(std::abs(res.lhs - want) < 1e-10);
  }
}

TEST_CASE("fubini: non-separable integrand agrees across orderings") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 2048, 31});
  ParamIntegrand f{
      [](double y, double t, double x) {
        return std::exp(-x * x) * std::sin(y + t);
      },
      [](double y, double t, double x) {
        return std::exp(-x * x) * std::cos(y + t);
      },
      [](double y, double t, double x) {
        return std::exp(-x * x) * std::cos(y + t);
      },
      [](double x) { return std::exp(-x * x); },
      [](double x) { return std::exp(-x * x); },
      [](double x) { return std::exp(-x * x); },
      "exp(-x^2) sin(y+t)"};
  const FubiniResult res = fubini_check(f, mu);
  REQUIRE(std::abs(res.lhs - res.rhs) <=
          1e-6 * std::max(std::abs(res.lhs), 1.0));
  REQUIRE_FALSE(res.truncation_warning);
}

TEST_CASE("fubini: slow spatial decay raises the truncation warning") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 64, 3});
  ParamIntegrand f{[](double y, double, double x) {
                     return std::cos(y) / (1.0 + x * x);
                   },
                   nullptr, nullptr, nullptr, nullptr, nullptr, "slow decay"};
  const FubiniResult res = fubini_check(f, mu);
  REQUIRE(res.truncation_warning);
}

TEST_CASE("fubini: violating the dominating bound is a precondition error") {
  const NoisePath mu = sample_wiener({NoiseKind::wiener, 0.5, 1.0, 64, 3});
  ParamIntegrand f{
      [](double, double, double x) { return std::exp(-x * x); }, nullptr,
      nullptr, [](double x) { return 0.5 * std::exp(-x * x); },  // too small
      nullptr, nullptr, "bad hint"};
  REQUIRE_THROWS_AS(fubini_check(f, mu), PreconditionError);
}

TEST_CASE("integrand audit flags inconsistent partials") {
  Integrand good = sin_exp_integrand();
  REQUIRE_NOTHROW(audit_integrand(good, -2.0, 2.0, 0.0, 1.0));
  Integrand bad = good;
  bad.f_y = [](double y, double t) { return std::cos(y) * std::exp(t) + 0.5; };
  REQUIRE_THROWS_AS(audit_integrand(bad, -2.0, 2.0, 0.0, 1.0),
                    PreconditionError);
}

TEST_CASE("refinement ladder validation") {
  RefinementLadder bad{{256, 512}, 1, NoiseKind::wiener, 0.5, 1.0, nullptr};
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  RefinementLadder nond{{256, 512, 768}, 1, NoiseKind::wiener, 0.5, 1.0,
                        nullptr};
  REQUIRE_THROWS_AS(nond.validate(), ConfigError);
}

TEST_CASE("downstream: symmetric integral of 1 against a linear path is T") {
  const NoisePath mu =
      deterministic_path([](double t) { return t; }, TimeGrid(2.0, 64));
  std::vector<double> ones(mu.values.size(), 1.0);
  REQUIRE(symmetric_sum(ones, mu) == Catch::Approx(2.0).margin(1e-13));
}
