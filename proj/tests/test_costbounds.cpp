#include "reflect/costbounds.hpp"

#include <cmath>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gtest/gtest.h>

namespace reflect {
namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

// 50-digit evaluation of ln C for the thick-set display:
// T^{-1/2} (K^d/g)^{Kd/2} exp(K |a|_1^2 ln^2(K^d/g) / (2T)).
Big oracle_thick_log(Big g, const std::vector<Big>& a, Big T, int d, Big K) {
  Big l1 = 0;
  for (const Big& x : a) l1 += x;
  const Big L = log(pow(K, d) / g);
  return -log(T) / 2 + K * d / 2 * L + K * l1 * l1 * L * L / (2 * T);
}

double rel(double x, const Big& y) {
  return static_cast<double>(abs((Big(x) - y) / y));
}

UniversalConstants consts(double K = 1.0, double D2 = 1.0, double D3 = 1.0) {
  UniversalConstants c;
  c.K = K;
  c.D[2] = D2;
  c.D[3] = D3;
  return c;
}

TEST(Thick, TrivialValue) {
  const BoundResult b = cost_bound_thick(1.0, std::vector<double>{1.0}, 1.0, 1, consts());
  EXPECT_EQ(b.value, 1.0);
  EXPECT_EQ(b.log_value, 0.0);
  EXPECT_FALSE(b.overflow);
  EXPECT_EQ(b.formula_tag, "thick");
}

TEST(Thick, HalfGammaOracle) {
  const BoundResult b = cost_bound_thick(0.5, std::vector<double>{1.0}, 1.0, 1, consts());
  const Big ln2 = log(Big(2));
  const Big expect = sqrt(Big(2)) * exp(ln2 * ln2 / 2);
  EXPECT_LT(rel(b.value, expect), 1e-12);
}

TEST(Thick, OracleGrid) {
  for (double g : {0.01, 0.3, 0.9})
    for (double T : {0.05, 1.0, 20.0})
      for (double K : {1.0, 3.0}) {
        const std::vector<double> a{0.5, 1.5, 2.0};
        const BoundResult b = cost_bound_thick(g, a, T, 3, consts(K));
        const Big o = oracle_thick_log(Big(g), {Big(0.5), Big(1.5), Big(2.0)}, Big(T), 3, Big(K));
        EXPECT_LT(rel(b.log_value, o), 1e-12) << g << " " << T << " " << K;
      }
}

TEST(Thick, DecreasingInGamma) {
  const std::vector<double> a{1.0, 1.0};
  EXPECT_GT(cost_bound_thick(0.1, a, 1.0, 2).value, cost_bound_thick(0.9, a, 1.0, 2).value);
}

TEST(Thick, MonotoneOnGrid) {
  const UniversalConstants c = consts(2.0);
  for (double T : {0.1, 1.0, 10.0}) {
    double prev = INFINITY;
    for (double g = 0.05; g <= 1.0; g += 0.05) {
      const double v = cost_bound_thick(g, std::vector<double>{1.0, 2.0}, T, 2, c).log_value;
      EXPECT_LT(v, prev);
      prev = v;
    }
    for (int j = 0; j < 2; ++j) {
      std::vector<double> a{1.0, 2.0};
      const double base = cost_bound_thick(0.3, a, T, 2, c).log_value;
      a[static_cast<std::size_t>(j)] += 0.1;
      EXPECT_GT(cost_bound_thick(0.3, a, T, 2, c).log_value, base);
    }
  }
}

TEST(Thick, DirectDomainAgrees) {
  for (double g : {0.2, 0.7})
    for (double T : {0.5, 2.0, 8.0}) {
      const double K = 1.5;
      const std::vector<double> a{0.4, 0.6};
      const int d = 2;
      const double L = std::log(std::pow(K, d) / g);
      const double direct = std::pow(T, -0.5) * std::pow(std::pow(K, d) / g, K * d / 2) *
                            std::exp(K * 1.0 * L * L / (2 * T));
      const BoundResult b = cost_bound_thick(g, a, T, d, consts(K));
      EXPECT_NEAR(b.value / direct, 1.0, 1e-12);
    }
}

TEST(Thick, LargeTimeExpFactorVanishes) {
  const std::vector<double> a{1e-2};
  for (double T : {1e3, 1e6}) {
    const BoundResult b = cost_bound_thick(0.9, a, T, 1, consts());
    const double prefactor = -0.5 * std::log(T) + 0.5 * std::log(1.0 / 0.9);
    EXPECT_LT(std::expm1(b.log_value - prefactor), 1e-9);
  }
}

TEST(Thick, SmallTimeDiverges) {
  const std::vector<double> a{1.0};
  double prev = 0.0;
  for (double T : {1e-1, 1e-3, 1e-6, 1e-9}) {
    const BoundResult b = cost_bound_thick(0.5, a, T, 1);
    EXPECT_GT(b.log_value, prev);
    prev = b.log_value;
  }
  EXPECT_TRUE(cost_bound_thick(0.01, a, 1e-9, 1).overflow);
  EXPECT_TRUE(std::isinf(cost_bound_thick(0.01, a, 1e-9, 1).value));
  EXPECT_TRUE(std::isfinite(cost_bound_thick(0.01, a, 1e-9, 1).log_value));
}

TEST(Thick, Validation) {
  const std::vector<double> a{1.0};
  EXPECT_THROW(cost_bound_thick(0.0, a, 1.0, 1), InvalidArgument);
  EXPECT_THROW(cost_bound_thick(1.1, a, 1.0, 1), InvalidArgument);
  EXPECT_THROW(cost_bound_thick(0.5, a, 0.0, 1), InvalidArgument);
  EXPECT_THROW(cost_bound_thick(0.5, std::vector<double>{-1.0}, 1.0, 1), InvalidArgument);
  EXPECT_THROW(cost_bound_thick(0.5, std::vector<double>{1.0, 1.0}, 1.0, 1), InvalidArgument);
  // K^d / gamma < 1 leaves the formula's regime.
  EXPECT_THROW(cost_bound_thick(0.9, a, 1.0, 1, consts(0.5)), DomainError);
}

TEST(Domain, HalfspaceOracle) {
  const BoundResult b = cost_bound_domain({DomainKind::halfspace}, 1.0, std::vector<double>{1.0}, 1.0);
  const Big ln2 = log(Big(2));
  EXPECT_LT(rel(b.value, sqrt(Big(2)) * exp(4 * ln2 * ln2 / 2)), 1e-12);
}

TEST(Domain, HalfspaceDisplayedFormula) {
  // (2K^d/g)^{Kd/2} exp(K (2a1 + a2 + ...)^2 ln^2(2K^d/g) / (2T)) / sqrt(T)
  const double K = 2.0, g = 0.4, T = 0.7;
  const std::vector<double> a{0.3, 0.5, 0.2};
  const int d = 3;
  const Big L = log(2 * pow(Big(K), d) / Big(g));
  const Big w = 2 * Big(0.3) + Big(0.5) + Big(0.2);
  const Big o = -log(Big(T)) / 2 + Big(K) * d / 2 * L + Big(K) * w * w * L * L / (2 * Big(T));
  EXPECT_LT(rel(cost_bound_domain({DomainKind::halfspace}, g, a, T, consts(K)).log_value, o), 1e-12);
}

TEST(Domain, OrthantDisplayedFormula) {
  // ((2K)^d/g)^{Kd/2} exp(4K |a|_1^2 ln^2((2K)^d/g) / (2T)) / sqrt(T)
  const double K = 1.3, g = 0.25, T = 2.0;
  const std::vector<double> a{1.0, 0.5};
  const Big L = log(pow(2 * Big(K), 2) / Big(g));
  const Big o = -log(Big(T)) / 2 + Big(K) * L + 4 * Big(K) * Big(1.5) * Big(1.5) * L * L / (2 * Big(T));
  EXPECT_LT(rel(cost_bound_domain({DomainKind::orthant}, g, a, T, consts(K)).log_value, o), 1e-12);
}

TEST(Domain, OrthantLargeTimeLimit) {
  const std::vector<double> a{1.0, 1.0};
  const double T = 1e12;
  const BoundResult b = cost_bound_domain({DomainKind::orthant}, 1.0, a, T);
  EXPECT_NEAR(b.value * std::sqrt(T), 4.0, 1e-9);
}

TEST(Domain, SectorTwoIsOrthantOfSectorParams) {
  const std::vector<double> a{0.7, 1.2};
  const ThicknessParams sp = sector_params(ThicknessParams(0.3, a));
  for (double T : {0.3, 3.0}) {
    const BoundResult s = cost_bound_domain({DomainKind::sector, 2}, 0.3, a, T, consts(1.7));
    const BoundResult o = cost_bound_domain({DomainKind::orthant}, sp.gamma, sp.a, T, consts(1.7));
    EXPECT_NEAR(s.log_value, o.log_value, 1e-12 * std::abs(o.log_value));
  }
}

TEST(Domain, SectorDisplayedFormula) {
  // (2^{3n-4} K^2 / g~)^K exp(2^{3n-4} K |a~|_1^2 ln^2(2^{3n-4} K^2/g~) / (2T)) / sqrt(T)
  const double K = 1.2, g = 0.5, T = 4.0;
  const std::vector<double> a{1.0, 0.5};
  const Big r2 = Big(1.0) + Big(0.25);
  const Big gt = Big(g) * Big(1.0) * Big(0.5) / (4 * r2);
  const Big at = 4 * sqrt(r2);
  for (int n : {2, 3, 4, 5}) {
    const Big f = pow(Big(2), 3 * n - 4);
    const Big L = log(f * Big(K) * Big(K) / gt);
    const Big o = -log(Big(T)) / 2 + Big(K) * L + f * Big(K) * at * at * L * L / (2 * Big(T));
    const BoundResult b = cost_bound_domain({DomainKind::sector, n}, g, a, T, consts(K));
    EXPECT_LT(rel(b.log_value, o), 1e-12) << n;
  }
}

TEST(Domain, TriangleAndPrism) {
  const std::vector<double> a2{0.2, 0.3};
  const std::vector<double> a3{0.2, 0.3, 0.4};
  const ThicknessParams p2 = sector_params(ThicknessParams(0.5, a2));
  const ThicknessParams p3 = sector_params(ThicknessParams(0.5, a3));
  EXPECT_DOUBLE_EQ(cost_bound_domain({DomainKind::triangle}, 0.5, a2, 1.0).log_value,
                   cost_bound_thick(p2.gamma, p2.a, 1.0, 2).log_value);
  EXPECT_DOUBLE_EQ(cost_bound_domain({DomainKind::prism}, 0.5, a3, 1.0).log_value,
                   cost_bound_thick(p3.gamma, p3.a, 1.0, 3).log_value);
  EXPECT_THROW(cost_bound_domain({DomainKind::triangle}, 0.5, a3, 1.0), InvalidArgument);
  EXPECT_THROW(cost_bound_domain({DomainKind::prism}, 0.5, a2, 1.0), InvalidArgument);
  EXPECT_THROW(cost_bound_domain({DomainKind::sector, 1}, 0.5, a2, 1.0), InvalidArgument);
  EXPECT_THROW(cost_bound_domain({DomainKind::sector, 2}, 0.5, a3, 1.0), InvalidArgument);
  EXPECT_THROW(cost_bound_domain({DomainKind::triangle, 2, 0.5}, 0.5, a2, 1.0), InvalidArgument);
  EXPECT_NO_THROW(cost_bound_domain({DomainKind::triangle, 2, 2.0}, 0.5, a2, 1.0));
}

TEST(Fractional, ThetaOneIsThick) {
  const std::vector<double> a{0.5, 1.0};
  for (double g : {0.1, 0.6})
    EXPECT_EQ(cost_bound_fractional(g, a, 0.8, 2, 1.0).log_value, cost_bound_thick(g, a, 0.8, 2).log_value);
}

TEST(Fractional, UnitGammaIgnoresAandTheta) {
  const double T = 0.25;
  for (double th : {0.6, 0.75, 2.0}) {
    const BoundResult b = cost_bound_fractional(1.0, std::vector<double>{3.0}, T, 1, th, consts(1.0));
    EXPECT_NEAR(b.value, 1.0 / std::sqrt(T), 1e-15);
  }
}

TEST(Fractional, Oracle) {
  const BoundResult b = cost_bound_fractional(0.5, std::vector<double>{1.0}, 1.0, 1, 0.75);
  const Big L = log(Big(2));
  const Big o = L / 2 + pow(L, 3) / 2;  // exponent 2 theta/(2 theta - 1) = 3
  EXPECT_LT(rel(b.log_value, o), 1e-12);
  EXPECT_THROW(cost_bound_fractional(0.5, std::vector<double>{1.0}, 1.0, 1, 0.5), InvalidArgument);
}

TEST(Equidistributed, Oracle) {
  const BoundResult b = cost_bound_equidistributed(1.0, 0.25, 1.0, {}, 2, consts());
  const Big l4 = log(Big(4));
  EXPECT_LT(rel(b.value, 4 * exp(l4 * l4 / 2)), 1e-12);
}

TEST(Equidistributed, OracleWithPotential) {
  const double G = 2.0, delta = 0.3, T = 0.6, D = 1.7;
  const PotentialNorms v{2.5, 0.5};
  const BoundResult b = cost_bound_equidistributed(G, delta, T, v, 2, consts(1.0, D));
  const Big r = log(Big(delta) / Big(G));
  const Big o = -Big(D) * (1 + pow(Big(G), Big(4) / 3) * pow(Big(2.5), Big(2) / 3)) * r + log(Big(D)) -
                log(Big(T)) / 2 + Big(D) * Big(G) * Big(G) * r * r / (2 * Big(T)) + Big(0.5) * Big(T);
  EXPECT_LT(rel(b.log_value, o), 1e-12);
}

TEST(Equidistributed, NegativePartFactor) {
  const double T = 1.7;
  const BoundResult with = cost_bound_equidistributed(1.0, 0.2, T, {1.0, 1.0}, 2);
  const BoundResult without = cost_bound_equidistributed(1.0, 0.2, T, {1.0, 0.0}, 2);
  EXPECT_NEAR(with.log_value - without.log_value, T, 1e-13);
}

TEST(Equidistributed, DecreasingInDelta) {
  double prev = INFINITY;
  for (double delta = 0.05; delta < 0.5; delta += 0.05) {
    const double v = cost_bound_equidistributed(1.0, delta, 1.0, {}, 2).log_value;
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_THROW(cost_bound_equidistributed(1.0, 0.5, 1.0, {}, 2), InvalidArgument);
  EXPECT_THROW(cost_bound_equidistributed(1.0, 0.2, 1.0, {1.0, 2.0}, 2), InvalidArgument);
}

TEST(EquidistributedDomain, Scales) {
  const BoundResult s = cost_bound_equidistributed_domain({DomainKind::sector, 2}, 1.0, 0.2, 1.0, {});
  EXPECT_EQ(s.input("G_eff"), 4.0);
  const BoundResult s3 = cost_bound_equidistributed_domain({DomainKind::sector, 3}, 1.0, 0.2, 1.0, {});
  EXPECT_EQ(s3.input("G_eff"), 16.0);
  const BoundResult t = cost_bound_equidistributed_domain({DomainKind::triangle}, 1.0, 0.2, 1.0, {});
  EXPECT_EQ(t.input("G_eff"), 2.0);
  EXPECT_THROW(cost_bound_equidistributed_domain({DomainKind::orthant}, 1.0, 0.2, 1.0, {}), InvalidArgument);
  EXPECT_THROW(cost_bound_equidistributed_domain({DomainKind::triangle, 2, 1.5}, 1.0, 0.2, 1.0, {}),
               InvalidArgument);
}

TEST(EquidistributedDomain, CodePathsAgree) {
  const UniversalConstants c = consts(1.0, 2.0, 3.0);
  const PotentialNorms v{0.5, 0.1};
  const BoundResult s = cost_bound_equidistributed_domain({DomainKind::sector, 2}, 1.0, 0.2, 0.9, v, c);
  const BoundResult t = cost_bound_equidistributed_domain({DomainKind::prism}, 1.0, 0.2, 0.9, v, c);
  // Sector uses D(2); triangle and prism use R = max(D(2), D(3)).
  EXPECT_DOUBLE_EQ(s.log_value, cost_bound_equidistributed(4.0, 0.2, 0.9, v, 2, c).log_value);
  UniversalConstants r = c;
  r.D[2] = c.R();
  EXPECT_DOUBLE_EQ(t.log_value, cost_bound_equidistributed(2.0, 0.2, 0.9, v, 2, r).log_value);
  EXPECT_EQ(t.input("D"), 3.0);
}

}  // namespace
}  // namespace reflect
