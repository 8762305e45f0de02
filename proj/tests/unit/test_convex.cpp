#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "svi/convex.hpp"
#include "svi/errors.hpp"

using namespace svi;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

// Brute-force Moreau envelope on a uniform 1-d grid: returns (value, argmin).
std::pair<double, double> grid_envelope(const ConvexPotential& p, int n, double x, double lo,
                                        double hi, double h) {
  double best = kInf, arg = lo;
  const auto steps = static_cast<long>(std::llround((hi - lo) / h));
  for (long i = 0; i <= steps; ++i) {
    const double xp = lo + static_cast<double>(i) * h;
    const double psi = evaluate(p, v1(xp));
    if (!std::isfinite(psi)) continue;
    const double v = 0.5 * n * (xp - x) * (xp - x) + psi;
    if (v < best) {
      best = v;
      arg = xp;
    }
  }
  return {best, arg};
}

std::vector<ConvexPotential> catalog_1d() {
  return {ConvexPotential::box(0.0, 1.0),        ConvexPotential::box(-2.0, 0.5),
          ConvexPotential::half_line(0.0, Side::above), ConvexPotential::half_line(-0.5, Side::above),
          ConvexPotential::half_line(0.7, Side::below), ConvexPotential::abs_value(1.0),
          ConvexPotential::abs_value(0.3)};
}

}  // namespace

TEST(Evaluate, Examples) {
  const auto box = ConvexPotential::box(0.0, 1.0);
  EXPECT_EQ(evaluate(box, v1(0.5)), 0.0);
  EXPECT_EQ(evaluate(box, v1(2.0)), kInf);
  EXPECT_EQ(evaluate(ConvexPotential::abs_value(1.0), v1(-3.0)), 3.0);
}

TEST(Evaluate, DimensionMismatchIsUsageError) {
  EXPECT_THROW(evaluate(ConvexPotential::box(0.0, 1.0), Vec::Zero(2)), UsageError);
  EXPECT_THROW(prox(ConvexPotential::abs_value(1.0, 3), 1.0, Vec::Zero(2)), UsageError);
}

TEST(Constructors, RejectDomainsWithoutZero) {
  EXPECT_THROW(ConvexPotential::box(0.5, 1.0), UsageError);
  EXPECT_THROW(ConvexPotential::box(-1.0, -0.1), UsageError);
  EXPECT_THROW(ConvexPotential::box(0.0, 0.0), UsageError);
  EXPECT_THROW(ConvexPotential::half_line(0.3, Side::above), UsageError);
  EXPECT_THROW(ConvexPotential::half_line(-0.3, Side::below), UsageError);
  EXPECT_THROW(ConvexPotential::abs_value(0.0), UsageError);
  EXPECT_THROW(ConvexPotential::abs_value(-1.0), UsageError);
  EXPECT_THROW(ConvexPotential::composite({ConvexPotential::abs_value(1.0, 2)}), UsageError);
  EXPECT_NO_THROW(ConvexPotential::half_line(-0.3, Side::above));
  EXPECT_NO_THROW(ConvexPotential::half_line(0.3, Side::below));
}

TEST(Constructors, NormalizedAtZero) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 3.0);
  auto pots = catalog_1d();
  pots.push_back(ConvexPotential::composite(
      {ConvexPotential::box(-1.0, 2.0), ConvexPotential::abs_value(2.0)}));
  for (const auto& p : pots) {
    EXPECT_EQ(evaluate(p, Vec::Zero(static_cast<Eigen::Index>(p.dim()))), 0.0);
    for (int i = 0; i < 200; ++i) {
      Vec x(static_cast<Eigen::Index>(p.dim()));
      for (auto& c : x) c = g(rng);
      EXPECT_GE(evaluate(p, x), 0.0);
    }
  }
}

TEST(Convexity, SampledJensen) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0), t01(0.0, 1.0);
  for (const auto& p : catalog_1d()) {
    for (int i = 0; i < 500; ++i) {
      const double a = u(rng), b = u(rng), t = t01(rng);
      const double lhs = evaluate(p, v1(t * a + (1 - t) * b));
      const double fa = evaluate(p, v1(a)), fb = evaluate(p, v1(b));
      if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
      EXPECT_LE(lhs, t * fa + (1 - t) * fb + 1e-12);
    }
  }
}

TEST(Prox, Examples) {
  const auto box = ConvexPotential::box(0.0, 1.0);
  EXPECT_EQ(prox(box, 0.1, v1(2.0))[0], 1.0);
  EXPECT_EQ(prox(box, 7.0, v1(0.5))[0], 0.5);
  EXPECT_EQ(prox(ConvexPotential::abs_value(1.0), 0.5, v1(2.0))[0], 1.5);
  EXPECT_THROW(prox(box, 0.0, v1(0.5)), UsageError);
}

TEST(Prox, IndicatorProxIsLambdaIndependentProjection) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4.0, 4.0), lam(1e-4, 10.0);
  for (const auto& p : catalog_1d()) {
    if (!p.is_indicator()) continue;
    for (int i = 0; i < 200; ++i) {
      const Vec x = v1(u(rng));
      EXPECT_EQ(prox(p, lam(rng), x)[0], project(p, x)[0]);
    }
  }
  EXPECT_THROW(project(ConvexPotential::abs_value(1.0), v1(1.0)), UsageError);
}

TEST(Prox, MatchesGridMinimizer) {
  // argmin |x'-x|^2/(2 lambda) + psi(x') by brute force, lambda = 1/n.
  for (const auto& p : catalog_1d()) {
    for (double x : {-2.7, -0.4, 0.05, 0.9, 3.1}) {
      const auto [val, arg] = grid_envelope(p, 2, x, -5.0, 5.0, 1e-4);
      (void)val;
      EXPECT_NEAR(prox(p, 0.5, v1(x))[0], arg, 2e-4) << "x=" << x;
    }
  }
}

TEST(Prox, OneLipschitz) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0), lam(1e-3, 5.0);
  auto pots = catalog_1d();
  pots.push_back(ConvexPotential::composite(
      {ConvexPotential::half_line(0.0, Side::above), ConvexPotential::abs_value(0.5)}));
  for (const auto& p : pots) {
    const auto d = static_cast<Eigen::Index>(p.dim());
    for (int i = 0; i < 300; ++i) {
      Vec a(d), b(d);
      for (auto& c : a) c = u(rng);
      for (auto& c : b) c = u(rng);
      const double l = lam(rng);
      EXPECT_LE((prox(p, l, a) - prox(p, l, b)).norm(), (a - b).norm() + 1e-15);
    }
  }
}

TEST(Yosida, ValueExamples) {
  const YosidaApprox h(ConvexPotential::half_line(0.0, Side::above), 2);
  EXPECT_DOUBLE_EQ(yosida_value(h, v1(-1.0)), 1.0);
  EXPECT_EQ(yosida_value(h, v1(0.5)), 0.0);
  EXPECT_DOUBLE_EQ(yosida_value(YosidaApprox(ConvexPotential::abs_value(1.0), 1), v1(3.0)), 2.5);
  EXPECT_THROW(YosidaApprox(ConvexPotential::abs_value(1.0), 0), UsageError);
}

TEST(Yosida, AbsValueAgainstGridInfimum) {
  // Independent oracle: minimize the infimand over [-10, 10] at step 1e-6.
  const auto p = ConvexPotential::abs_value(1.0);
  const auto [val, arg] = grid_envelope(p, 1, 3.0, -10.0, 10.0, 1e-6);
  const YosidaApprox y(p, 1);
  EXPECT_NEAR(val, 2.5, 1e-9);
  EXPECT_NEAR(yosida_value(y, v1(3.0)), val, 1e-9);
  EXPECT_NEAR(resolvent(y, v1(3.0))[0], arg, 1e-6);
  EXPECT_DOUBLE_EQ(resolvent(y, v1(3.0))[0], 2.0);

  const double h = 1e-5;
  const double fd = (yosida_value(y, v1(3.0 + h)) - yosida_value(y, v1(3.0 - h))) / (2 * h);
  EXPECT_NEAR(fd, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(yosida_grad(y, v1(3.0))[0], 1.0);
}

TEST(Yosida, GradAndResolventExamples) {
  const YosidaApprox h(ConvexPotential::half_line(0.0, Side::above), 2);
  EXPECT_EQ(yosida_grad(h, v1(-1.0))[0], -2.0);
  const YosidaApprox b(ConvexPotential::box(0.0, 1.0), 5);
  EXPECT_EQ(resolvent(b, v1(-0.3))[0], 0.0);
  // Flat region of an indicator: identity resolvent and zero gradient.
  EXPECT_EQ(resolvent(b, v1(0.4))[0], 0.4);
  EXPECT_EQ(yosida_grad(b, v1(0.4))[0], 0.0);
}

TEST(Yosida, GradMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double h = 1e-5;
  for (const auto& p : catalog_1d()) {
    for (int n : {1, 3, 10}) {
      const YosidaApprox y(p, n);
      for (int i = 0; i < 100; ++i) {
        const double x = u(rng);
        const double g = yosida_grad(y, v1(x))[0];
        // Skip the measure-zero set where the second derivative jumps inside the stencil.
        const double j1 = resolvent(y, v1(x - h))[0], j2 = resolvent(y, v1(x + h))[0];
        const double s1 = (x - h - j1), s2 = (x + h - j2);
        if (std::abs((s2 - s1) - 2 * h) > 1e-12 && std::abs(s2 - s1) > 1e-12) continue;
        const double fd = (yosida_value(y, v1(x + h)) - yosida_value(y, v1(x - h))) / (2 * h);
        EXPECT_LE(std::abs(fd - g), 1e-6 * std::max(1.0, std::abs(g))) << "x=" << x << " n=" << n;
      }
    }
  }
}

TEST(Yosida, GradientIsNLipschitzAndEnvelopeFinite) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (const auto& p : catalog_1d()) {
    for (int n : {1, 4, 50}) {
      const YosidaApprox y(p, n);
      for (int i = 0; i < 200; ++i) {
        const double a = u(rng), b = u(rng);
        EXPECT_TRUE(std::isfinite(yosida_value(y, v1(a))));
        EXPECT_LE(std::abs(yosida_grad(y, v1(a))[0] - yosida_grad(y, v1(b))[0]),
                  n * std::abs(a - b) + 1e-12);
      }
    }
  }
}

TEST(Yosida, ResolventIdentity) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& p : catalog_1d()) {
    for (int n : {1, 2, 7, 128}) {
      const YosidaApprox y(p, n);
      for (int i = 0; i < 100; ++i) {
        const Vec x = v1(u(rng));
        EXPECT_NEAR((x - yosida_grad(y, x) / n)[0], resolvent(y, x)[0], 1e-12);
      }
    }
  }
}

TEST(Yosida, OrderingAndDecomposition) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& p : catalog_1d()) {
    for (int n : {1, 2, 9, 64}) {
      const YosidaApprox y(p, n);
      for (int i = 0; i < 100; ++i) {
        const Vec x = v1(u(rng));
        const Vec j = resolvent(y, x);
        const Vec g = yosida_grad(y, x);
        const double env = yosida_value(y, x);
        EXPECT_LE(evaluate(p, j), env + 1e-12);
        EXPECT_LE(env, evaluate(p, x) + 1e-12);
        EXPECT_NEAR(env, evaluate(p, j) + g.squaredNorm() / (2.0 * n), 1e-10);
        // The gradient is a subgradient at the resolvent.
        EXPECT_TRUE(subdiff_check(p, j, g, 64).member);
        if (p.is_indicator()) EXPECT_NEAR(env, yosida_value(y, j) + g.squaredNorm() / (2.0 * n), 1e-10);
      }
    }
  }
}

TEST(Yosida, EnvelopeAtResolventFormFailsOffIndicators) {
  // With psi^n(J_n x) in place of psi(J_n x) the decomposition breaks for |x|.
  const YosidaApprox y(ConvexPotential::abs_value(1.0), 1);
  const Vec x = v1(3.0);
  const Vec g = yosida_grad(y, x);
  EXPECT_DOUBLE_EQ(yosida_value(y, resolvent(y, x)) + g.squaredNorm() / 2.0, 2.0);
  EXPECT_DOUBLE_EQ(yosida_value(y, x), 2.5);
}

TEST(Yosida, CrossMonotonicity) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::uniform_int_distribution<int> idx(1, 200);
  for (const auto& p : catalog_1d()) {
    for (int i = 0; i < 300; ++i) {
      const int n = idx(rng), m = idx(rng);
      const YosidaApprox yn(p, n), ym(p, m);
      const double x = u(rng), xp = u(rng);
      const double gn = yosida_grad(yn, v1(x))[0], gm = yosida_grad(ym, v1(xp))[0];
      EXPECT_GE((x - xp) * (gn - gm), -(1.0 / n + 1.0 / m) * gn * gm - 1e-10);
    }
  }
}

TEST(Subdifferential, Examples) {
  const auto box = ConvexPotential::box(0.0, 1.0);
  const auto w0 = subdiff_check(box, v1(0.0), v1(-1.0), 16);
  EXPECT_EQ(w0.slack, 0.0);
  EXPECT_TRUE(w0.member);
  const auto w1 = subdiff_check(box, v1(0.5), v1(0.1), 16);
  EXPECT_GT(w1.slack, 0.0);
  EXPECT_FALSE(w1.member);
  EXPECT_TRUE(subdiff_check(ConvexPotential::abs_value(1.0), v1(0.0), v1(0.7), 64).member);
  EXPECT_THROW(subdiff_check(box, v1(2.0), v1(0.0), 16), DomainError);
}

TEST(Subdifferential, NormalConeFaces) {
  const auto box = ConvexPotential::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0));
  Vec x(2), z(2);
  x << 1.0, 0.2;
  z << 0.5, 0.0;
  EXPECT_TRUE(subdiff_check(box, x, z, 0).member);
  z << -0.5, 0.0;
  EXPECT_FALSE(subdiff_check(box, x, z, 0).member);
  z << 0.5, 0.1;
  EXPECT_FALSE(subdiff_check(box, x, z, 0).member);
}

TEST(Subdifferential, ProbeRouteAgreesWithExactSupportGap) {
  // Probe-based slack is a lower bound of the exact gap and detects non-members.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto abs2 = ConvexPotential::abs_value(Vec::Constant(2, 1.0));
  for (int i = 0; i < 200; ++i) {
    Vec x(2), z(2);
    x << u(rng), u(rng);
    z << u(rng), u(rng);
    const auto w = subdiff_check(abs2, x, z, 256);
    const double exact = support_gap(abs2, x, z);
    EXPECT_LE(w.slack, exact + 1e-12);
    EXPECT_EQ(w.member, exact <= kSubgradientTolerance);
  }
}

TEST(Subdifferential, MonotoneOnSampledPairs) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const auto& p : catalog_1d()) {
    for (int i = 0; i < 300; ++i) {
      const Vec a = project_to_domain(p, v1(u(rng))), b = project_to_domain(p, v1(u(rng)));
      EXPECT_GE((a - b).dot(subgradient(p, a) - subgradient(p, b)), 0.0);
    }
  }
}

TEST(Geometry, DistanceHelpers) {
  const auto h = ConvexPotential::half_line(-0.5, Side::above);
  EXPECT_DOUBLE_EQ(distance_to_domain(h, v1(-1.5)), 1.0);
  EXPECT_EQ(distance_to_domain(h, v1(2.0)), 0.0);
  EXPECT_DOUBLE_EQ(distance_to_boundary(h, v1(2.0)), 2.5);
  EXPECT_EQ(distance_to_boundary(ConvexPotential::abs_value(1.0), v1(2.0)), kInf);
  const auto c = ConvexPotential::composite(
      {ConvexPotential::half_line(0.0, Side::above), ConvexPotential::box(-1.0, 1.0)});
  Vec x(2);
  x << 3.0, 0.75;
  EXPECT_DOUBLE_EQ(distance_to_boundary(c, x), 0.25);
  EXPECT_TRUE(c.is_indicator());
}
