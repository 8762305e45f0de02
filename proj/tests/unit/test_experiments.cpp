#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "svi/experiments.hpp"
#include "svi/stats.hpp"

using namespace svi;

TEST(McStats, Examples) {
  const std::vector<double> ones{1, 1, 1, 1};
  const auto a = mc_stats(ones);
  EXPECT_EQ(a.mean, 1.0);
  EXPECT_EQ(a.std_error, 0.0);
  const std::vector<double> two{0, 2};
  const auto b = mc_stats(two);
  EXPECT_EQ(b.mean, 1.0);
  EXPECT_DOUBLE_EQ(b.std_error, 1.0);
  EXPECT_DOUBLE_EQ(b.ci_lo, 1.0 - 1.96);
  EXPECT_DOUBLE_EQ(b.ci_hi, 1.0 + 1.96);
  const std::vector<double> single{3.0};
  EXPECT_THROW(mc_stats(single), UsageError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> draws(1'000'000);
  for (auto& d : draws) d = n(rng);
  EXPECT_LE(std::abs(mc_stats(draws).mean), 4e-3);
}

TEST(FitRate, Examples) {
  const std::vector<double> h{1, 0.5, 0.25};
  const std::vector<double> lin{3.0, 1.5, 0.75};
  const auto f = fit_rate(h, lin);
  ASSERT_TRUE(f);
  EXPECT_NEAR(f->slope, 1.0, 1e-12);
  EXPECT_NEAR(f->r2, 1.0, 1e-12);
  const std::vector<double> flat{2.0, 2.0, 2.0};
  EXPECT_NEAR(fit_rate(h, flat)->slope, 0.0, 1e-12);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  std::vector<double> axis, err;
  for (int k = 0; k < 8; ++k) {
    axis.push_back(std::ldexp(1.0, -k));
    err.push_back(0.7 * std::sqrt(axis.back()) * (1.0 + noise(rng)));
  }
  EXPECT_NEAR(fit_rate(axis, err)->slope, 0.5, 0.05);
}

TEST(FitRate, NonpositiveErrorsExcluded) {
  const std::vector<double> h{1, 0.5, 0.25, 0.125};
  const std::vector<double> e{0.0, 1.0, 0.5, -1.0};
  const auto f = fit_rate(h, e);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->points, 2u);
  const std::vector<double> z{0.0, 0.0, 1.0, 0.0};
  EXPECT_FALSE(fit_rate(h, z));
}

TEST(PairwiseSum, FixedOrder) {
  std::vector<double> v;
  for (int i = 0; i < 1001; ++i) v.push_back(1.0 / (1 + i));
  EXPECT_EQ(pairwise_sum(v), pairwise_sum(v));
  EXPECT_NEAR(pairwise_sum(v), std::accumulate(v.begin(), v.end(), 0.0), 1e-12);
}

TEST(ParallelMap, OrderAndExceptions) {
  const auto out = parallel_map(100, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(out[i], i * i);
  EXPECT_THROW(parallel_map(50, 3,
                            [](std::size_t i) -> int {
                              if (i == 17) throw NumericalError("boom", 3);
                              return 0;
                            }),
               NumericalError);
}

TEST(Trend, NoiseAllowance) {
  ExperimentReport r;
  r.errors = {McStats{1.0, 0.1}, McStats{1.2, 0.1}};
  EXPECT_TRUE(check_trend(r, Trend::nonincreasing));  // 1.2 <= 1 + 2 sqrt(0.02)
  EXPECT_FALSE(check_trend(r, Trend::strictly_decreasing));
  r.errors = {McStats{1.0, 0.01}, McStats{0.5, 0.01}};
  EXPECT_TRUE(check_trend(r, Trend::strictly_decreasing));
  r.errors = {McStats{1.0, 0.01}, McStats{1.5, 0.01}};
  EXPECT_FALSE(check_trend(r, Trend::nonincreasing));
}

TEST(Cauchy, DeterministicModelHasZeroErrorAndNoRate) {
  const auto m = make_toy_monotone({.linear = 0.0, .cubic = 0.0, .sigma = 0.0});
  const auto r = cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {8, 16, 32}, {50, 1, 1});
  for (const auto& e : r.errors) EXPECT_EQ(e.mean, 0.0);
  EXPECT_FALSE(r.rate);
}

TEST(Cauchy, RejectsNonDyadicLevels) {
  const auto m = make_reflected_bm();
  EXPECT_THROW(cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {64, 96}, {10}), UsageError);
  EXPECT_THROW(cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {64, 256}, {10}), UsageError);
  EXPECT_THROW(cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {}, {10}), UsageError);
}

TEST(Cauchy, ReflectedBmDecreasesAndToyRate) {
  const auto rbm = cauchy_refinement(make_reflected_bm(), SchemeChoice::prox_step(), 1.0,
                                     {64, 128, 256, 512}, {2000, 3, 1});
  EXPECT_TRUE(check_trend(rbm, Trend::strictly_decreasing));
  ASSERT_TRUE(rbm.rate);
  EXPECT_GT(rbm.rate->slope, 0.0);

  const auto toy = make_toy_monotone({.linear = 1.0, .cubic = 0.0, .sigma = 0.3, .bound = 1e6});
  const auto lip = cauchy_refinement(toy, SchemeChoice::prox_step(), 1.0, {64, 128, 256, 512}, {2000, 4, 1});
  ASSERT_TRUE(lip.rate);
  EXPECT_GE(lip.rate->slope, 0.4);
}

TEST(Cauchy, CouplingChecksumMatchesRegeneratedDrivers) {
  const auto m = make_reflected_bm();
  const ExperimentOptions opt{20, 77, 1};
  const auto r = cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {16, 32}, opt);
  std::vector<std::uint64_t> sums;
  for (std::size_t i = 0; i < 20; ++i) sums.push_back(make_drivers(m.x, MeshGrid(1.0, 64), SeedSpec{77}, i).checksum());
  EXPECT_EQ(r.driver_checksum, detail::combine_checksums(sums));
}

TEST(YosidaSweep, Preconditions) {
  const MeshGrid g(1.0, 64);
  EXPECT_THROW(yosida_sweep(make_reflected_bm(2), {4, 16}, g, {10}), UsageError);
  EXPECT_THROW(yosida_sweep(make_reflected_bm(), {16, 4}, g, {10}), UsageError);
  EXPECT_THROW(yosida_sweep(make_reflected_bm(), {}, g, {10}), UsageError);
}

TEST(YosidaSweep, ReflectedBmNonincreasing) {
  const auto r = yosida_sweep(make_reflected_bm(), {4, 16, 64, 256}, MeshGrid(1.0, 1024), {2000, 5, 1});
  EXPECT_TRUE(check_trend(r, Trend::nonincreasing));
  ASSERT_TRUE(r.rate);
  EXPECT_LT(r.rate->slope, 0.0);  // fitted against n
}

TEST(YosidaSweep, RegularizationExactOffTheKink) {
  // |x| with the state far from 0: grad psi^n = sign(x) = the prox step's shift.
  const auto base = make_toy_monotone({.linear = 0.0, .cubic = 0.0, .sigma = 0.1, .x0 = 2.0});
  SviModel m = base;
  m.psi1 = ConvexPotential::abs_value(1.0);
  const auto r = yosida_sweep(m, {4, 16, 64, 256}, MeshGrid(1.0, 256), {200, 6, 1});
  for (const auto& e : r.errors) EXPECT_LT(e.mean, 1e-12);
}

TEST(YosidaSweep, ExplicitPenaltyDoesNotReachZeroAtLargeN) {
  // n dt = 16: the explicit gradient step overshoots the barrier, so the gap
  // to the prox reference stays away from 0 and exceeds its value at n dt = 1.
  const auto r = yosida_sweep(make_reflected_bm(), {1024, 16384}, MeshGrid(1.0, 1024), {1000, 7, 1});
  EXPECT_GT(r.errors[1].mean, 0.0);
  EXPECT_TRUE(std::isfinite(r.errors[1].mean));
  EXPECT_GT(r.errors[1].mean, r.errors[0].mean);
}

TEST(Perturbation, ConvergesPointwiseOnProbeGrid) {
  const auto m = make_toy_monotone();
  PerturbationSpec spec;
  spec.mode = PerturbationSpec::Mode::diffusion_scale;
  const MeshGrid g(1.0, 1);
  for (double eps : {0.1, 0.01, 0.001}) {
    const auto c = perturb(m.x, spec, eps);
    for (int i = 0; i <= 40; ++i) {
      const SamplePath p = SamplePath::constant(g, Vec::Constant(1, -2.0 + 0.1 * i));
      const PathView v(p, 0);
      EXPECT_LE(std::abs(c.sigma1(0, v)(0, 0) - m.x.sigma1(0, v)(0, 0)), 0.3 * eps + 1e-15);
      EXPECT_EQ(c.drift(0, v), m.x.drift(0, v));
    }
  }
  spec.mode = PerturbationSpec::Mode::drift_shift;
  spec.shift = 2.0;
  const SamplePath p = SamplePath::constant(g, Vec::Constant(1, 0.5));
  EXPECT_DOUBLE_EQ(perturb(m.x, spec, 0.05).drift(0, PathView(p, 0))[0], m.x.drift(0, PathView(p, 0))[0] + 0.1);
}

TEST(Perturbation, ZeroEpsilonRowIsExactlyZero) {
  const auto m = make_toy_monotone();
  PerturbationSpec spec;
  spec.epsilons = {0.1, 0.0};
  const auto r = perturbation_sweep(m, spec, SchemeChoice::prox_step(), MeshGrid(1.0, 64),
                                    ControlProcess::constant(1.0), {100, 8, 1});
  EXPECT_EQ(r.x_sq.errors[1].mean, 0.0);
  EXPECT_EQ(r.x_abs.errors[1].std_error, 0.0);
  EXPECT_EQ(r.y_sq->errors[1].mean, 0.0);
  EXPECT_EQ(r.y_exceed->errors[1].mean, 0.0);
  EXPECT_GT(r.x_sq.errors[0].mean, 0.0);
}

TEST(Perturbation, LargeEtaHasNoExceedances) {
  const auto m = make_toy_monotone();
  PerturbationSpec spec;
  spec.epsilons = {0.1, 0.05};
  const auto r = perturbation_sweep(m, spec, SchemeChoice::prox_step(), MeshGrid(1.0, 64),
                                    ControlProcess::constant(1.0), {100, 9, 1}, 10.0);
  for (const auto& e : r.y_exceed->errors) EXPECT_EQ(e.mean, 0.0);
}

TEST(Perturbation, DriftShiftRespondsLinearly) {
  const auto m = make_toy_monotone();
  PerturbationSpec spec;
  spec.epsilons = {0.1, 0.05, 0.025};
  const auto r = perturbation_sweep(m, spec, SchemeChoice::prox_step(), MeshGrid(1.0, 256),
                                    ControlProcess::constant(1.0), {1000, 10, 1});
  EXPECT_TRUE(check_trend(r.x_sq, Trend::strictly_decreasing));
  EXPECT_TRUE(check_trend(*r.y_sq, Trend::strictly_decreasing));
  ASSERT_TRUE(r.x_abs.rate);
  EXPECT_NEAR(r.x_abs.rate->slope, 1.0, 0.2);
}

TEST(Perturbation, RejectsPerturbationsFailingProbes) {
  const auto m = make_toy_monotone();
  PerturbationSpec spec;
  spec.mode = PerturbationSpec::Mode::custom;
  spec.epsilons = {0.1};
  spec.custom = [](const XCoefficients& base, double eps) {
    XCoefficients c = base;
    c.drift = [b = base.drift, eps](double t, const PathView& x) -> Vec {
      return b(t, x) + 100.0 * eps * x.current();
    };
    return c;
  };
  try {
    perturbation_sweep(m, spec, SchemeChoice::prox_step(), MeshGrid(1.0, 16), ControlProcess::constant(1.0), {10});
    FAIL() << "expected ProbeRejected";
  } catch (const ProbeRejected& e) {
    bool failed = false;
    for (const auto& o : e.outcomes()) failed = failed || !o.report.pass;
    EXPECT_TRUE(failed);
  }
  spec.mode = PerturbationSpec::Mode::drift_shift;
  spec.epsilons = {0.1, 0.1};
  EXPECT_THROW(perturbation_sweep(m, spec, SchemeChoice::prox_step(), MeshGrid(1.0, 16),
                                  ControlProcess::constant(1.0), {10}),
               UsageError);
}

TEST(Determinism, ReportsIndependentOfWorkerCount) {
  const auto m = make_reflected_bm();
  const auto a = cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {32, 64}, {300, 11, 1});
  const auto b = cauchy_refinement(m, SchemeChoice::prox_step(), 1.0, {32, 64}, {300, 11, 4});
  for (std::size_t i = 0; i < a.errors.size(); ++i) {
    EXPECT_EQ(a.errors[i].mean, b.errors[i].mean);
    EXPECT_EQ(a.errors[i].std_error, b.errors[i].std_error);
  }
  EXPECT_EQ(a.driver_checksum, b.driver_checksum);
}
