#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "svi/paths.hpp"
#include "svi/stats.hpp"

using namespace svi;

namespace {

SamplePath path_from(std::initializer_list<double> vals) {
  SamplePath p(MeshGrid(1.0, vals.size() - 1), 1);
  std::size_t k = 0;
  for (double v : vals) p.values(static_cast<Eigen::Index>(k++), 0) = v;
  return p;
}

}  // namespace

TEST(MeshGrid, TimesAreUniformAndEndAtHorizon) {
  const MeshGrid g(0.3, 7);
  EXPECT_EQ(g.time(0), 0.0);
  EXPECT_EQ(g.time(7), 0.3);
  for (std::size_t k = 1; k <= 7; ++k) EXPECT_GT(g.time(k), g.time(k - 1));
  EXPECT_DOUBLE_EQ(g.dt(), 0.3 / 7);
  EXPECT_THROW(MeshGrid(0.0, 4), UsageError);
  EXPECT_THROW(MeshGrid(1.0, 0), UsageError);
  EXPECT_THROW(g.time(8), UsageError);
}

TEST(RunningMax, Examples) {
  EXPECT_EQ(running_max(path_from({1, 3, 2}), 2), 3.0);
  const auto inc = path_from({-1, 0, 0.5, 2, 7});
  for (std::size_t k = 0; k <= 4; ++k) EXPECT_EQ(running_max(inc, k), inc.values(static_cast<Eigen::Index>(k), 0));
  const auto c = path_from({4.5, 4.5, 4.5});
  EXPECT_EQ(running_max(c, 2), 4.5);
  EXPECT_THROW(running_max(c, 3), UsageError);
  EXPECT_THROW(running_max(SamplePath(MeshGrid(1, 2), 2), 1), UsageError);
}

TEST(SupNorm, Examples) {
  EXPECT_EQ(sup_norm(path_from({0, -2, 1}), 2), 2.0);
  EXPECT_EQ(sup_norm(SamplePath(MeshGrid(1.0, 5), 3), 5), 0.0);
  SamplePath p(MeshGrid(1.0, 3), 2);
  p.values.row(1) << 3.0, 4.0;
  EXPECT_GE(sup_norm(p, 2), 5.0);
  EXPECT_THROW(sup_norm(p, 4), UsageError);
}

TEST(PathFunctionals, MonotoneInKAndMatchDirectEvaluation) {
  const MeshGrid g(1.0, 200);
  const auto inc = generate_increments(g, 1, SeedSpec{9}, 0, DriverTag::W);
  SamplePath p(g, 1);
  for (std::size_t k = 0; k < 200; ++k)
    p.values(static_cast<Eigen::Index>(k + 1), 0) = p.values(static_cast<Eigen::Index>(k), 0) + inc.values(static_cast<Eigen::Index>(k), 0);
  const auto f = PathFunctionals::complete(p);
  for (std::size_t k = 0; k <= 200; ++k) {
    EXPECT_EQ(f.running_max(k, 0), running_max(p, k));
    EXPECT_EQ(f.sup_norm(k), sup_norm(p, k));
    EXPECT_EQ(PathView(p, k, &f).running_max(), PathView(p, k).running_max());
    if (k > 0) {
      EXPECT_GE(running_max(p, k), running_max(p, k - 1));
      EXPECT_GE(sup_norm(p, k), sup_norm(p, k - 1));
    }
  }
  EXPECT_THROW(PathView(p, 10).at(11), UsageError);
}

TEST(Increments, DeterministicPerSubstream) {
  const MeshGrid g(1.0, 4);
  const SeedSpec s{12345};
  const auto a = generate_increments(g, 1, s, 3, DriverTag::W);
  const auto b = generate_increments(g, 1, s, 3, DriverTag::W);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, generate_increments(g, 1, s, 4, DriverTag::W).values);
  EXPECT_NE(a.values, generate_increments(g, 1, s, 3, DriverTag::B).values);
  EXPECT_NE(a.values, generate_increments(g, 1, SeedSpec{12346}, 3, DriverTag::W).values);
  EXPECT_THROW(generate_increments(g, 0, s, 0, DriverTag::W), UsageError);
}

TEST(Increments, MeanAndVarianceOfMillionDraws) {
  const double dt = 0.01;
  const MeshGrid g(dt * 1'000'000, 1'000'000);
  const auto inc = generate_increments(g, 1, SeedSpec{77}, 0, DriverTag::W);
  const std::vector<double> v(inc.values.data(), inc.values.data() + inc.values.size());
  const McStats s = mc_stats(v);
  EXPECT_LE(std::abs(s.mean), 4.0 * std::sqrt(dt / 1e6));
  const double var = s.std_error * s.std_error * 1e6;
  EXPECT_NEAR(var, dt, 0.01 * dt);
}

TEST(Increments, RefinementCouplingIsExact) {
  for (std::uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
    const MeshGrid fine(1.0, 512);
    const auto f = generate_increments(fine, 2, SeedSpec{seed}, seed % 7, DriverTag::B);
    const auto c2 = coarsen(f, 2);
    ASSERT_EQ(c2.steps(), 256u);
    for (Eigen::Index k = 0; k < 256; ++k)
      for (Eigen::Index j = 0; j < 2; ++j)
        EXPECT_EQ(c2.values(k, j), f.values(2 * k, j) + f.values(2 * k + 1, j));
    EXPECT_EQ(coarsen(f, 8).values, coarsen(coarsen(c2, 2), 2).values);
    EXPECT_EQ(coarsen(f, 8).grid, MeshGrid(1.0, 64));
  }
  const auto f = generate_increments(MeshGrid(1.0, 12), 1, SeedSpec{1}, 0, DriverTag::W);
  EXPECT_THROW(coarsen(f, 3), UsageError);
  EXPECT_THROW(coarsen(f, 8), UsageError);
}

TEST(ComposeDriver, DegenerateCorrelations) {
  const MeshGrid g(1.0, 64);
  const auto w = generate_increments(g, 1, SeedSpec{5}, 0, DriverTag::W);
  const auto b = generate_increments(g, 1, SeedSpec{5}, 0, DriverTag::B);
  EXPECT_EQ(compose_driver(w, b, CorrelationSpec(0.0)).values, w.values);
  EXPECT_EQ(compose_driver(w, b, CorrelationSpec(1.0)).values, b.values);
  EXPECT_THROW(CorrelationSpec(1.5), UsageError);
  const auto other = generate_increments(MeshGrid(1.0, 32), 1, SeedSpec{5}, 0, DriverTag::B);
  EXPECT_THROW(compose_driver(w, other, CorrelationSpec(0.5)), UsageError);
}

TEST(ComposeDriver, CovarianceWithBAtHalfCorrelation) {
  // Monte-Carlo estimate of Cov(W^_T, B_T) over 1e5 paths, T = 1.
  const MeshGrid g(1.0, 1);
  const CorrelationSpec rho(0.5);
  const std::size_t n = 100'000;
  std::vector<double> prod(n), wh(n), bt(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = generate_increments(g, 1, SeedSpec{21}, i, DriverTag::W);
    const auto b = generate_increments(g, 1, SeedSpec{21}, i, DriverTag::B);
    wh[i] = compose_driver(w, b, rho).values(0, 0);
    bt[i] = b.values(0, 0);
  }
  const double mw = pairwise_sum(wh) / n, mb = pairwise_sum(bt) / n;
  for (std::size_t i = 0; i < n; ++i) prod[i] = (wh[i] - mw) * (bt[i] - mb);
  const McStats s = mc_stats(prod);
  EXPECT_NEAR(s.mean, 0.5, 3.0 * s.std_error);
}

TEST(ComposeDriver, UnitVariancePerStep) {
  const double dt = 1e-3;
  const MeshGrid g(dt * 1'000'000, 1'000'000);
  const auto w = generate_increments(g, 1, SeedSpec{8}, 0, DriverTag::W);
  const auto b = generate_increments(g, 1, SeedSpec{8}, 0, DriverTag::B);
  const auto c = compose_driver(w, b, CorrelationSpec(-0.6));
  const std::vector<double> v(c.values.data(), c.values.data() + c.values.size());
  const McStats s = mc_stats(v);
  EXPECT_NEAR(s.std_error * s.std_error * 1e6, dt, 0.01 * dt);
}

TEST(Csv, ColumnsAndRoundTripValues) {
  SamplePath x(MeshGrid(1.0, 2), 2);
  x.values << 0.0, 1.0, 0.1, 1.5, 0.25, -3.0;
  std::ostringstream out;
  write_csv(out, x);
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,x_1,x_2");
  EXPECT_NE(s.find("0.5,0.1,1.5\n"), std::string::npos);
  EXPECT_NE(s.find("1,0.25,-3\n"), std::string::npos);

  std::ostringstream one;
  write_csv(one, path_from({0.0, 2.0}), "phi");
  EXPECT_EQ(one.str(), "t,phi\n0,0\n1,2\n");
}
