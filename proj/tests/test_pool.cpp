#include "rdmi/pool.hpp"

#include "rdmi/stats.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

using rdmi::Arm;
using rdmi::CompletedDataset;
using rdmi::PatientRecord;
using rdmi::TrialDataset;

namespace {

// 200 per arm, y0 balanced within arm, y3 rate constant across y0 strata:
// the covariate effect is exactly zero and the arm contrast is saturated.
void add_arm(TrialDataset& ds, CompletedDataset& cd, Arm arm, int ones_per_stratum) {
  for (int y0 = 0; y0 <= 1; ++y0)
    for (int i = 0; i < 100; ++i) {
      PatientRecord p;
      p.id = static_cast<long>(ds.patients.size());
      p.arm = arm;
      ds.patients.push_back(p);
      cd.y.push_back({y0, 0, 0, i < ones_per_stratum ? 1 : 0});
    }
}

struct Synthetic {
  TrialDataset ds;
  CompletedDataset cd;
};

Synthetic synthetic_trial(int active_ones, int control_ones, bool active_first = true) {
  Synthetic s;
  s.ds.n_per_arm = 200;
  if (active_first) {
    add_arm(s.ds, s.cd, Arm::active, active_ones);
    add_arm(s.ds, s.cd, Arm::control, control_ones);
  } else {
    add_arm(s.ds, s.cd, Arm::control, control_ones);
    add_arm(s.ds, s.cd, Arm::active, active_ones);
  }
  return s;
}

}  // namespace

TEST_CASE("analysis model recovers the saturated arm contrast") {
  const Synthetic s = synthetic_trial(45, 30);
  const auto res = rdmi::analyze(s.ds, s.cd);
  REQUIRE(res.ok);
  CHECK(res.estimate == doctest::Approx(0.6466271649250525).epsilon(1e-9));
  const double v = 1.0 / (200 * 0.30 * 0.70) + 1.0 / (200 * 0.45 * 0.55);
  CHECK(res.variance == doctest::Approx(v).epsilon(1e-7));
}

TEST_CASE("identical arms give a null contrast and relabeling flips the sign") {
  const Synthetic eq = synthetic_trial(30, 30);
  const auto req = rdmi::analyze(eq.ds, eq.cd);
  REQUIRE(req.ok);
  CHECK(std::fabs(req.estimate) < 1e-8);

  const Synthetic a = synthetic_trial(45, 30);
  const Synthetic b = synthetic_trial(30, 45);
  const auto ra = rdmi::analyze(a.ds, a.cd);
  const auto rb = rdmi::analyze(b.ds, b.cd);
  REQUIRE(ra.ok);
  REQUIRE(rb.ok);
  CHECK(ra.estimate == doctest::Approx(-rb.estimate).epsilon(1e-9));

  const Synthetic c = synthetic_trial(45, 30, false);
  const auto rc = rdmi::analyze(c.ds, c.cd);
  REQUIRE(rc.ok);
  CHECK(rc.estimate == doctest::Approx(ra.estimate).epsilon(1e-10));
}

TEST_CASE("rubin pooling matches the hand-computed M = 2 oracle") {
  const auto est = rdmi::rubin_pool({0.0, 1.0}, {1.0, 1.0});
  CHECK(est.m_used == 2);
  CHECK(est.point == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(est.within_var == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(est.between_var == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(est.total_var == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(est.df == doctest::Approx(49.0 / 9.0).epsilon(1e-12));
  const double q = 2.508729813802648;
  const double se = std::sqrt(1.75);
  CHECK(est.se == doctest::Approx(se).epsilon(1e-15));
  CHECK(est.ci_low == doctest::Approx(0.5 - q * se).epsilon(1e-10));
  CHECK(est.ci_high == doctest::Approx(0.5 + q * se).epsilon(1e-10));
  CHECK(est.p_value > 0.70);
  CHECK(est.p_value < 0.75);
}

TEST_CASE("zero between-imputation variance falls back to the normal interval") {
  const auto est = rdmi::rubin_pool({1.0, 1.0, 1.0}, {0.04, 0.04, 0.04});
  CHECK(est.between_var == 0.0);
  CHECK(std::isinf(est.df));
  CHECK(est.se == doctest::Approx(0.2).epsilon(1e-15));
  const double z = 1.959963984540054;
  CHECK(est.ci_low == doctest::Approx(1.0 - z * 0.2).epsilon(1e-12));
  CHECK(est.ci_high == doctest::Approx(1.0 + z * 0.2).epsilon(1e-12));
  CHECK(est.p_value == doctest::Approx(2.0 * rdmi::norm_sf(5.0)).epsilon(1e-9));
}

TEST_CASE("pooling is invariant to imputation order") {
  const std::vector<double> pts{0.2, -0.1, 0.5, 0.3, 0.05};
  const std::vector<double> vars{0.04, 0.05, 0.03, 0.045, 0.06};
  std::vector<double> pts2 = pts, vars2 = vars;
  std::reverse(pts2.begin(), pts2.end());
  std::reverse(vars2.begin(), vars2.end());
  const auto a = rdmi::rubin_pool(pts, vars);
  const auto b = rdmi::rubin_pool(pts2, vars2);
  CHECK(a.point == doctest::Approx(b.point).epsilon(1e-14));
  CHECK(a.total_var == doctest::Approx(b.total_var).epsilon(1e-12));
  CHECK(a.df == doctest::Approx(b.df).epsilon(1e-12));
  CHECK(a.p_value == doctest::Approx(b.p_value).epsilon(1e-12));
}

TEST_CASE("total variance dominates within variance and df shrinks with disagreement") {
  const auto tight = rdmi::rubin_pool({0.25, 0.75}, {1.0, 1.0});
  const auto wide = rdmi::rubin_pool({0.0, 1.0}, {1.0, 1.0});
  CHECK(tight.total_var >= tight.within_var);
  CHECK(wide.total_var >= wide.within_var);
  CHECK(tight.df > wide.df);
  CHECK(wide.total_var > tight.total_var);
}

TEST_CASE("pooling input validation") {
  CHECK_THROWS(rdmi::rubin_pool({1.0}, {1.0}));
  CHECK_THROWS(rdmi::rubin_pool({}, {}));
  CHECK_THROWS(rdmi::rubin_pool({1.0, 2.0}, {1.0}));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(rdmi::rubin_pool({1.0, nan}, {1.0, 1.0}));
  CHECK_THROWS(rdmi::rubin_pool({1.0, 2.0}, {1.0, nan}));
}

TEST_CASE("single fits use the normal Wald interval") {
  const auto est = rdmi::single_estimate(1.0, 0.04);
  CHECK(est.m_used == 1);
  CHECK(std::isinf(est.df));
  CHECK(est.between_var == 0.0);
  const double z = 1.959963984540054;
  CHECK(est.ci_low == doctest::Approx(1.0 - z * 0.2).epsilon(1e-12));
  CHECK(est.ci_high == doctest::Approx(1.0 + z * 0.2).epsilon(1e-12));
  CHECK(est.p_value == doctest::Approx(2.0 * rdmi::norm_sf(5.0)).epsilon(1e-9));
}
