#include "rdmi/impute.hpp"

#include "rdmi/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using rdmi::Arm;
using rdmi::MiModel;
using rdmi::PatientRecord;
using rdmi::TrialDataset;

namespace {

std::vector<std::array<int, 4>> completed_seed(const TrialDataset& ds) {
  std::vector<std::array<int, 4>> y(ds.patients.size());
  for (std::size_t i = 0; i < ds.patients.size(); ++i) {
    y[i] = ds.patients[i].y_policy;
    for (std::size_t v = 0; v < 4; ++v)
      if (!ds.patients[i].observed[v]) y[i][v] = -1;
  }
  return y;
}

// All-active dataset: n_fit fully observed patients with mixed outcomes and
// n_imp patients discontinued at visit 1 and withdrawn (only y0 observed).
TrialDataset hand_dataset(int n_fit, int n_imp) {
  TrialDataset ds;
  ds.n_per_arm = n_fit + n_imp;
  ds.replicate = 0;
  ds.master_seed = 42;
  ds.spec_hash = 777;
  for (int i = 0; i < n_fit; ++i) {
    PatientRecord p;
    p.id = i;
    p.arm = Arm::active;
    const int y0 = i % 2;
    p.y_on = {y0, (i % 10) < (y0 ? 6 : 4) ? 1 : 0, (i % 10) < 5 ? 1 : 0,
              (i % 10) < (y0 ? 7 : 3) ? 1 : 0};
    p.y_off = {0, 0, 0};
    p.y_policy = p.y_on;
    ds.patients.push_back(p);
  }
  for (int i = 0; i < n_imp; ++i) {
    PatientRecord p;
    p.id = n_fit + i;
    p.arm = Arm::active;
    p.y_on = {1, 0, 0, 0};
    p.y_off = {0, 0, 0};
    p.ie_time = 1;
    p.y_policy = {1, 0, 0, 0};
    p.observed = {true, false, false, false};
    ds.patients.push_back(p);
  }
  return ds;
}

}  // namespace

TEST_CASE("model names round-trip") {
  for (MiModel m : rdmi::kAllModels) CHECK(rdmi::parse_model(rdmi::model_name(m)) == m);
  CHECK(rdmi::parse_model("cics") == MiModel::cics);
  CHECK(rdmi::parse_model("Pooled_Oics") == MiModel::pooled_oics);
  CHECK_THROWS(rdmi::parse_model("OLS"));
}

TEST_CASE("design columns follow the model equations") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w50"), 0);
  const auto y = completed_seed(ds);
  using Cols = std::vector<std::string>;

  CHECK(rdmi::build_design(MiModel::cics, ds, y, 1, 1).columns == Cols{"intercept", "y0"});
  CHECK(rdmi::build_design(MiModel::cics, ds, y, 3, 2).columns ==
        Cols{"intercept", "y0", "y1", "y2"});
  CHECK(rdmi::build_design(MiModel::oics, ds, y, 2, 1).columns ==
        Cols{"intercept", "d", "y0", "y1"});
  CHECK(rdmi::build_design(MiModel::pooled_oics, ds, y, 1, 3).columns ==
        Cols{"intercept", "d", "y0"});
  CHECK(rdmi::build_design(MiModel::oits, ds, y, 3, 1).columns ==
        Cols{"intercept", "tsd", "d", "y0", "y1", "y2"});
  CHECK(rdmi::build_design(MiModel::pics, ds, y, 2, 1).columns ==
        Cols{"intercept", "p1", "p2", "y0", "y1"});
  CHECK(rdmi::build_design(MiModel::pics, ds, y, 3, 2).columns ==
        Cols{"intercept", "p1", "p2", "p3", "y0", "y1", "y2"});

  // Time since discontinuation is identically zero at visit 1, so it drops.
  CHECK(rdmi::build_design(MiModel::oits, ds, y, 1, 1).columns == Cols{"intercept", "d", "y0"});

  CHECK_THROWS(rdmi::build_design(MiModel::full, ds, y, 1, 1));
  CHECK_THROWS(rdmi::build_design(MiModel::cics, ds, y, 0, 1));
}

TEST_CASE("tsd column carries max(0, visit - ie visit)") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w50"), 0);
  const auto y = completed_seed(ds);
  const auto bd = rdmi::build_design(MiModel::oits, ds, y, 3, 1);
  REQUIRE(bd.columns[1] == "tsd");
  REQUIRE(bd.columns[2] == "d");
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < ds.patients.size(); ++i) {
    const PatientRecord& p = ds.patients[i];
    if (p.arm != Arm::active || !p.observed[3]) continue;
    const double tsd = p.ie_time > 0 ? 3 - p.ie_time : 0;
    CHECK(bd.fit.X(r, 1) == tsd);
    CHECK(bd.fit.X(r, 2) == (p.ie_time > 0 ? 1.0 : 0.0));
    ++r;
  }
  CHECK(r == bd.fit.rows());
}

TEST_CASE("pooled scope stacks both arms in one design") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w50"), 0);
  const auto y = completed_seed(ds);
  const auto pooled = rdmi::build_design(MiModel::pooled_oics, ds, y, 3, 3);
  const auto active = rdmi::build_design(MiModel::oics, ds, y, 3, 1);
  const auto control = rdmi::build_design(MiModel::oics, ds, y, 3, 2);
  CHECK(pooled.fit.rows() == active.fit.rows() + control.fit.rows());
  CHECK(pooled.impute_rows.size() == active.impute_rows.size() + control.impute_rows.size());
  for (const std::string& c : pooled.columns) CHECK(c != "arm");
}

TEST_CASE("no missing data means M untouched copies") {
  rdmi::ScenarioSpec s = rdmi::preset("base-disc30a20c-w50");
  s.withdrawal_rate = 0.0;
  const TrialDataset ds = rdmi::simulate_trial(s, 1);
  for (MiModel m : {MiModel::cics, MiModel::pooled_oics, MiModel::oics, MiModel::oits,
                    MiModel::pics}) {
    const auto res = rdmi::impute_sequential(ds, m, 3);
    REQUIRE(res.ok());
    REQUIRE(res.completed.size() == 3);
    for (const auto& cd : res.completed)
      for (std::size_t i = 0; i < ds.patients.size(); ++i)
        CHECK(cd.y[i] == ds.patients[i].y_policy);
  }
}

TEST_CASE("full model returns the counterfactual-complete data once") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w70"), 2);
  const auto res = rdmi::impute_sequential(ds, MiModel::full, 25);
  REQUIRE(res.ok());
  REQUIRE(res.completed.size() == 1);
  CHECK(res.completed[0].imputation == 1);
  for (std::size_t i = 0; i < ds.patients.size(); ++i)
    CHECK(res.completed[0].y[i] == ds.patients[i].y_policy);
}

TEST_CASE("observed cells are immutable and imputed cells are binary") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w70"), 3);
  for (MiModel m : {MiModel::cics, MiModel::pooled_oics, MiModel::oics, MiModel::oits,
                    MiModel::pics}) {
    CAPTURE(rdmi::model_name(m));
    const auto res = rdmi::impute_sequential(ds, m, 5);
    REQUIRE(res.ok());
    REQUIRE(res.completed.size() == 5);
    for (const auto& cd : res.completed) {
      CHECK(cd.imputation >= 1);
      for (std::size_t i = 0; i < ds.patients.size(); ++i)
        for (std::size_t v = 0; v < 4; ++v) {
          if (ds.patients[i].observed[v])
            CHECK(cd.y[i][v] == ds.patients[i].y_policy[v]);
          else
            CHECK((cd.y[i][v] == 0 || cd.y[i][v] == 1));
        }
    }
    bool vary = false;
    for (std::size_t i = 0; i < ds.patients.size() && !vary; ++i)
      vary = res.completed[0].y[i] != res.completed[1].y[i];
    CHECK(vary);
  }
}

TEST_CASE("imputations are deterministic in the dataset address") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w50"), 4);
  const auto a = rdmi::impute_sequential(ds, MiModel::oics, 3);
  const auto b = rdmi::impute_sequential(ds, MiModel::oics, 3);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  for (int m = 0; m < 3; ++m) CHECK(a.completed[m].y == b.completed[m].y);
}

TEST_CASE("fills in one arm ignore the other arm entirely") {
  const TrialDataset ds = rdmi::simulate_trial(rdmi::preset("base-disc30a20c-w70"), 5);
  TrialDataset mangled = ds;
  for (PatientRecord& p : mangled.patients) {
    if (p.arm != Arm::control) continue;
    for (std::size_t v = 0; v < 4; ++v) {
      p.y_policy[v] = 1 - p.y_policy[v];
      p.y_on[v] = 1 - p.y_on[v];
    }
  }
  for (MiModel m : {MiModel::cics, MiModel::oics, MiModel::oits, MiModel::pics}) {
    CAPTURE(rdmi::model_name(m));
    const auto a = rdmi::impute_sequential(ds, m, 3);
    const auto b = rdmi::impute_sequential(mangled, m, 3);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    for (int mm = 0; mm < 3; ++mm)
      for (std::size_t i = 0; i < ds.patients.size(); ++i)
        if (ds.patients[i].arm == Arm::active)
          CHECK(a.completed[mm].y[i] == b.completed[mm].y[i]);
  }
}

TEST_CASE("conditional models coincide when no one discontinues") {
  rdmi::ScenarioSpec s = rdmi::preset("base-disc30a20c-w50");
  s.disc_active.incr = {0.0, 0.0, 0.0};
  s.disc_control.incr = {0.0, 0.0, 0.0};
  TrialDataset ds = rdmi::simulate_trial(s, 6);
  for (std::size_t i = 0; i < ds.patients.size(); i += 7)
    for (std::size_t v = 2; v < 4; ++v) ds.patients[i].observed[v] = false;

  const auto ref = rdmi::impute_sequential(ds, MiModel::cics, 4, 1);
  REQUIRE(ref.ok());
  for (MiModel m : {MiModel::oics, MiModel::oits, MiModel::pics}) {
    CAPTURE(rdmi::model_name(m));
    const auto res = rdmi::impute_sequential(ds, m, 4, 1);
    REQUIRE(res.ok());
    for (int mm = 0; mm < 4; ++mm) CHECK(res.completed[mm].y == ref.completed[mm].y);
  }
}

TEST_CASE("a pattern needing imputation with no donors is non-estimable") {
  TrialDataset ds = hand_dataset(30, 6);
  const auto bd = rdmi::build_design(MiModel::pics, ds, completed_seed(ds), 1, 1);
  CHECK(bd.empty_pattern);

  const auto res = rdmi::impute_sequential(ds, MiModel::pics, 3);
  CHECK_FALSE(res.ok());
  CHECK(res.status == rdmi::ImputeStatus::empty_pattern);
  CHECK(res.fail_visit == 1);
  CHECK(res.fail_imputation == 1);
  CHECK(res.completed.empty());

  // The conditional models drop the constant discontinuation column and fit.
  const auto oics = rdmi::build_design(MiModel::oics, ds, completed_seed(ds), 1, 1);
  CHECK_FALSE(oics.empty_pattern);
  CHECK(oics.columns == std::vector<std::string>{"intercept", "y0"});
  const auto ok = rdmi::impute_sequential(ds, MiModel::oics, 3);
  CHECK(ok.ok());
}

TEST_CASE("fill draws follow the drawn parameter's probabilities") {
  const TrialDataset ds = hand_dataset(6000, 4000);
  const auto res = rdmi::impute_sequential(ds, MiModel::cics, 1);
  REQUIRE(res.ok());
  const auto& cd = res.completed[0];

  auto bd = rdmi::build_design(MiModel::cics, ds, completed_seed(ds), 1, 1);
  const auto fit = rdmi::fit_logistic(rdmi::augment(bd.fit));
  REQUIRE(fit.converged());
  auto stream = rdmi::make_stream(ds.master_seed, ds.spec_hash, ds.replicate,
                                  rdmi::stream_tag(rdmi::Lane::impute, rdmi::model_code(MiModel::cics), 1, 1, 1));
  const auto beta = rdmi::draw_params(fit, stream);
  REQUIRE(beta.has_value());

  long ones = 0;
  double expected = 0.0;
  for (std::size_t r = 0; r < bd.impute_rows.size(); ++r) {
    const double p = rdmi::predict_prob(*beta, bd.impute_X.row(static_cast<Eigen::Index>(r)).transpose());
    const int fill = stream.uniform() < p ? 1 : 0;
    CHECK(cd.y[bd.impute_rows[r]][1] == fill);
    ones += cd.y[bd.impute_rows[r]][1];
    expected += p;
  }
  const double n = static_cast<double>(bd.impute_rows.size());
  const double phat = static_cast<double>(ones) / n;
  const double pbar = expected / n;
  CHECK(std::fabs(phat - pbar) < 3.0 * std::sqrt(pbar * (1.0 - pbar) / n));
}

TEST_CASE("imputation csv lists every patient visit with flags") {
  rdmi::ScenarioSpec s = rdmi::preset("base-disc20a20c-w50");
  s.n_per_arm = 12;
  const TrialDataset ds = rdmi::simulate_trial(s, 0);
  const auto res = rdmi::impute_sequential(ds, MiModel::cics, 2);
  REQUIRE(res.ok());
  std::ostringstream os;
  rdmi::write_imputation_csv(os, ds, res.completed[1]);
  const std::string text = os.str();
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 1 + 24 * 4);
  CHECK(text.rfind("sim,imputation,arm,id,visit,pattern,observed,y\n", 0) == 0);
  CHECK(text.find("\n0,2,A,0,0,") != std::string::npos);
}
