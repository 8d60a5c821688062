#include "rdmi/impute.hpp"

#include "rdmi/rng.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>
#include <stdexcept>

namespace rdmi {

const char* model_name(MiModel m) {
  switch (m) {
    case MiModel::full: return "FULL";
    case MiModel::cics: return "CICS";
    case MiModel::pooled_oics: return "POOLED_OICS";
    case MiModel::oics: return "OICS";
    case MiModel::oits: return "OITS";
    case MiModel::pics: return "PICS";
  }
  return "?";
}

MiModel parse_model(const std::string& name) {
  std::string up;
  up.reserve(name.size());
  for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (MiModel m : kAllModels)
    if (up == model_name(m)) return m;
  throw std::runtime_error("unknown model '" + name + "'");
}

namespace {

bool in_slice(const PatientRecord& p, int slice) {
  return slice == 3 || arm_code(p.arm) == slice;
}

}  // namespace

BuiltDesign build_design(MiModel model, const TrialDataset& ds,
                         const std::vector<std::array<int, 4>>& y, int visit, int slice) {
  if (visit < 1 || visit > 3) throw std::invalid_argument("impute: visit must be 1..3");
  if (model == MiModel::full) throw std::invalid_argument("impute: FULL has no design");

  const std::size_t v = static_cast<std::size_t>(visit);
  std::vector<std::string> columns{"intercept"};
  if (model == MiModel::oits) columns.push_back("tsd");
  if (model == MiModel::pooled_oics || model == MiModel::oics || model == MiModel::oits)
    columns.push_back("d");
  if (model == MiModel::pics)
    for (int k = 1; k <= visit; ++k) columns.push_back("p" + std::to_string(k));
  for (int k = 0; k < visit; ++k) columns.push_back("y" + std::to_string(k));
  const std::size_t k_cols = columns.size();

  std::vector<std::size_t> fit_rows, impute_rows;
  for (std::size_t i = 0; i < ds.patients.size(); ++i) {
    if (!in_slice(ds.patients[i], slice)) continue;
    if (ds.patients[i].observed[v]) fit_rows.push_back(i);
    else impute_rows.push_back(i);
  }

  BuiltDesign out;
  out.impute_rows = impute_rows;

  if (model == MiModel::pics) {
    for (int k = 1; k <= visit; ++k) {
      bool needed = false, fitted = false;
      for (std::size_t i : impute_rows)
        if (ds.patients[i].ie_time == k) { needed = true; break; }
      for (std::size_t i : fit_rows)
        if (ds.patients[i].ie_time == k) { fitted = true; break; }
      if (needed && !fitted) {
        out.empty_pattern = true;
        out.columns = columns;
        return out;
      }
    }
  }

  auto fill_row = [&](std::size_t i) {
    const PatientRecord& p = ds.patients[i];
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(k_cols));
    Eigen::Index c = 0;
    row[c++] = 1.0;
    if (model == MiModel::oits) row[c++] = p.tsd_at(visit);
    if (model == MiModel::pooled_oics || model == MiModel::oics || model == MiModel::oits)
      row[c++] = p.d_at(visit);
    if (model == MiModel::pics)
      for (int k = 1; k <= visit; ++k) row[c++] = p.ie_time == k ? 1.0 : 0.0;
    for (int k = 0; k < visit; ++k) row[c++] = y[i][static_cast<std::size_t>(k)];
    return row;
  };

  Eigen::MatrixXd fit_X(static_cast<Eigen::Index>(fit_rows.size()),
                        static_cast<Eigen::Index>(k_cols));
  Eigen::VectorXd fit_y(static_cast<Eigen::Index>(fit_rows.size()));
  for (std::size_t r = 0; r < fit_rows.size(); ++r) {
    fit_X.row(static_cast<Eigen::Index>(r)) = fill_row(fit_rows[r]);
    fit_y[static_cast<Eigen::Index>(r)] = y[fit_rows[r]][v];
  }
  Eigen::MatrixXd imp_X(static_cast<Eigen::Index>(impute_rows.size()),
                        static_cast<Eigen::Index>(k_cols));
  for (std::size_t r = 0; r < impute_rows.size(); ++r)
    imp_X.row(static_cast<Eigen::Index>(r)) = fill_row(impute_rows[r]);

  // Drop non-intercept columns that are constant across the fit rows.
  std::vector<Eigen::Index> keep{0};
  std::vector<std::string> kept_labels{columns[0]};
  for (std::size_t c = 1; c < k_cols; ++c) {
    const Eigen::Index ci = static_cast<Eigen::Index>(c);
    bool constant = true;
    for (Eigen::Index r = 1; r < fit_X.rows(); ++r)
      if (fit_X(r, ci) != fit_X(0, ci)) { constant = false; break; }
    if (fit_X.rows() == 0) constant = true;
    if (!constant) {
      keep.push_back(ci);
      kept_labels.push_back(columns[c]);
    }
  }
  out.fit.X.resize(fit_X.rows(), static_cast<Eigen::Index>(keep.size()));
  out.impute_X.resize(imp_X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    out.fit.X.col(static_cast<Eigen::Index>(c)) = fit_X.col(keep[c]);
    out.impute_X.col(static_cast<Eigen::Index>(c)) = imp_X.col(keep[c]);
  }
  out.fit.y = fit_y;
  out.fit.w = Eigen::VectorXd::Ones(fit_X.rows());
  out.columns = kept_labels;
  return out;
}

ImputeResult impute_sequential(const TrialDataset& ds, MiModel model, long n_imputations,
                               int stream_model_code) {
  ImputeResult out;
  const std::size_t n = ds.patients.size();

  if (model == MiModel::full) {
    CompletedDataset cd;
    cd.imputation = 1;
    cd.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) cd.y[i] = ds.patients[i].y_policy;
    out.completed.push_back(std::move(cd));
    return out;
  }

  const int smc = stream_model_code >= 0 ? stream_model_code : model_code(model);
  const std::vector<int> slices = pooled_scope(model) ? std::vector<int>{3}
                                                      : std::vector<int>{1, 2};
  for (int m = 1; m <= n_imputations; ++m) {
    CompletedDataset cd;
    cd.imputation = m;
    cd.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      cd.y[i] = ds.patients[i].y_policy;
      for (std::size_t v = 0; v < 4; ++v)
        if (!ds.patients[i].observed[v]) cd.y[i][v] = -1;
    }
    for (int visit = 1; visit <= 3; ++visit) {
      for (int slice : slices) {
        BuiltDesign bd = build_design(model, ds, cd.y, visit, slice);
        if (bd.empty_pattern) {
          out.status = ImputeStatus::empty_pattern;
          out.fail_visit = visit;
          out.fail_imputation = m;
          out.completed.clear();
          return out;
        }
        if (bd.impute_rows.empty()) continue;
        auto fail = [&] {
          out.status = ImputeStatus::fit_failed;
          out.fail_visit = visit;
          out.fail_imputation = m;
          out.completed.clear();
        };
        if (bd.fit.rows() == 0) {
          fail();
          return out;
        }
        FitResult fit = fit_logistic(augment(bd.fit));
        if (!fit.converged()) {
          fail();
          return out;
        }
        RngStream stream = make_stream(
            ds.master_seed, ds.spec_hash, ds.replicate,
            stream_tag(Lane::impute, smc, slice, visit, m));
        auto beta = draw_params(fit, stream);
        if (!beta) {
          fail();
          return out;
        }
        const std::size_t v = static_cast<std::size_t>(visit);
        for (std::size_t r = 0; r < bd.impute_rows.size(); ++r) {
          const double p =
              predict_prob(*beta, bd.impute_X.row(static_cast<Eigen::Index>(r)).transpose());
          cd.y[bd.impute_rows[r]][v] = stream.uniform() < p ? 1 : 0;
        }
      }
    }
    out.completed.push_back(std::move(cd));
  }
  return out;
}

void write_imputation_csv(std::ostream& os, const TrialDataset& ds,
                          const CompletedDataset& cd) {
  os << "sim,imputation,arm,id,visit,pattern,observed,y\n";
  for (std::size_t i = 0; i < ds.patients.size(); ++i) {
    const PatientRecord& p = ds.patients[i];
    for (int visit = 0; visit <= 3; ++visit) {
      const std::size_t v = static_cast<std::size_t>(visit);
      os << ds.replicate << ',' << cd.imputation << ',' << (p.arm == Arm::active ? 'A' : 'C')
         << ',' << p.id << ',' << visit << ',' << p.pattern() << ',' << (p.observed[v] ? 1 : 0)
         << ',' << cd.y[i][v] << '\n';
    }
  }
}

}  // namespace rdmi
