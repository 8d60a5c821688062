#pragma once

#include "rdmi/dgm.hpp"
#include "rdmi/glm.hpp"

#include <array>
#include <string>
#include <vector>

namespace rdmi {

enum class MiModel { full = 0, cics = 1, pooled_oics = 2, oics = 3, oits = 4, pics = 5 };

inline constexpr std::array<MiModel, 6> kAllModels = {MiModel::full,  MiModel::cics,
                                                      MiModel::pooled_oics, MiModel::oics,
                                                      MiModel::oits,  MiModel::pics};

const char* model_name(MiModel m);
MiModel parse_model(const std::string& name);  // case-insensitive; throws on unknown
inline int model_code(MiModel m) { return static_cast<int>(m); }
inline bool pooled_scope(MiModel m) { return m == MiModel::pooled_oics; }

// Completed policy outcomes aligned to TrialDataset.patients.
struct CompletedDataset {
  std::vector<std::array<int, 4>> y;
  int imputation = 0;  // 1..M
};

// Slice codes: 1 = active arm, 2 = control arm, 3 = pooled.
struct BuiltDesign {
  DesignMatrix fit;
  Eigen::MatrixXd impute_X;
  std::vector<std::size_t> impute_rows;  // indices into TrialDataset.patients
  std::vector<std::string> columns;      // labels after constant-column drop
  bool empty_pattern = false;            // PICS level with impute rows but no fit rows
};

BuiltDesign build_design(MiModel model, const TrialDataset& ds,
                         const std::vector<std::array<int, 4>>& y, int visit, int slice);

enum class ImputeStatus { ok, empty_pattern, fit_failed };

struct ImputeResult {
  ImputeStatus status = ImputeStatus::ok;
  int fail_visit = 0;
  int fail_imputation = 0;
  std::vector<CompletedDataset> completed;

  bool ok() const { return status == ImputeStatus::ok; }
};

// stream_model_code overrides the model code used in stream keying (tests
// only, to run two models against identical draws); -1 means the model's own.
ImputeResult impute_sequential(const TrialDataset& ds, MiModel model, long n_imputations,
                               int stream_model_code = -1);

void write_imputation_csv(std::ostream& os, const TrialDataset& ds,
                          const CompletedDataset& cd);

}  // namespace rdmi
