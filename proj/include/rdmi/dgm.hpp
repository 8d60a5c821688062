#pragma once

#include "rdmi/scenario.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace rdmi {

class RngStream;

struct PatientRecord {
  long id = 0;
  Arm arm = Arm::active;
  std::array<int, 4> y_on{};   // visits 0..3
  std::array<int, 3> y_off{};  // visits 1..3
  int ie_time = 0;             // 0 = no intercurrent event, else visit 1..3
  std::array<int, 4> y_policy{};
  std::array<bool, 4> observed{true, true, true, true};

  int d_at(int visit) const { return ie_time > 0 && ie_time <= visit ? 1 : 0; }
  int pattern() const { return ie_time; }
  // Time since discontinuation at a visit: max(0, visit - ie_time).
  int tsd_at(int visit) const {
    return ie_time > 0 && visit > ie_time ? visit - ie_time : 0;
  }
};

struct TrialDataset {
  std::vector<PatientRecord> patients;  // active block first, then control, id-ordered
  long n_per_arm = 0;
  long replicate = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t spec_hash = 0;
};

inline int arm_code(Arm a) { return a == Arm::active ? 1 : 2; }

// Per-visit IE counts from cumulative targets rounded half-up, so the
// realized cumulative counts match round(cumulative_rate * n) exactly.
std::array<long, 3> ie_targets(const DiscontinuationSchedule& sched, long n_per_arm);

std::vector<PatientRecord> gen_counterfactuals(const ScenarioSpec& spec, Arm arm,
                                               long first_id, long n, RngStream& stream);

void select_ies(std::vector<PatientRecord>& block, const DiscontinuationSchedule& sched,
                double omega, RngStream& stream);

void select_withdrawals(std::vector<PatientRecord>& block, double withdrawal_rate,
                        WithdrawalMode mode, RngStream& stream);

TrialDataset simulate_trial(const ScenarioSpec& spec, long replicate);

void write_dataset_csv(std::ostream& os, const TrialDataset& ds);

}  // namespace rdmi
