#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace rdmi {

enum class Arm { active = 0, control = 1 };

inline const char* arm_name(Arm a) { return a == Arm::active ? "active" : "control"; }

enum class WithdrawalMode { quota = 0, threshold = 1 };

// Response probabilities per visit. on covers visits 0..3, off covers 1..3
// (an intercurrent event cannot occur at baseline).
struct ResponseSchedule {
  std::array<double, 4> on{};
  std::array<double, 3> off{};
  bool operator==(const ResponseSchedule&) const = default;
};

// Incremental discontinuation fractions at visits 1..3.
struct DiscontinuationSchedule {
  std::array<double, 3> incr{};
  double headline() const { return incr[0] + incr[1] + incr[2]; }
  std::array<double, 3> cumulative() const {
    return {incr[0], incr[0] + incr[1], incr[0] + incr[1] + incr[2]};
  }
  bool operator==(const DiscontinuationSchedule&) const = default;
};

struct ScenarioSpec {
  std::string name;  // label only; excluded from equality and hashing
  long n_per_arm = 250;
  long n_sims = 1000;
  long n_imputations = 25;
  std::uint64_t master_seed = 12345;
  double rho = 0.5;
  double omega = 0.75;
  double withdrawal_rate = 0.0;
  bool null_effect = false;
  bool copula_split = false;
  WithdrawalMode withdrawal_mode = WithdrawalMode::quota;
  ResponseSchedule active;
  ResponseSchedule control;
  DiscontinuationSchedule disc_active;
  DiscontinuationSchedule disc_control;

  const ResponseSchedule& response(Arm a) const { return a == Arm::active ? active : control; }
  const DiscontinuationSchedule& disc(Arm a) const {
    return a == Arm::active ? disc_active : disc_control;
  }

  bool operator==(const ScenarioSpec& o) const {
    return n_per_arm == o.n_per_arm && n_sims == o.n_sims &&
           n_imputations == o.n_imputations && master_seed == o.master_seed && rho == o.rho &&
           omega == o.omega && withdrawal_rate == o.withdrawal_rate &&
           null_effect == o.null_effect && copula_split == o.copula_split &&
           withdrawal_mode == o.withdrawal_mode && active == o.active && control == o.control &&
           disc_active == o.disc_active && disc_control == o.disc_control;
  }
};

// Throws std::runtime_error naming the offending key on any invariant violation.
void validate(const ScenarioSpec& spec);

// Flat key = value document; '#' starts a comment; lists are comma-separated.
ScenarioSpec load_scenario(const std::string& config_text);
ScenarioSpec load_scenario_file(const std::string& path);
std::string serialize(const ScenarioSpec& spec);

ScenarioSpec preset(const std::string& name);
std::vector<std::string> preset_names();

// Hash over every field that shapes generated data (everything except
// n_sims, the label, and runtime knobs that do not alter a replicate).
std::uint64_t dgm_hash(const ScenarioSpec& spec);
// Hash over the fields that determine the true policy effect: response
// schedules, discontinuation schedules, rho, omega, null flag, copula layout.
std::uint64_t estimand_hash(const ScenarioSpec& spec);

}  // namespace rdmi
