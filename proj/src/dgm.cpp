#include "rdmi/dgm.hpp"

#include "rdmi/rng.hpp"
#include "rdmi/stats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace rdmi {

std::array<long, 3> ie_targets(const DiscontinuationSchedule& sched, long n_per_arm) {
  const std::array<double, 3> cum = sched.cumulative();
  std::array<long, 3> out{};
  long prev = 0;
  for (int j = 0; j < 3; ++j) {
    const long c = round_half_up(cum[j] * static_cast<double>(n_per_arm));
    out[j] = c - prev;
    prev = c;
  }
  return out;
}

std::vector<PatientRecord> gen_counterfactuals(const ScenarioSpec& spec, Arm arm,
                                               long first_id, long n, RngStream& stream) {
  const ResponseSchedule& rates = spec.response(arm);
  const double a = std::sqrt(spec.rho);
  const double b = std::sqrt(1.0 - spec.rho);
  std::vector<PatientRecord> block(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    PatientRecord& p = block[static_cast<std::size_t>(i)];
    p.id = first_id + i;
    p.arm = arm;
    const double z_on = stream.normal();
    const double z_off = spec.copula_split ? stream.normal() : z_on;
    for (int k = 0; k < 4; ++k) {
      const double u = norm_cdf(a * z_on + b * stream.normal());
      p.y_on[static_cast<std::size_t>(k)] = u <= rates.on[static_cast<std::size_t>(k)] ? 1 : 0;
    }
    for (int k = 0; k < 3; ++k) {
      const double u = norm_cdf(a * z_off + b * stream.normal());
      p.y_off[static_cast<std::size_t>(k)] = u <= rates.off[static_cast<std::size_t>(k)] ? 1 : 0;
    }
    p.y_policy = p.y_on;
    p.observed = {true, true, true, true};
  }
  return block;
}

void select_ies(std::vector<PatientRecord>& block, const DiscontinuationSchedule& sched,
                double omega, RngStream& stream) {
  const long n = static_cast<long>(block.size());
  const std::array<long, 3> targets = ie_targets(sched, n);

  std::vector<double> logit_v(block.size());
  for (std::size_t i = 0; i < block.size(); ++i) logit_v[i] = logit(stream.uniform());

  long remaining = n;
  for (int visit = 1; visit <= 3; ++visit) {
    const long want = targets[static_cast<std::size_t>(visit - 1)];
    if (want > remaining) throw std::runtime_error("dgm: infeasible discontinuation schedule");
    if (want == 0) continue;
    std::vector<std::pair<double, std::size_t>> kappa;
    kappa.reserve(static_cast<std::size_t>(remaining));
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (block[i].ie_time != 0) continue;
      const double prev = block[i].y_on[static_cast<std::size_t>(visit - 1)];
      kappa.emplace_back(logit_v[i] - omega * prev, i);
    }
    std::sort(kappa.begin(), kappa.end());
    for (long r = 0; r < want; ++r)
      block[kappa[static_cast<std::size_t>(r)].second].ie_time = visit;
    remaining -= want;
  }

  for (PatientRecord& p : block) {
    p.y_policy = p.y_on;
    if (p.ie_time > 0)
      for (int j = p.ie_time; j <= 3; ++j)
        p.y_policy[static_cast<std::size_t>(j)] = p.y_off[static_cast<std::size_t>(j - 1)];
  }
}

void select_withdrawals(std::vector<PatientRecord>& block, double withdrawal_rate,
                        WithdrawalMode mode, RngStream& stream) {
  long cum_ie = 0;
  long assigned = 0;
  for (int visit = 1; visit <= 3; ++visit) {
    std::vector<double> u(block.size());
    for (std::size_t i = 0; i < block.size(); ++i) u[i] = stream.uniform();

    std::vector<std::size_t> here;
    for (std::size_t i = 0; i < block.size(); ++i)
      if (block[i].ie_time == visit) here.push_back(i);
    cum_ie += static_cast<long>(here.size());

    std::vector<std::size_t> withdrawn;
    if (mode == WithdrawalMode::quota) {
      const long quota = round_half_up(withdrawal_rate * static_cast<double>(cum_ie)) - assigned;
      if (quota < 0 || quota > static_cast<long>(here.size()))
        throw std::logic_error("dgm: withdrawal quota out of range");
      std::sort(here.begin(), here.end(),
                [&u](std::size_t lhs, std::size_t rhs) {
                  return u[lhs] != u[rhs] ? u[lhs] < u[rhs] : lhs < rhs;
                });
      withdrawn.assign(here.begin(), here.begin() + quota);
      assigned += quota;
    } else {
      for (std::size_t i : here)
        if (u[i] < withdrawal_rate) withdrawn.push_back(i);
    }
    for (std::size_t i : withdrawn)
      for (int j = visit; j <= 3; ++j)
        block[i].observed[static_cast<std::size_t>(j)] = false;
  }
}

TrialDataset simulate_trial(const ScenarioSpec& spec, long replicate) {
  TrialDataset ds;
  ds.n_per_arm = spec.n_per_arm;
  ds.replicate = replicate;
  ds.master_seed = spec.master_seed;
  // Stream key excludes the withdrawal knobs: masking must never perturb the
  // underlying trial, so scenarios differing only in withdrawal share data.
  const std::string sized = "n_per_arm=" + std::to_string(spec.n_per_arm) + ";";
  ds.spec_hash = fnv1a(sized.data(), sized.size(), estimand_hash(spec));
  ds.patients.reserve(static_cast<std::size_t>(2 * spec.n_per_arm));
  long first_id = 0;
  for (Arm arm : {Arm::active, Arm::control}) {
    const int code = arm_code(arm);
    RngStream cf = make_stream(spec.master_seed, ds.spec_hash, replicate,
                               stream_tag(Lane::counterfactual, 0, code));
    std::vector<PatientRecord> block =
        gen_counterfactuals(spec, arm, first_id, spec.n_per_arm, cf);
    RngStream ie = make_stream(spec.master_seed, ds.spec_hash, replicate,
                               stream_tag(Lane::ie_select, 0, code));
    select_ies(block, spec.disc(arm), spec.omega, ie);
    RngStream wd = make_stream(spec.master_seed, ds.spec_hash, replicate,
                               stream_tag(Lane::withdraw, 0, code));
    select_withdrawals(block, spec.withdrawal_rate, spec.withdrawal_mode, wd);
    ds.patients.insert(ds.patients.end(), block.begin(), block.end());
    first_id += spec.n_per_arm;
  }
  return ds;
}

void write_dataset_csv(std::ostream& os, const TrialDataset& ds) {
  os << "sim,arm,id,visit,y_on,y_off,d,pattern,y_policy,observed\n";
  for (const PatientRecord& p : ds.patients) {
    for (int visit = 0; visit <= 3; ++visit) {
      os << ds.replicate << ',' << (p.arm == Arm::active ? 'A' : 'C') << ',' << p.id << ','
         << visit << ',' << p.y_on[static_cast<std::size_t>(visit)] << ',';
      if (visit == 0) os << "NA";
      else os << p.y_off[static_cast<std::size_t>(visit - 1)];
      os << ',' << p.d_at(visit) << ',' << p.pattern() << ','
         << p.y_policy[static_cast<std::size_t>(visit)] << ','
         << (p.observed[static_cast<std::size_t>(visit)] ? 1 : 0) << '\n';
    }
  }
}

}  // namespace rdmi
