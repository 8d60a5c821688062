#include "rdmi/scenario.hpp"

#include "rdmi/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rdmi {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw std::runtime_error("scenario: " + key + ": " + what);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) fail(key, "malformed number '" + v + "'");
    return x;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "malformed number '" + v + "'");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) fail(key, "malformed integer '" + v + "'");
    return x;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "malformed integer '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) fail(key, "malformed integer '" + v + "'");
    return x;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    fail(key, "malformed integer '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(key, "expected true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v, std::size_t want) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.size() != want)
    fail(key, "expected " + std::to_string(want) + " values, got " + std::to_string(out.size()));
  return out;
}

std::string fmt_list(const double* v, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ", ";
    s += fmt_double(v[i]);
  }
  return s;
}

void check_unit(const std::string& key, double v, bool open) {
  if (open ? (v <= 0.0 || v >= 1.0) : (v < 0.0 || v > 1.0))
    fail(key, "value " + fmt_double(v) + (open ? " outside (0,1)" : " outside [0,1]"));
}

DiscontinuationSchedule disc_of(double v1, double v2, double v3) {
  DiscontinuationSchedule d;
  d.incr = {v1, v2, v3};
  return d;
}

ResponseSchedule resp_of(std::array<double, 4> on, std::array<double, 3> off) {
  ResponseSchedule r;
  r.on = on;
  r.off = off;
  return r;
}

struct RateFamily {
  const char* tag;
  ResponseSchedule active;
  ResponseSchedule control;
};

const RateFamily kBase{"base",
                       resp_of({0.3, 0.35, 0.4, 0.45}, {0.35, 0.25, 0.15}),
                       resp_of({0.3, 0.3, 0.3, 0.3}, {0.3, 0.225, 0.15})};
const RateFamily kStressHigh{"stress-high",
                             resp_of({0.8, 0.85, 0.875, 0.9}, {0.8, 0.6, 0.4}),
                             resp_of({0.8, 0.8, 0.8, 0.8}, {0.7, 0.55, 0.4})};
const RateFamily kStressMedium{"stress-medium",
                               resp_of({0.5, 0.55, 0.6, 0.7}, {0.5, 0.4, 0.25}),
                               resp_of({0.5, 0.5, 0.5, 0.5}, {0.45, 0.375, 0.25})};
const RateFamily kStressLow{"stress-low",
                            resp_of({0.1, 0.125, 0.15, 0.2}, {0.1, 0.08, 0.05}),
                            resp_of({0.1, 0.1, 0.1, 0.1}, {0.09, 0.075, 0.05})};

struct DiscFamily {
  const char* tag;
  DiscontinuationSchedule active;
  DiscontinuationSchedule control;
};

const DiscontinuationSchedule kDisc10 = disc_of(0.05, 0.03, 0.02);
const DiscontinuationSchedule kDisc20 = disc_of(0.10, 0.06, 0.04);
const DiscontinuationSchedule kDisc30 = disc_of(0.15, 0.09, 0.06);

const DiscFamily kDiscGrid[] = {
    {"disc10a10c", kDisc10, kDisc10},
    {"disc20a20c", kDisc20, kDisc20},
    {"disc30a30c", kDisc30, kDisc30},
    {"disc30a20c", kDisc30, kDisc20},
};

const int kWithdrawGrid[] = {30, 40, 50, 60, 70};
const int kSampleGrid[] = {50, 100, 500, 2000};
const int kSampleWithdrawGrid[] = {30, 40, 50};

ScenarioSpec make_preset(const std::string& name, const RateFamily& rates,
                         const DiscFamily& disc, int withdraw_pct, long n_per_arm,
                         bool null_effect) {
  ScenarioSpec s;
  s.name = name;
  s.n_per_arm = n_per_arm;
  s.withdrawal_rate = withdraw_pct / 100.0;
  s.null_effect = null_effect;
  s.active = rates.active;
  s.control = rates.control;
  s.disc_active = disc.active;
  s.disc_control = disc.control;
  if (null_effect) s.active = s.control;
  return s;
}

std::map<std::string, ScenarioSpec> build_presets() {
  std::map<std::string, ScenarioSpec> out;
  auto add = [&out](ScenarioSpec s) { out.emplace(s.name, std::move(s)); };
  for (const auto& disc : kDiscGrid) {
    for (int w : kWithdrawGrid) {
      for (bool null_effect : {false, true}) {
        std::string name = std::string("base-") + disc.tag + "-w" + std::to_string(w);
        if (null_effect) name += "-null";
        add(make_preset(name, kBase, disc, w, 250, null_effect));
      }
    }
  }
  const DiscFamily& unequal = kDiscGrid[3];
  for (long n : kSampleGrid) {
    for (int w : kSampleWithdrawGrid) {
      for (bool null_effect : {false, true}) {
        std::string name = "n" + std::to_string(n) + "-" + unequal.tag + "-w" + std::to_string(w);
        if (null_effect) name += "-null";
        add(make_preset(name, kBase, unequal, w, n, null_effect));
      }
    }
  }
  for (const RateFamily* fam : {&kStressHigh, &kStressMedium, &kStressLow}) {
    for (int w : kWithdrawGrid) {
      for (bool null_effect : {false, true}) {
        std::string name = std::string(fam->tag) + "-w" + std::to_string(w);
        if (null_effect) name += "-null";
        add(make_preset(name, *fam, unequal, w, 250, null_effect));
      }
    }
  }
  return out;
}

const std::map<std::string, ScenarioSpec>& presets() {
  static const std::map<std::string, ScenarioSpec> table = build_presets();
  return table;
}

}  // namespace

void validate(const ScenarioSpec& spec) {
  if (spec.n_per_arm < 1) fail("n_per_arm", "must be positive");
  if (spec.n_sims < 1) fail("n_sims", "must be positive");
  if (spec.n_imputations < 2) fail("n_imputations", "must be at least 2");
  if (!(spec.rho >= 0.0 && spec.rho < 1.0)) fail("rho", "must be in [0,1)");
  if (!std::isfinite(spec.omega)) fail("omega", "must be finite");
  if (!(spec.withdrawal_rate >= 0.0 && spec.withdrawal_rate <= 1.0))
    fail("withdrawal_rate", "must be in [0,1]");
  for (Arm arm : {Arm::active, Arm::control}) {
    const std::string base = std::string("response.") + arm_name(arm);
    const ResponseSchedule& r = spec.response(arm);
    for (double v : r.on) check_unit(base + ".on", v, true);
    for (double v : r.off) check_unit(base + ".off", v, true);
    const std::string dkey = std::string("disc.") + arm_name(arm);
    const DiscontinuationSchedule& d = spec.disc(arm);
    double sum = 0.0;
    for (double v : d.incr) {
      if (v < 0.0) fail(dkey, "entries must be nonnegative");
      sum += v;
    }
    if (sum > 1.0) fail(dkey, "total discontinuation exceeds 1");
  }
  if (spec.null_effect && !(spec.active == spec.control))
    fail("null", "null scenario requires identical arm schedules");
}

ScenarioSpec load_scenario(const std::string& config_text) {
  ScenarioSpec spec;
  std::map<std::string, std::string> kv;
  std::stringstream ss(config_text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("scenario: line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("scenario: line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) fail(key, "duplicate key");
  }
  auto take = [&kv](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::pair<bool, std::string>{false, ""};
    std::string v = it->second;
    kv.erase(it);
    return std::pair<bool, std::string>{true, v};
  };
  if (auto [ok, v] = take("name"); ok) spec.name = v;
  if (auto [ok, v] = take("n_per_arm"); ok) spec.n_per_arm = parse_long("n_per_arm", v);
  if (auto [ok, v] = take("n_sims"); ok) spec.n_sims = parse_long("n_sims", v);
  if (auto [ok, v] = take("n_imputations"); ok)
    spec.n_imputations = parse_long("n_imputations", v);
  if (auto [ok, v] = take("master_seed"); ok) spec.master_seed = parse_u64("master_seed", v);
  if (auto [ok, v] = take("rho"); ok) spec.rho = parse_double("rho", v);
  if (auto [ok, v] = take("omega"); ok) spec.omega = parse_double("omega", v);
  if (auto [ok, v] = take("withdrawal_rate"); ok)
    spec.withdrawal_rate = parse_double("withdrawal_rate", v);
  if (auto [ok, v] = take("null"); ok) spec.null_effect = parse_bool("null", v);
  if (auto [ok, v] = take("copula_split"); ok) spec.copula_split = parse_bool("copula_split", v);
  if (auto [ok, v] = take("withdrawal_mode"); ok) {
    if (v == "quota") spec.withdrawal_mode = WithdrawalMode::quota;
    else if (v == "threshold") spec.withdrawal_mode = WithdrawalMode::threshold;
    else fail("withdrawal_mode", "expected quota or threshold, got '" + v + "'");
  }
  auto take_list = [&take](const std::string& key, double* dst, std::size_t n, bool* seen) {
    if (auto [ok, v] = take(key); ok) {
      std::vector<double> vals = parse_list(key, v, n);
      std::copy(vals.begin(), vals.end(), dst);
      if (seen) *seen = true;
    }
  };
  bool any_rate = false;
  take_list("response.active.on", spec.active.on.data(), 4, &any_rate);
  take_list("response.active.off", spec.active.off.data(), 3, &any_rate);
  take_list("response.control.on", spec.control.on.data(), 4, &any_rate);
  take_list("response.control.off", spec.control.off.data(), 3, &any_rate);
  take_list("disc.active", spec.disc_active.incr.data(), 3, nullptr);
  take_list("disc.control", spec.disc_control.incr.data(), 3, nullptr);
  if (!kv.empty()) fail(kv.begin()->first, "unknown key");
  if (!any_rate && spec.active == ResponseSchedule{} )
    fail("response.active.on", "missing required response schedules");
  if (spec.null_effect) spec.active = spec.control;
  validate(spec);
  return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string serialize(const ScenarioSpec& spec) {
  std::string out;
  auto put = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  };
  if (!spec.name.empty()) put("name", spec.name);
  put("n_per_arm", std::to_string(spec.n_per_arm));
  put("n_sims", std::to_string(spec.n_sims));
  put("n_imputations", std::to_string(spec.n_imputations));
  put("master_seed", std::to_string(spec.master_seed));
  put("rho", fmt_double(spec.rho));
  put("omega", fmt_double(spec.omega));
  put("withdrawal_rate", fmt_double(spec.withdrawal_rate));
  put("null", spec.null_effect ? "true" : "false");
  put("copula_split", spec.copula_split ? "true" : "false");
  put("withdrawal_mode", spec.withdrawal_mode == WithdrawalMode::quota ? "quota" : "threshold");
  put("response.active.on", fmt_list(spec.active.on.data(), 4));
  put("response.active.off", fmt_list(spec.active.off.data(), 3));
  put("response.control.on", fmt_list(spec.control.on.data(), 4));
  put("response.control.off", fmt_list(spec.control.off.data(), 3));
  put("disc.active", fmt_list(spec.disc_active.incr.data(), 3));
  put("disc.control", fmt_list(spec.disc_control.incr.data(), 3));
  return out;
}

ScenarioSpec preset(const std::string& name) {
  const auto& table = presets();
  auto it = table.find(name);
  if (it == table.end()) throw std::runtime_error("scenario: unknown preset '" + name + "'");
  return it->second;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  names.reserve(presets().size());
  for (const auto& [name, spec] : presets()) names.push_back(name);
  return names;
}

namespace {

std::string hash_text(const ScenarioSpec& spec, bool estimand_only) {
  std::string out;
  auto put = [&out](const char* key, const std::string& value) {
    out += key;
    out += "=";
    out += value;
    out += ";";
  };
  put("rho", fmt_double(spec.rho));
  put("omega", fmt_double(spec.omega));
  put("null", spec.null_effect ? "1" : "0");
  put("copula_split", spec.copula_split ? "1" : "0");
  put("response.active.on", fmt_list(spec.active.on.data(), 4));
  put("response.active.off", fmt_list(spec.active.off.data(), 3));
  put("response.control.on", fmt_list(spec.control.on.data(), 4));
  put("response.control.off", fmt_list(spec.control.off.data(), 3));
  put("disc.active", fmt_list(spec.disc_active.incr.data(), 3));
  put("disc.control", fmt_list(spec.disc_control.incr.data(), 3));
  if (!estimand_only) {
    put("n_per_arm", std::to_string(spec.n_per_arm));
    put("withdrawal_rate", fmt_double(spec.withdrawal_rate));
    put("withdrawal_mode", spec.withdrawal_mode == WithdrawalMode::quota ? "q" : "t");
  }
  return out;
}

}  // namespace

std::uint64_t dgm_hash(const ScenarioSpec& spec) {
  std::string text = hash_text(spec, false);
  return fnv1a(text.data(), text.size());
}

std::uint64_t estimand_hash(const ScenarioSpec& spec) {
  std::string text = hash_text(spec, true);
  return fnv1a(text.data(), text.size());
}

}  // namespace rdmi
