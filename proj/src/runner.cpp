#include "rdmi/runner.hpp"

#include "rdmi/dgm.hpp"
#include "rdmi/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rdmi {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double parse_num(const std::string& s) { return s == "NA" ? kNaN : std::stod(s); }

constexpr const char* kRepHeader =
    "scenario_index,scenario,replicate,model,status,reason,point,se,within_var,between_var,"
    "df,ci_low,ci_high,p_value,significant,m_used";

std::string rep_row(long scenario_index, const std::string& scenario, const RepResult& r) {
  std::ostringstream os;
  os << scenario_index << ',' << scenario << ',' << r.replicate << ',' << model_name(r.model)
     << ',' << (r.ok ? "fitted" : "excluded") << ',' << fail_reason_name(r.reason) << ',';
  if (r.ok) {
    os << num(r.est.point) << ',' << num(r.est.se) << ',' << num(r.est.within_var) << ','
       << num(r.est.between_var) << ',' << num(r.est.df) << ',' << num(r.est.ci_low) << ','
       << num(r.est.ci_high) << ',' << num(r.est.p_value) << ',' << (r.significant ? 1 : 0)
       << ',' << r.est.m_used;
  } else {
    os << "NA,NA,NA,NA,NA,NA,NA,NA,0,0";
  }
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::uint64_t manifest_hash(const RunManifest& m) {
  std::string text;
  for (const ScenarioSpec& s : m.scenarios) text += serialize(s) + "|";
  for (MiModel model : m.models) text += std::string(model_name(model)) + ",";
  return fnv1a(text.data(), text.size());
}

struct JournalRow {
  long scenario_index;
  RepResult result;
};

bool parse_journal_row(const std::string& line, const std::vector<MiModel>& models,
                       JournalRow* out) {
  const std::vector<std::string> f = split_csv(line);
  if (f.size() != 16) return false;
  try {
    out->scenario_index = std::stol(f[0]);
    RepResult& r = out->result;
    r.replicate = std::stol(f[2]);
    r.model = parse_model(f[3]);
    if (std::find(models.begin(), models.end(), r.model) == models.end()) return false;
    r.ok = f[4] == "fitted";
    r.reason = FailReason::none;
    for (FailReason reason : {FailReason::empty_pattern, FailReason::fit_failed,
                              FailReason::analysis_failed})
      if (f[5] == fail_reason_name(reason)) r.reason = reason;
    if (r.ok) {
      r.est.point = parse_num(f[6]);
      r.est.se = parse_num(f[7]);
      r.est.within_var = parse_num(f[8]);
      r.est.between_var = parse_num(f[9]);
      r.est.total_var = r.est.se * r.est.se;
      r.est.df = parse_num(f[10]);
      r.est.ci_low = parse_num(f[11]);
      r.est.ci_high = parse_num(f[12]);
      r.est.p_value = parse_num(f[13]);
      r.significant = f[14] == "1";
      r.est.m_used = std::stol(f[15]);
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void validate_manifest(const RunManifest& m) {
  if (m.scenarios.empty()) throw std::runtime_error("runner: no scenarios");
  if (m.models.empty()) throw std::runtime_error("runner: empty model list");
  std::map<std::string, int> seen;
  for (const ScenarioSpec& s : m.scenarios) {
    validate(s);
    if (s.name.empty()) throw std::runtime_error("runner: scenario without a name");
    for (char c : s.name)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
        throw std::runtime_error("runner: scenario name '" + s.name +
                                 "' has characters unsafe for filenames");
    if (++seen[s.name] > 1)
      throw std::runtime_error("runner: duplicate scenario name '" + s.name + "'");
  }
}

std::vector<MiModel> effective_models(const std::vector<MiModel>& requested) {
  std::vector<MiModel> out;
  for (MiModel m : kAllModels)
    if (m == MiModel::full ||
        std::find(requested.begin(), requested.end(), m) != requested.end())
      out.push_back(m);
  return out;
}

void dump_replicate_zero(const RunManifest& manifest, const ScenarioSpec& spec,
                         const std::vector<MiModel>& models, const fs::path& dir) {
  const TrialDataset ds = simulate_trial(spec, 0);
  if (manifest.dump_data) {
    std::ofstream os(dir / ("data_" + spec.name + ".csv"));
    write_dataset_csv(os, ds);
  }
  if (!manifest.dump_imputations) return;
  std::ofstream os(dir / ("imputations_" + spec.name + ".csv"));
  os << "model,sim,imputation,arm,id,visit,pattern,observed,y\n";
  for (MiModel model : models) {
    const ImputeResult ir =
        impute_sequential(ds, model, model == MiModel::full ? 1 : spec.n_imputations);
    if (!ir.ok()) continue;
    for (const CompletedDataset& cd : ir.completed) {
      for (std::size_t i = 0; i < ds.patients.size(); ++i) {
        const PatientRecord& p = ds.patients[i];
        for (int visit = 0; visit <= 3; ++visit) {
          const std::size_t v = static_cast<std::size_t>(visit);
          os << model_name(model) << ',' << ds.replicate << ',' << cd.imputation << ','
             << (p.arm == Arm::active ? 'A' : 'C') << ',' << p.id << ',' << visit << ','
             << p.pattern() << ',' << (p.observed[v] ? 1 : 0) << ',' << cd.y[i][v] << '\n';
        }
      }
    }
  }
}

}  // namespace

std::vector<RepResult> compute_replicate(const ScenarioSpec& spec, long replicate,
                                         const std::vector<MiModel>& models) {
  const TrialDataset ds = simulate_trial(spec, replicate);
  std::vector<RepResult> out;
  out.reserve(models.size());
  for (MiModel model : models) {
    RepResult rr;
    rr.replicate = replicate;
    rr.model = model;
    const long m_count = model == MiModel::full ? 1 : spec.n_imputations;
    const ImputeResult ir = impute_sequential(ds, model, m_count);
    if (!ir.ok()) {
      rr.reason = ir.status == ImputeStatus::empty_pattern ? FailReason::empty_pattern
                                                           : FailReason::fit_failed;
      out.push_back(rr);
      continue;
    }
    std::vector<double> points, variances;
    points.reserve(ir.completed.size());
    variances.reserve(ir.completed.size());
    bool analysis_ok = true;
    for (const CompletedDataset& cd : ir.completed) {
      const AnalysisResult a = analyze(ds, cd);
      if (!a.ok) {
        analysis_ok = false;
        break;
      }
      points.push_back(a.estimate);
      variances.push_back(a.variance);
    }
    if (!analysis_ok) {
      rr.reason = FailReason::analysis_failed;
      out.push_back(rr);
      continue;
    }
    rr.est = model == MiModel::full ? single_estimate(points[0], variances[0])
                                    : rubin_pool(points, variances);
    rr.ok = true;
    rr.significant = rr.est.point > 0.0 && rr.est.p_value < 0.05;
    out.push_back(rr);
  }
  return out;
}

void run(const RunManifest& manifest_in) {
  RunManifest manifest = manifest_in;
  validate_manifest(manifest);
  manifest.models = effective_models(manifest.models);
  const fs::path dir(manifest.out_dir);
  fs::create_directories(dir);

  const std::uint64_t run_hash = manifest_hash(manifest);
  const fs::path journal_path = dir / "journal.csv";

  // results[scenario][replicate] -> per-model rows
  std::vector<std::vector<std::vector<RepResult>>> results(manifest.scenarios.size());
  for (std::size_t s = 0; s < manifest.scenarios.size(); ++s)
    results[s].resize(static_cast<std::size_t>(manifest.scenarios[s].n_sims));

  std::size_t reused = 0;
  if (manifest.resume && fs::exists(journal_path)) {
    std::ifstream in(journal_path);
    std::string line;
    bool hash_ok = false;
    if (std::getline(in, line)) {
      std::ostringstream want;
      want << "# run_hash=" << std::hex << run_hash;
      hash_ok = line == want.str();
    }
    if (hash_ok) {
      std::map<std::pair<long, long>, std::map<std::string, RepResult>> partial;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("scenario_index,", 0) == 0) continue;
        JournalRow row;
        if (!parse_journal_row(line, manifest.models, &row)) continue;
        if (row.scenario_index < 0 ||
            row.scenario_index >= static_cast<long>(manifest.scenarios.size()))
          continue;
        if (row.result.replicate < 0 ||
            row.result.replicate >= manifest.scenarios[static_cast<std::size_t>(
                                        row.scenario_index)].n_sims)
          continue;
        partial[{row.scenario_index, row.result.replicate}].emplace(
            model_name(row.result.model), row.result);
      }
      for (const auto& [key, by_model] : partial) {
        if (by_model.size() != manifest.models.size()) continue;
        std::vector<RepResult> rows;
        for (MiModel m : manifest.models) rows.push_back(by_model.at(model_name(m)));
        results[static_cast<std::size_t>(key.first)][static_cast<std::size_t>(
            key.second)] = std::move(rows);
        ++reused;
      }
    }
  }

  std::vector<std::pair<std::size_t, long>> tasks;
  for (std::size_t s = 0; s < manifest.scenarios.size(); ++s)
    for (long rep = 0; rep < manifest.scenarios[s].n_sims; ++rep)
      if (results[s][static_cast<std::size_t>(rep)].empty()) tasks.emplace_back(s, rep);

  std::ofstream journal(journal_path, std::ios::trunc);
  if (!journal) throw std::runtime_error("runner: cannot write " + journal_path.string());
  journal << "# run_hash=" << std::hex << run_hash << std::dec << "\n"
          << kRepHeader << "\n";
  std::mutex journal_mu;
  for (std::size_t s = 0; s < manifest.scenarios.size(); ++s)
    for (const auto& rows : results[s])
      for (const RepResult& r : rows)
        journal << rep_row(static_cast<long>(s), manifest.scenarios[s].name, r) << "\n";
  journal.flush();

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const std::size_t n_workers = std::max<std::size_t>(
      1, std::min({static_cast<std::size_t>(std::max(manifest.workers, 1)),
                   static_cast<std::size_t>(hw), std::max<std::size_t>(tasks.size(), 1)}));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string fail_message;
  std::mutex fail_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size() || failed.load()) return;
      const auto [s, rep] = tasks[t];
      try {
        std::vector<RepResult> rows =
            compute_replicate(manifest.scenarios[s], rep, manifest.models);
        {
          std::lock_guard<std::mutex> lock(journal_mu);
          for (const RepResult& r : rows)
            journal << rep_row(static_cast<long>(s), manifest.scenarios[s].name, r) << "\n";
          journal.flush();
        }
        results[s][static_cast<std::size_t>(rep)] = std::move(rows);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mu);
        failed.store(true);
        fail_message = e.what();
        return;
      }
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failed.load()) throw std::runtime_error("runner: replicate failed: " + fail_message);

  // True effects (non-null scenarios only; cached across shared estimands).
  std::vector<TrueEffect> truths(manifest.scenarios.size());
  for (std::size_t s = 0; s < manifest.scenarios.size(); ++s) {
    if (manifest.scenarios[s].null_effect) {
      truths[s].theta = kNaN;
      truths[s].mcse = kNaN;
    } else {
      truths[s] = true_log_or(manifest.scenarios[s], manifest.oracle_n);
    }
  }

  std::ofstream reps(dir / "replicates.csv", std::ios::trunc);
  reps << kRepHeader << "\n";
  for (std::size_t s = 0; s < manifest.scenarios.size(); ++s)
    for (const auto& rows : results[s])
      for (const RepResult& r : rows)
        reps << rep_row(static_cast<long>(s), manifest.scenarios[s].name, r) << "\n";
  reps.close();

  std::vector<SummaryRow> summaries;
  for (std::size_t s = 0; s < manifest.scenarios.size(); ++s) {
    const ScenarioSpec& spec = manifest.scenarios[s];
    std::map<MiModel, std::vector<RepResult>> by_model;
    for (const auto& rows : results[s])
      for (const RepResult& r : rows) by_model[r.model].push_back(r);
    const std::vector<RepResult>& full_rows = by_model.at(MiModel::full);
    for (MiModel m : manifest.models)
      summaries.push_back(
          summarize(spec.name, m, by_model.at(m), full_rows, truths[s], spec.null_effect));
  }

  {
    std::ofstream os(dir / "summary.csv", std::ios::trunc);
    os << "scenario,model,null,n_sims,n_fitted,fitted_pct,theta_true,mean_point,point_mcse,"
          "bias_pct,bias_mcse_pct,emp_se,emp_se_mcse,mean_model_se,modse_err_pct,"
          "modse_err_mcse_pct,mean_halfwidth,halfwidth_change_pct,halfwidth_change_mcse_pct,"
          "coverage_pct,coverage_mcse_pct,coverage_change_pct,sig_rate_pct,sig_rate_mcse_pct\n";
    for (const SummaryRow& r : summaries) {
      os << r.scenario << ',' << model_name(r.model) << ',' << (r.null_scenario ? 1 : 0) << ','
         << r.n_sims << ',' << r.n_fitted << ',' << num(r.fitted_pct) << ','
         << num(r.theta_true) << ',' << num(r.mean_point) << ',' << num(r.point_mcse) << ','
         << num(r.bias_pct) << ',' << num(r.bias_mcse_pct) << ',' << num(r.emp_se) << ','
         << num(r.emp_se_mcse) << ',' << num(r.mean_model_se) << ',' << num(r.modse_err_pct)
         << ',' << num(r.modse_err_mcse_pct) << ',' << num(r.mean_halfwidth) << ','
         << num(r.halfwidth_change_pct) << ',' << num(r.halfwidth_change_mcse_pct) << ','
         << num(r.coverage_pct) << ',' << num(r.coverage_mcse_pct) << ','
         << num(r.coverage_change_pct) << ',' << num(r.sig_rate_pct) << ','
         << num(r.sig_rate_mcse_pct) << "\n";
    }
  }
  {
    std::ofstream os(dir / "convergence.csv", std::ios::trunc);
    os << "scenario,model,n_sims,n_fitted,fitted_pct,n_empty_pattern,n_fit_failed,"
          "n_analysis_failed\n";
    for (const SummaryRow& r : summaries)
      os << r.scenario << ',' << model_name(r.model) << ',' << r.n_sims << ',' << r.n_fitted
         << ',' << num(r.fitted_pct) << ',' << r.n_empty_pattern << ',' << r.n_fit_failed
         << ',' << r.n_analysis_failed << "\n";
  }
  {
    std::ofstream os(dir / "false_positive.csv", std::ios::trunc);
    os << "scenario,model,n_fitted,false_positive_pct,mcse_pct\n";
    for (const SummaryRow& r : summaries)
      if (r.null_scenario)
        os << r.scenario << ',' << model_name(r.model) << ',' << r.n_fitted << ','
           << num(r.sig_rate_pct) << ',' << num(r.sig_rate_mcse_pct) << "\n";
  }
  {
    std::ofstream os(dir / "modse.csv", std::ios::trunc);
    os << "scenario,model,n_fitted,emp_se,mean_model_se,modse_err_pct,modse_err_mcse_pct\n";
    for (const SummaryRow& r : summaries)
      os << r.scenario << ',' << model_name(r.model) << ',' << r.n_fitted << ','
         << num(r.emp_se) << ',' << num(r.mean_model_se) << ',' << num(r.modse_err_pct) << ','
         << num(r.modse_err_mcse_pct) << "\n";
  }
  {
    std::ofstream os(dir / "plotdata.csv", std::ios::trunc);
    os << "scenario,model,n_fitted,measure,value,mcse\n";
    auto put = [&os](const SummaryRow& r, const char* measure, double v, double mcse) {
      os << r.scenario << ',' << model_name(r.model) << ',' << r.n_fitted << ',' << measure
         << ',' << num(v) << ',' << num(mcse) << "\n";
    };
    for (const SummaryRow& r : summaries) {
      put(r, "point", r.mean_point, r.point_mcse);
      put(r, "bias_pct", r.bias_pct, r.bias_mcse_pct);
      put(r, "emp_se", r.emp_se, r.emp_se_mcse);
      put(r, "modse_err_pct", r.modse_err_pct, r.modse_err_mcse_pct);
      put(r, "halfwidth_change_pct", r.halfwidth_change_pct, r.halfwidth_change_mcse_pct);
      put(r, "coverage_pct", r.coverage_pct, r.coverage_mcse_pct);
      put(r, "coverage_change_pct", r.coverage_change_pct, kNaN);
      put(r, r.null_scenario ? "false_positive_pct" : "power_pct", r.sig_rate_pct,
          r.sig_rate_mcse_pct);
      put(r, "fitted_pct", r.fitted_pct, kNaN);
    }
  }
  {
    nlohmann::json doc;
    doc["models"] = nlohmann::json::array();
    for (MiModel m : manifest.models) doc["models"].push_back(model_name(m));
    doc["oracle_n"] = manifest.oracle_n;
    doc["outputs"] = {"replicates.csv", "summary.csv",        "convergence.csv",
                      "false_positive.csv", "modse.csv",      "plotdata.csv"};
    doc["scenarios"] = nlohmann::json::array();
    for (std::size_t s = 0; s < manifest.scenarios.size(); ++s) {
      const ScenarioSpec& sc = manifest.scenarios[s];
      nlohmann::json j;
      j["name"] = sc.name;
      j["n_per_arm"] = sc.n_per_arm;
      j["n_sims"] = sc.n_sims;
      j["n_imputations"] = sc.n_imputations;
      j["master_seed"] = sc.master_seed;
      j["rho"] = sc.rho;
      j["omega"] = sc.omega;
      j["withdrawal_rate"] = sc.withdrawal_rate;
      j["null"] = sc.null_effect;
      j["copula_split"] = sc.copula_split;
      j["withdrawal_mode"] =
          sc.withdrawal_mode == WithdrawalMode::quota ? "quota" : "threshold";
      j["response_active_on"] = sc.active.on;
      j["response_active_off"] = sc.active.off;
      j["response_control_on"] = sc.control.on;
      j["response_control_off"] = sc.control.off;
      j["disc_active"] = sc.disc_active.incr;
      j["disc_control"] = sc.disc_control.incr;
      char hexbuf[20];
      std::snprintf(hexbuf, sizeof(hexbuf), "%016llx",
                    static_cast<unsigned long long>(dgm_hash(sc)));
      j["dgm_hash"] = hexbuf;
      std::snprintf(hexbuf, sizeof(hexbuf), "%016llx",
                    static_cast<unsigned long long>(estimand_hash(sc)));
      j["estimand_hash"] = hexbuf;
      if (sc.null_effect) {
        j["theta_true"] = nullptr;
      } else {
        j["theta_true"] = truths[s].theta;
        j["theta_true_mcse"] = truths[s].mcse;
        j["oracle_seed"] = truths[s].seed;
      }
      doc["scenarios"].push_back(j);
    }
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    os << doc.dump(2) << "\n";
  }

  if (manifest.dump_data || manifest.dump_imputations)
    for (const ScenarioSpec& spec : manifest.scenarios)
      dump_replicate_zero(manifest, spec, manifest.models, dir);

  journal.close();
  fs::remove(journal_path);

  if (reused > 0)
    std::cout << "resume: reused " << reused << " completed replicates\n";
  for (const ScenarioSpec& sc : manifest.scenarios)
    std::cout << "scenario " << sc.name << ": " << sc.n_sims << " replicates, "
              << manifest.models.size() << " models\n";
}

}  // namespace rdmi
