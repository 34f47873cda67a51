#include "tangle/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "tangle/errors.hpp"
#include "tangle/qstate.hpp"

namespace tangle {

using json = nlohmann::ordered_json;

namespace {

constexpr size_t kTraceKeep = 256;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<double> subsample(const std::vector<double>& trace) {
  if (trace.size() <= kTraceKeep) return trace;
  std::vector<double> out;
  out.reserve(kTraceKeep);
  const size_t n = trace.size();
  for (size_t k = 0; k < kTraceKeep; ++k)
    out.push_back(trace[k * (n - 1) / (kTraceKeep - 1)]);
  return out;
}

json dnum(double v) {
  if (std::isfinite(v)) return v;
  return nullptr; // NaN/inf marks a failed run
}

double as_double(const json& j) {
  return j.is_null() ? kNan : j.get<double>();
}

json scenario_to_json(const ScenarioSpec& s) {
  return json{{"family", family_name(s.family)}, {"p", s.p},    {"n", s.n},
              {"a", s.a},                        {"c", s.c},    {"d", s.d},
              {"path", s.path}};
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  s.family = family_from_name(j.at("family").get<std::string>());
  s.p = j.at("p").get<double>();
  s.n = j.at("n").get<double>();
  s.a = j.at("a").get<double>();
  s.c = j.at("c").get<double>();
  s.d = j.at("d").get<double>();
  s.path = j.at("path").get<std::string>();
  return s;
}

json config_to_json(const EngineConfig& c) {
  return json{{"t_max", c.t_max},
              {"t_min", c.t_min},
              {"ladder_c", c.ladder_c},
              {"replicas", c.replicas},
              {"sweeps", c.sweeps},
              {"exchange_period", c.exchange_period},
              {"kappa", c.kappa},
              {"np", c.np},
              {"seed", c.seed},
              {"tune_iterations", c.tune_iterations},
              {"tune_sweeps", c.tune_sweeps},
              {"residual_threshold", c.residual_threshold},
              {"step_accept_target", c.step_accept_target},
              {"workers", c.workers}};
}

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  c.t_max = j.at("t_max").get<double>();
  c.t_min = j.at("t_min").get<double>();
  c.ladder_c = j.at("ladder_c").get<double>();
  c.replicas = j.at("replicas").get<int>();
  c.sweeps = j.at("sweeps").get<int64_t>();
  c.exchange_period = j.at("exchange_period").get<int>();
  c.kappa = j.at("kappa").get<double>();
  c.np = j.at("np").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.tune_iterations = j.at("tune_iterations").get<int>();
  c.tune_sweeps = j.at("tune_sweeps").get<int>();
  c.residual_threshold = j.at("residual_threshold").get<double>();
  c.step_accept_target = j.at("step_accept_target").get<double>();
  c.workers = j.at("workers").get<int>();
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::string RunRecord::to_json() const {
  json j;
  j["scenario"] = scenario_to_json(scenario);
  j["config"] = config_to_json(config);
  j["seed"] = seed;
  j["np_used"] = np_used;
  j["tau3"] = dnum(tau3);
  j["r2"] = dnum(r2);
  j["wall_time_s"] = wall_time_s;
  j["ladder_betas"] = ladder_betas;
  j["exchange_rates"] = exchange_rates;
  j["tuner_converged"] = tuner_converged;
  j["energy_trace"] = energy_trace;
  j["status"] = status;
  return j.dump(2);
}

RunRecord RunRecord::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunRecord rec;
  rec.scenario = scenario_from_json(j.at("scenario"));
  rec.config = config_from_json(j.at("config"));
  rec.seed = j.at("seed").get<uint64_t>();
  rec.np_used = j.at("np_used").get<int>();
  rec.tau3 = as_double(j.at("tau3"));
  rec.r2 = as_double(j.at("r2"));
  rec.wall_time_s = j.at("wall_time_s").get<double>();
  rec.ladder_betas = j.at("ladder_betas").get<std::vector<double>>();
  rec.exchange_rates = j.at("exchange_rates").get<std::vector<double>>();
  rec.tuner_converged = j.at("tuner_converged").get<bool>();
  rec.energy_trace = j.at("energy_trace").get<std::vector<double>>();
  rec.status = j.at("status").get<std::string>();
  return rec;
}

uint64_t derive_seed(uint64_t base, uint64_t index) {
  return Rng::mix(base, 0x506f696e74ULL ^ index); // "Point"
}

namespace {

RunRecord record_from_result(const ScenarioSpec& spec, const EngineConfig& cfg,
                             const RoofResult& res, double wall_s) {
  RunRecord rec;
  rec.scenario = spec;
  rec.config = cfg;
  rec.config.np = res.np;
  rec.seed = cfg.seed;
  rec.tau3 = res.tau3;
  rec.r2 = res.r2;
  rec.np_used = res.np;
  rec.wall_time_s = wall_s;
  rec.ladder_betas = res.ladder_betas;
  rec.exchange_rates = res.exchange_rates;
  rec.tuner_converged = res.tuner_converged;
  rec.energy_trace = subsample(res.energy_trace);
  rec.status = "ok";
  return rec;
}

} // namespace

RunRecord run_point(const ScenarioSpec& spec, const EngineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  EnergyParams params;
  params.kappa = config.kappa;
  params.target = make_density(spec);
  const DensityDiagnostics diag = validate_density(params.target);

  EngineConfig cfg = config;
  const bool auto_np = config.np <= 0;
  cfg.np = auto_np ? std::max(4, diag.rank) : config.np;

  RoofResult result = minimize(cfg, params);
  if (auto_np) {
    // Grow the partition count until the answer stops moving.
    while (cfg.np + 4 <= 20) {
      EngineConfig next = cfg;
      next.np = cfg.np + 4;
      const RoofResult refined = minimize(next, params);
      const double delta = std::abs(refined.tau3 - result.tau3);
      cfg = next;
      result = refined;
      if (delta < 1e-3) break;
    }
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record_from_result(spec, cfg, result, wall);
}

std::vector<RunRecord> sweep_p(const ScenarioSpec& tmpl,
                               const std::vector<double>& p_grid,
                               const EngineConfig& config) {
  std::vector<RunRecord> records;
  records.reserve(p_grid.size());
  for (size_t i = 0; i < p_grid.size(); ++i) {
    ScenarioSpec spec = tmpl;
    spec.p = p_grid[i];
    EngineConfig cfg = config;
    cfg.seed = derive_seed(config.seed, i);
    try {
      records.push_back(run_point(spec, cfg));
    } catch (const NoFeasiblePoint&) {
      RunRecord rec;
      rec.scenario = spec;
      rec.config = cfg;
      rec.seed = cfg.seed;
      rec.tau3 = kNan;
      rec.r2 = kNan;
      rec.status = "no_feasible_point";
      records.push_back(std::move(rec));
    } catch (const std::exception&) {
      RunRecord rec;
      rec.scenario = spec;
      rec.config = cfg;
      rec.seed = cfg.seed;
      rec.tau3 = kNan;
      rec.r2 = kNan;
      rec.status = "error";
      records.push_back(std::move(rec));
    }
  }
  return records;
}

NpSweepResult sweep_np(const ScenarioSpec& spec, const std::vector<int>& np_list,
                       const EngineConfig& config) {
  NpSweepResult out;
  out.records.reserve(np_list.size());
  for (size_t i = 0; i < np_list.size(); ++i) {
    EngineConfig cfg = config;
    cfg.np = np_list[i];
    cfg.seed = derive_seed(config.seed, i);
    try {
      out.records.push_back(run_point(spec, cfg));
    } catch (const NoFeasiblePoint&) {
      RunRecord rec;
      rec.scenario = spec;
      rec.config = cfg;
      rec.seed = cfg.seed;
      rec.np_used = cfg.np;
      rec.tau3 = kNan;
      rec.r2 = kNan;
      rec.status = "no_feasible_point";
      out.records.push_back(std::move(rec));
    }
  }
  double best = kNan;
  for (const auto& rec : out.records)
    if (std::isfinite(rec.tau3) && !(rec.tau3 >= best)) best = rec.tau3;
  out.delta_tau3.reserve(out.records.size());
  for (const auto& rec : out.records)
    out.delta_tau3.push_back(std::isfinite(rec.tau3) ? rec.tau3 - best : kNan);
  return out;
}

std::string CsaComparison::to_json() const {
  json j;
  json pt = json::array(), csa = json::array();
  for (double v : pt_tau3) pt.push_back(dnum(v));
  for (double v : csa_tau3) csa.push_back(dnum(v));
  j["pt_tau3"] = pt;
  j["csa_tau3"] = csa;
  j["pt_median"] = dnum(pt_median);
  j["csa_median"] = dnum(csa_median);
  j["pt_median_error"] = dnum(pt_median_error);
  j["csa_median_error"] = dnum(csa_median_error);
  j["pt_feasible"] = pt_feasible;
  j["csa_feasible"] = csa_feasible;
  j["reference_tau3"] = has_reference ? json(reference_tau3) : json(nullptr);
  return j.dump(2);
}

std::string CsaComparison::to_text() const {
  char buf[256];
  std::string out;
  out += "method   feasible  median_tau3";
  if (has_reference) out += "  median_error";
  out += "\n";
  std::snprintf(buf, sizeof buf, "replica  %zu/%zu   %.8g",
                static_cast<size_t>(pt_feasible), pt_tau3.size(), pt_median);
  out += buf;
  if (has_reference) {
    std::snprintf(buf, sizeof buf, "  %.3g", pt_median_error);
    out += buf;
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "annealing  %zu/%zu   %.8g",
                static_cast<size_t>(csa_feasible), csa_tau3.size(), csa_median);
  out += buf;
  if (has_reference) {
    std::snprintf(buf, sizeof buf, "  %.3g", csa_median_error);
    out += buf;
  }
  out += "\n";
  return out;
}

CsaComparison compare_csa(const ScenarioSpec& spec, const EngineConfig& config,
                          int n_seeds, double reference_tau3) {
  if (n_seeds < 3)
    throw std::invalid_argument("csa comparison needs at least 3 seeds");

  EnergyParams params;
  params.kappa = config.kappa;
  params.target = make_density(spec);

  CsaComparison cmp;
  cmp.has_reference = std::isfinite(reference_tau3);
  cmp.reference_tau3 = cmp.has_reference ? reference_tau3 : kNan;

  for (int i = 0; i < n_seeds; ++i) {
    EngineConfig cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<uint64_t>(i));
    double pt = kNan, sa = kNan;
    try {
      pt = minimize(cfg, params).tau3;
      cmp.pt_feasible += 1;
    } catch (const NoFeasiblePoint&) {
    }
    try {
      sa = csa_minimize(cfg, params).tau3;
      cmp.csa_feasible += 1;
    } catch (const NoFeasiblePoint&) {
    }
    cmp.pt_tau3.push_back(pt);
    cmp.csa_tau3.push_back(sa);
  }

  auto finite = [](const std::vector<double>& v) {
    std::vector<double> out;
    for (double x : v)
      if (std::isfinite(x)) out.push_back(x);
    return out;
  };
  cmp.pt_median = median(finite(cmp.pt_tau3));
  cmp.csa_median = median(finite(cmp.csa_tau3));

  if (cmp.has_reference) {
    // An infeasible run counts as an infinite error, not a free pass.
    auto errors = [&](const std::vector<double>& v) {
      std::vector<double> out;
      for (double x : v)
        out.push_back(std::isfinite(x) ? std::abs(x - reference_tau3)
                                       : std::numeric_limits<double>::infinity());
      return out;
    };
    cmp.pt_median_error = median(errors(cmp.pt_tau3));
    cmp.csa_median_error = median(errors(cmp.csa_tau3));
  } else {
    cmp.pt_median_error = kNan;
    cmp.csa_median_error = kNan;
  }
  return cmp;
}

std::string csv_header() {
  return "family,p,n,a,c,d,np,kappa,tmax,tmin,replicas,sweeps,seed,tau3,r2,"
         "wall_time_s,status";
}

std::string csv_row(const RunRecord& rec) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%d,%lld,"
                "%llu,%.17g,%.17g,%.3f,%s",
                family_name(rec.scenario.family).c_str(), rec.scenario.p,
                rec.scenario.n, rec.scenario.a, rec.scenario.c, rec.scenario.d,
                rec.np_used, rec.config.kappa, rec.config.t_max, rec.config.t_min,
                rec.config.replicas, static_cast<long long>(rec.config.sweeps),
                static_cast<unsigned long long>(rec.seed), rec.tau3, rec.r2,
                rec.wall_time_s, rec.status.c_str());
  return buf;
}

std::string persist_record(const RunRecord& rec, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  char name[160];
  std::snprintf(name, sizeof name, "run_%s_p%.6g_np%d_seed%llu.json",
                family_name(rec.scenario.family).c_str(), rec.scenario.p,
                rec.np_used, static_cast<unsigned long long>(rec.seed));
  const std::string path = (std::filesystem::path(out_dir) / name).string();
  std::ofstream out(path);
  out << rec.to_json() << "\n";
  return path;
}

} // namespace tangle
