// tangle: three-tangle of three-qubit mixed states by replica-exchange
// minimization of a penalty-augmented convex-roof objective.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tangle/errors.hpp"
#include "tangle/harness.hpp"
#include "tangle/kernels.hpp"
#include "tangle/qstate.hpp"

namespace {

constexpr double kUnsetParam = std::numeric_limits<double>::quiet_NaN();

struct GlobalOpts {
  double kappa = 1e6;
  double tmax = 100.0;
  double tmin = 1e-6;
  int replicas = 64;
  double sweeps = 2e5;
  int np = 0; // 0 = auto
  uint64_t seed = 0;
  std::string out;
  int workers = 0;
  int exchange_period = 1;
  int tune_iterations = 30;
};

struct ScenarioOpts {
  std::string family;
  double p = 0.0;
  double n = 2.0;
  double a = 0.2;
  double c = 0.2;
  double d = 0.2;
  std::string file;
};

tangle::EngineConfig engine_config(const GlobalOpts& g) {
  tangle::EngineConfig cfg;
  cfg.kappa = g.kappa;
  cfg.t_max = g.tmax;
  cfg.t_min = g.tmin;
  cfg.replicas = g.replicas;
  cfg.sweeps = static_cast<int64_t>(g.sweeps);
  cfg.np = g.np;
  cfg.seed = g.seed;
  cfg.workers = g.workers;
  cfg.exchange_period = g.exchange_period;
  cfg.tune_iterations = g.tune_iterations;
  return cfg;
}

tangle::ScenarioSpec scenario_spec(const ScenarioOpts& s) {
  tangle::ScenarioSpec spec;
  spec.family = tangle::family_from_name(s.family);
  spec.p = s.p;
  spec.n = s.n;
  spec.a = s.a;
  spec.c = s.c;
  spec.d = s.d;
  spec.path = s.file;
  if (spec.family == tangle::Family::FromFile && spec.path.empty())
    throw std::invalid_argument("--family file requires --file <path>");
  return spec;
}

void add_scenario_options(CLI::App* cmd, ScenarioOpts& s) {
  cmd->add_option("--family", s.family,
                  "state family: ghzw | gghzgw | ghzwflipw | ghznoise | file")
      ->required();
  cmd->add_option("--p", s.p, "GHZ mixing weight in [0, 1]");
  cmd->add_option("--n", s.n, "flipped-W weight divisor (ghzwflipw)");
  cmd->add_option("--a", s.a, "generalized GHZ amplitude a (gghzgw)");
  cmd->add_option("--c", s.c, "generalized W amplitude c (gghzgw)");
  cmd->add_option("--d", s.d, "generalized W amplitude d (gghzgw)");
  cmd->add_option("--file", s.file, "density-matrix file (family = file)");
}

void print_point(const tangle::RunRecord& rec) {
  std::printf("family=%s p=%.6g np=%d\n",
              tangle::family_name(rec.scenario.family).c_str(), rec.scenario.p,
              rec.np_used);
  std::printf("tau3=%.17g\n", rec.tau3);
  std::printf("r2=%.17g\n", rec.r2);
  std::printf("wall_time_s=%.2f tuner_converged=%d status=%s\n", rec.wall_time_s,
              rec.tuner_converged ? 1 : 0, rec.status.c_str());
}

void write_csv(const std::vector<tangle::RunRecord>& records,
               const std::string& out_dir, const std::string& name) {
  std::ostringstream csv;
  csv << tangle::csv_header() << "\n";
  for (const auto& rec : records) csv << tangle::csv_row(rec) << "\n";
  std::cout << csv.str();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / name);
    f << csv.str();
  }
}

void persist_all(const std::vector<tangle::RunRecord>& records,
                 const std::string& out_dir) {
  if (out_dir.empty()) return;
  for (const auto& rec : records) tangle::persist_record(rec, out_dir);
}

std::vector<double> make_grid(double from, double to, double step) {
  if (step <= 0.0) throw std::invalid_argument("--p-step must be positive");
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    const double p = from + i * step;
    if (p > to + step * 1e-9) break;
    grid.push_back(std::min(p, to));
  }
  return grid;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"three-tangle of three-qubit mixed states via replica-exchange "
               "Monte Carlo"};
  app.fallthrough();
  app.set_config("--config", "", "flat key=value file with the same keys as the flags");
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--kappa", g.kappa, "constraint penalty weight")->capture_default_str();
  app.add_option("--tmax", g.tmax, "hottest replica temperature")->capture_default_str();
  app.add_option("--tmin", g.tmin, "coldest replica temperature")->capture_default_str();
  app.add_option("--replicas", g.replicas, "number of replicas")->capture_default_str();
  app.add_option("--sweeps", g.sweeps, "production sweeps")->capture_default_str();
  app.add_option("--np", g.np, "partition count; 0 = auto by target rank")
      ->capture_default_str();
  app.add_option("--seed", g.seed, "base random seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory for records/CSV");
  app.add_option("--workers", g.workers, "replica-advancing threads; 0 = hardware")
      ->capture_default_str();
  app.add_option("--exchange-period", g.exchange_period,
                 "sweeps between exchange rounds")
      ->capture_default_str();
  app.add_option("--tune-iters", g.tune_iterations, "ladder adaptation rounds")
      ->capture_default_str();

  // pure
  auto* pure_cmd = app.add_subcommand("pure", "tau3 of a named pure state");
  std::string pure_family;
  double pa = kUnsetParam, pb = kUnsetParam, pc = kUnsetParam, pd = kUnsetParam,
         pf = kUnsetParam;
  pure_cmd->add_option("--family", pure_family,
                       "ghz | w | flippedw | gghz | gw")
      ->required();
  pure_cmd->add_option("--a", pa, "gghz amplitude a");
  pure_cmd->add_option("--b", pb, "gghz amplitude b (default sqrt(1-a^2))");
  pure_cmd->add_option("--c", pc, "gw amplitude c");
  pure_cmd->add_option("--d", pd, "gw amplitude d");
  pure_cmd->add_option("--f", pf, "gw amplitude f (default sqrt(1-c^2-d^2))");

  // point
  auto* point_cmd = app.add_subcommand("point", "tau3 of one mixed state");
  ScenarioOpts point_s;
  add_scenario_options(point_cmd, point_s);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "tau3 over a grid of p");
  ScenarioOpts sweep_s;
  double p_from = 0.0, p_to = 1.0, p_step = 0.05;
  add_scenario_options(sweep_cmd, sweep_s);
  sweep_cmd->add_option("--p-from", p_from, "grid start")->capture_default_str();
  sweep_cmd->add_option("--p-to", p_to, "grid end")->capture_default_str();
  sweep_cmd->add_option("--p-step", p_step, "grid step")->capture_default_str();

  // npsweep
  auto* npsweep_cmd =
      app.add_subcommand("npsweep", "tau3 convergence against partition count");
  ScenarioOpts npsweep_s;
  std::string np_list_arg;
  add_scenario_options(npsweep_cmd, npsweep_s);
  npsweep_cmd->add_option("--np", np_list_arg, "comma-separated partition counts")
      ->required();

  // compare-csa
  auto* csa_cmd = app.add_subcommand(
      "compare-csa", "replica exchange vs simulated annealing, matched budgets");
  ScenarioOpts csa_s;
  int n_seeds = 10;
  double ref_tau3 = kUnsetParam;
  add_scenario_options(csa_cmd, csa_s);
  csa_cmd->add_option("--seeds", n_seeds, "number of seeds (>= 3)")
      ->capture_default_str();
  csa_cmd->add_option("--ref", ref_tau3, "analytical tau3 for error reporting");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "ladder diagnostics only");
  ScenarioOpts tune_s;
  add_scenario_options(tune_cmd, tune_s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*pure_cmd) {
      tangle::StateFamily family;
      if (pure_family == "ghz") {
        family = tangle::Ghz{};
      } else if (pure_family == "w") {
        family = tangle::W{};
      } else if (pure_family == "flippedw") {
        family = tangle::FlippedW{};
      } else if (pure_family == "gghz") {
        if (!std::isfinite(pa)) throw std::invalid_argument("gghz requires --a");
        const double b = std::isfinite(pb) ? pb : std::sqrt(1.0 - pa * pa);
        family = tangle::GeneralizedGhz{pa, b};
      } else if (pure_family == "gw") {
        if (!std::isfinite(pc) || !std::isfinite(pd))
          throw std::invalid_argument("gw requires --c and --d");
        const double f =
            std::isfinite(pf) ? pf : std::sqrt(1.0 - pc * pc - pd * pd);
        family = tangle::GeneralizedW{pc, pd, f};
      } else {
        throw std::invalid_argument("unknown pure family: " + pure_family);
      }
      std::printf("tau3=%.17g\n",
                  tangle::three_tangle_pure(tangle::make_pure(family)));
      return 0;
    }

    if (*point_cmd) {
      const auto rec = tangle::run_point(scenario_spec(point_s), engine_config(g));
      print_point(rec);
      if (!g.out.empty()) tangle::persist_record(rec, g.out);
      return 0;
    }

    if (*sweep_cmd) {
      const auto records =
          tangle::sweep_p(scenario_spec(sweep_s), make_grid(p_from, p_to, p_step),
                          engine_config(g));
      write_csv(records, g.out,
                "sweep_" + tangle::family_name(scenario_spec(sweep_s).family) +
                    ".csv");
      persist_all(records, g.out);
      return 0;
    }

    if (*npsweep_cmd) {
      std::vector<int> np_list;
      std::stringstream ss(np_list_arg);
      for (std::string tok; std::getline(ss, tok, ',');) {
        if (!tok.empty()) np_list.push_back(std::stoi(tok));
      }
      if (np_list.empty()) throw std::invalid_argument("--np list is empty");
      const auto res =
          tangle::sweep_np(scenario_spec(npsweep_s), np_list, engine_config(g));
      std::printf("np  tau3  delta_tau3\n");
      for (size_t i = 0; i < res.records.size(); ++i)
        std::printf("%d %.17g %.17g\n", res.records[i].np_used,
                    res.records[i].tau3, res.delta_tau3[i]);
      write_csv(res.records, g.out,
                "npsweep_" + tangle::family_name(scenario_spec(npsweep_s).family) +
                    ".csv");
      persist_all(res.records, g.out);
      return 0;
    }

    if (*csa_cmd) {
      const auto cmp = tangle::compare_csa(scenario_spec(csa_s), engine_config(g),
                                           n_seeds, ref_tau3);
      std::cout << cmp.to_text();
      if (!g.out.empty()) {
        std::filesystem::create_directories(g.out);
        std::ofstream f(std::filesystem::path(g.out) / "csa_report.json");
        f << cmp.to_json() << "\n";
      }
      return 0;
    }

    if (*tune_cmd) {
      tangle::EnergyParams params;
      params.kappa = g.kappa;
      params.target = tangle::make_density(scenario_spec(tune_s));
      tangle::EngineConfig cfg = engine_config(g);
      if (cfg.np <= 0)
        cfg.np = std::max(4, tangle::validate_density(params.target).rank);
      const auto report = tangle::tune_ladder(cfg, params);
      std::printf("converged=%d max_last_rel_change=%.3g\n",
                  report.converged ? 1 : 0, report.max_last_rel_change);
      double rate_min = 1.0, rate_max = 0.0;
      for (double r : report.pair_rates) {
        rate_min = std::min(rate_min, r);
        rate_max = std::max(rate_max, r);
      }
      std::printf("pair_rate_min=%.4f pair_rate_max=%.4f pairs=%zu\n", rate_min,
                  rate_max, report.pair_rates.size());
      std::printf("beta rate_to_next step_scale\n");
      for (int i = 0; i < report.ladder.size(); ++i) {
        if (i + 1 < report.ladder.size())
          std::printf("%.10g %.4f %.3g\n", report.ladder.betas[i],
                      report.pair_rates[i], report.step_scales[i]);
        else
          std::printf("%.10g - %.3g\n", report.ladder.betas[i],
                      report.step_scales[i]);
      }
      return 0;
    }
  } catch (const tangle::NoFeasiblePoint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const tangle::FileFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
