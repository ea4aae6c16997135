#include "aebs/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"

#include "aebs/parallel.hpp"
#include "aebs/rng.hpp"

namespace aebs {

namespace fs = std::filesystem;

GraphDenoiser make_denoiser(const AppConfig& cfg, std::uint64_t seed) {
  DenoiserConfig dc = cfg.denoiser;
  dc.init_seed = derive_seed(seed, {cfg.denoiser.init_seed, 0x696eULL});
  return GraphDenoiser(dc, cfg.diffusion.grid * cfg.diffusion.grid, cfg.diffusion.grid);
}

TrainedModel train_model(const AppConfig& cfg, std::uint64_t seed, std::ostream* metrics,
                         const std::string& checkpoint_dir, const std::string& resume_dir) {
  const TrainSetup setup = make_train_setup(cfg);
  TrainerState state;
  TrainedModel tm{resume_dir.empty() ? make_denoiser(cfg, seed) : load_checkpoint(resume_dir, &state), {}};
  TrainHooks hooks;
  hooks.metrics = metrics;
  if (!checkpoint_dir.empty()) {
    hooks.checkpoint = [&](const TrainerState& st) {
      std::ostringstream name;
      name << "step_" << std::setw(6) << std::setfill('0') << st.step;
      save_checkpoint((fs::path(checkpoint_dir) / name.str()).string(), tm.model, st, {{"seed", seed}});
    };
  }
  tm.result = train(tm.model, setup, cfg.train, seed, state, hooks);
  return tm;
}

Environment solve_environment(const AppConfig& cfg, std::uint64_t seed) {
  Environment env;
  env.net = cfg.network;
  env.gus = generate_gu_positions(cfg.network, cfg.scenario);
  env.grid = cfg.diffusion.grid;
  env.channel_seed = derive_seed(seed, {0x736fULL});
  return env;
}

SolveOptions solve_options(const AppConfig& cfg) {
  SolveOptions o;
  o.k_max = cfg.solve.k_max;
  o.tau = cfg.solve.tau;
  o.sca.tau = cfg.solve.sca_tau;
  o.sca.max_iters = cfg.solve.sca_max_iters;
  o.omega = cfg.train.omega;
  return o;
}

AlternateResult solve_with(const DenoiserModel& model, const AppConfig& cfg, std::uint64_t seed, bool rsma) {
  const Environment env = solve_environment(cfg, seed);
  const NoiseSchedule schedule = make_train_setup(cfg).schedule;
  const std::uint64_t sample_seed = derive_seed(seed, {0x616cULL});
  if (!rsma) return sdma_pipeline(model, schedule, env, solve_options(cfg), sample_seed);
  return alternate(model, schedule, env, solve_options(cfg), sample_seed);
}

std::vector<StepMetrics> random_curve(const AppConfig& cfg, std::uint64_t seed, std::ostream* metrics) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const TrainSetup setup = make_train_setup(cfg);
  const int M = cfg.train.trajectories;
  std::vector<StepMetrics> curve;
  for (int step = 0; step < cfg.train.steps; ++step) {
    Environment env = setup.env;
    env.channel_seed = step_channel_seed(seed, step);
    std::vector<double> rewards(M);
    std::vector<ConstraintReport> audits(M);
    for (int m = 0; m < M; ++m) {
      const SolutionBundle sol =
          random_policy(env, derive_seed(seed, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(m)}));
      const Evaluation ev = evaluate(sol, env, cfg.train.omega);
      rewards[m] = ev.reward;
      audits[m] = ev.audit;
    }
    StepMetrics sm = summarize_step(step, rewards, audits);
    sm.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    if (metrics) *metrics << metrics_to_json(sm).dump() << '\n';
    curve.push_back(sm);
  }
  return curve;
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "aebs") return SweepKind::Aebs;
  if (s == "gu") return SweepKind::Gu;
  if (s == "range") return SweepKind::Range;
  if (s == "steps" || s == "denoising-steps") return SweepKind::Steps;
  if (s == "lr") return SweepKind::Lr;
  throw std::invalid_argument("unknown sweep kind '" + s + "'");
}

const char* to_string(SweepKind k) {
  switch (k) {
    case SweepKind::Aebs: return "aebs";
    case SweepKind::Gu: return "gu";
    case SweepKind::Range: return "range";
    case SweepKind::Steps: return "steps";
    case SweepKind::Lr: return "lr";
  }
  return "?";
}

std::vector<double> default_grid(SweepKind k) {
  switch (k) {
    case SweepKind::Aebs: return {2, 3, 4, 5};
    case SweepKind::Gu: return {6, 9, 12, 15, 18};
    case SweepKind::Range: return {100, 150, 200, 250};
    case SweepKind::Steps: return {5, 15, 25};
    case SweepKind::Lr: return {1e-5, 1e-4, 1e-3};
  }
  return {};
}

AppConfig sweep_config(const AppConfig& base, SweepKind kind, double value, std::uint64_t seed) {
  AppConfig c = base;
  auto integral = [&](double lo, double hi, const char* what) {
    if (value != std::floor(value) || value < lo || value > hi) {
      std::ostringstream msg;
      msg << "sweep " << what << " value " << value << " outside [" << lo << ", " << hi << "]";
      throw std::invalid_argument(msg.str());
    }
    return static_cast<int>(value);
  };
  switch (kind) {
    case SweepKind::Aebs: c.network.num_aebs = integral(2, 5, "aebs"); break;
    case SweepKind::Gu: c.network.num_gus = integral(1, 18, "gu"); break;
    case SweepKind::Range:
      if (value < 100.0 || value > 250.0) throw std::invalid_argument("sweep range value outside [100, 250] m");
      c.network.comm_radius = value;
      break;
    case SweepKind::Steps:
      c.diffusion.steps = integral(1, 100, "steps");
      c.train.timestep_samples = std::min(c.train.timestep_samples, c.diffusion.steps);
      break;
    case SweepKind::Lr:
      if (!(value > 0.0 && value < 1.0)) throw std::invalid_argument("sweep lr value outside (0, 1)");
      c.train.learning_rate = value;
      break;
  }
  if (kind == SweepKind::Aebs || kind == SweepKind::Gu || kind == SweepKind::Range) c.scenario.seed = seed;
  c.validate();
  return c;
}

std::vector<SweepCell> run_sweep(const AppConfig& base, SweepKind kind, const std::vector<double>& grid,
                                 const std::vector<std::uint64_t>& seeds, unsigned workers) {
  std::vector<SweepCell> cells(grid.size() * seeds.size());
  const bool deploy = kind == SweepKind::Aebs || kind == SweepKind::Gu || kind == SweepKind::Range;
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        SweepCell& cell = cells[i];
        cell.value = grid[i / seeds.size()];
        cell.seed = seeds[i % seeds.size()];
        const auto start = std::chrono::steady_clock::now();
        try {
          AppConfig cfg = sweep_config(base, kind, cell.value, cell.seed);
          cfg.train.workers = 1;
          TrainedModel tm = train_model(cfg, cell.seed);
          cell.curve = tm.result.curve;
          const std::size_t tail = std::min<std::size_t>(10, cell.curve.size());
          for (std::size_t s = cell.curve.size() - tail; s < cell.curve.size(); ++s)
            cell.final_reward += cell.curve[s].mean_reward / static_cast<double>(tail);
          if (deploy) {
            const AlternateResult res = solve_with(tm.model, cfg, cell.seed);
            cell.utility = res.eval.rates.utility;
            cell.sum_rate = res.eval.rates.sum_rate;
            cell.coverage = res.eval.rates.coverage;
            cell.feasible = res.eval.feasible;
          }
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        cell.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      },
      workers);
  return cells;
}

namespace {

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '"') c = ' ';
  return s;
}

}  // namespace

void write_sweep_cells(std::ostream& out, SweepKind kind, const std::vector<SweepCell>& cells) {
  out << "# aebs sweep cells v1\n"
      << "kind,value,seed,utility,sum_rate,coverage,feasible,final_reward,wall_time,error\n"
      << std::setprecision(17);
  for (const auto& c : cells)
    out << to_string(kind) << ',' << c.value << ',' << c.seed << ',' << c.utility << ',' << c.sum_rate << ','
        << c.coverage << ',' << (c.feasible ? 1 : 0) << ',' << c.final_reward << ',' << c.wall_time << ','
        << csv_safe(c.error) << '\n';
}

std::vector<SweepStat> summarize_sweep(const std::vector<SweepCell>& cells) {
  std::vector<SweepStat> stats;
  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
  };
  for (std::size_t i = 0; i < cells.size();) {
    SweepStat st;
    st.value = cells[i].value;
    std::vector<double> cov, util, rate, fin;
    for (; i < cells.size() && cells[i].value == st.value; ++i) {
      if (!cells[i].error.empty()) continue;
      cov.push_back(cells[i].coverage);
      util.push_back(cells[i].utility);
      rate.push_back(cells[i].sum_rate);
      fin.push_back(cells[i].final_reward);
    }
    st.runs = static_cast<int>(cov.size());
    mean_std(cov, st.coverage_mean, st.coverage_std);
    mean_std(util, st.utility_mean, st.utility_std);
    mean_std(rate, st.sum_rate_mean, st.sum_rate_std);
    mean_std(fin, st.final_reward_mean, st.final_reward_std);
    st.coverage_se = st.runs > 0 ? st.coverage_std / std::sqrt(static_cast<double>(st.runs)) : 0.0;
    stats.push_back(st);
  }
  return stats;
}

void write_sweep_summary(std::ostream& out, SweepKind kind, const std::vector<SweepCell>& cells) {
  out << "# aebs sweep summary v1 (" << to_string(kind) << ")\n"
      << "value,runs,utility_mean,utility_std,sum_rate_mean,sum_rate_std,coverage_mean,coverage_std,coverage_se,"
         "final_reward_mean,final_reward_std\n"
      << std::setprecision(17);
  for (const auto& s : summarize_sweep(cells))
    out << s.value << ',' << s.runs << ',' << s.utility_mean << ',' << s.utility_std << ',' << s.sum_rate_mean << ','
        << s.sum_rate_std << ',' << s.coverage_mean << ',' << s.coverage_std << ',' << s.coverage_se << ','
        << s.final_reward_mean << ',' << s.final_reward_std << '\n';
}

void write_sweep_curves(std::ostream& out, SweepKind kind, const std::vector<SweepCell>& cells) {
  out << "# aebs sweep curves v1 (" << to_string(kind) << ")\n"
      << "value,seed,step,mean_reward,max_reward\n"
      << std::setprecision(17);
  for (const auto& c : cells)
    for (const auto& m : c.curve)
      out << c.value << ',' << c.seed << ',' << m.step << ',' << m.mean_reward << ',' << m.max_reward << '\n';
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string reward_mode;
};

void write_common(const fs::path& dir, const AppConfig& cfg, std::uint64_t seed) {
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << config_to_json(cfg).dump(2) << '\n';
  std::ofstream(dir / "seed.txt") << seed << '\n';
}

double final_mean(const std::vector<StepMetrics>& curve) {
  const std::size_t tail = std::min<std::size_t>(10, curve.size());
  double s = 0.0;
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) s += curve[i].mean_reward;
  return tail > 0 ? s / static_cast<double>(tail) : 0.0;
}

void write_summary(const fs::path& dir, const std::string& policy, const std::vector<StepMetrics>& curve) {
  std::ofstream(dir / "summary.json") << nlohmann::json{{"policy", policy},
                                                        {"steps", curve.size()},
                                                        {"final10_mean_reward", final_mean(curve)}}
                                             .dump(2)
                                      << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint deployment, association and beamforming optimizer for aerial base stations", "aebsopt"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--seed", g.seed, "root seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--reward-mode", g.reward_mode, "exact or surrogate")->check(CLI::IsMember({"exact", "surrogate"}));

  auto* train_cmd = app.add_subcommand("train", "reward training of the denoiser")->fallthrough();
  std::string resume;
  train_cmd->add_option("--resume", resume, "checkpoint directory to continue from");

  auto* solve_cmd = app.add_subcommand("solve", "alternating deployment and beamforming optimization")->fallthrough();
  std::string model_dir;
  solve_cmd->add_option("--model", model_dir, "trained checkpoint (trains in-process when omitted)");

  auto* sca_cmd = app.add_subcommand("sca", "beamforming and rate-splitting solve on a fixed instance")->fallthrough();
  std::string instance;
  sca_cmd->add_option("--instance", instance, "instance JSON with placement and association")->required();

  auto* base_cmd = app.add_subcommand("baseline", "comparator policies")->fallthrough();
  std::string which;
  base_cmd->add_option("policy", which, "random, sdma or pg")->required()->check(CLI::IsMember({"random", "sdma", "pg"}));

  auto* sweep_cmd = app.add_subcommand("sweep", "seeded experiment sweeps")->fallthrough();
  std::string kind_name;
  std::vector<double> grid;
  bool empty_grid = false;
  int num_seeds = 5;
  unsigned workers = 1;
  sweep_cmd->add_option("kind", kind_name, "aebs, gu, range, steps (denoising-steps) or lr")
      ->required()
      ->check(CLI::IsMember({"aebs", "gu", "range", "steps", "denoising-steps", "lr"}));
  auto* grid_opt = sweep_cmd->add_option("--grid", grid, "comma-separated grid values")->delimiter(',');
  sweep_cmd->add_flag("--empty-grid", empty_grid, "run an empty grid (header-only output)");
  sweep_cmd->add_option("--seeds", num_seeds, "seeds per grid point")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--workers", workers, "parallel cells");

  auto* check_cmd = app.add_subcommand("check", "constraint audit of a solution file")->fallthrough();
  std::string solution_path;
  check_cmd->add_option("--solution", solution_path, "solution.json to audit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return e.get_exit_code() != 0 ? e.get_exit_code() : 1;
  }

  if (g.config.empty()) {
    err << "error: --config is required\n";
    return 2;
  }
  AppConfig cfg;
  try {
    cfg = load_config(g.config);
    if (!g.reward_mode.empty()) cfg.train.reward_mode = reward_mode_from_string(g.reward_mode);
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const fs::path dir(g.out);
  try {
    if (*train_cmd) {
      write_common(dir, cfg, g.seed);
      std::ofstream metrics(dir / "metrics.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
      TrainedModel tm = train_model(cfg, g.seed, &metrics, (dir / "checkpoints").string(), resume);
      save_checkpoint((dir / "model").string(), tm.model, tm.result.state, {{"seed", g.seed}});
      write_summary(dir, "jsgd", tm.result.curve);
      out << "trained " << tm.result.curve.size() << " steps, final mean reward " << final_mean(tm.result.curve)
          << '\n';
    } else if (*solve_cmd) {
      write_common(dir, cfg, g.seed);
      std::optional<GraphDenoiser> model;
      if (!model_dir.empty()) {
        model.emplace(load_checkpoint(model_dir, nullptr));
      } else {
        std::ofstream metrics(dir / "metrics.jsonl");
        model.emplace(train_model(cfg, g.seed, &metrics).model);
      }
      const AlternateResult res = solve_with(*model, cfg, g.seed);
      write_run(dir.string(), cfg, g.seed, res);
      out << "utility " << res.eval.rates.utility << " feasible " << (res.eval.feasible ? "true" : "false") << '\n';
    } else if (*sca_cmd) {
      write_common(dir, cfg, g.seed);
      std::ifstream in(instance);
      if (!in) throw std::runtime_error("cannot open instance '" + instance + "'");
      const nlohmann::json inst = nlohmann::json::parse(in);
      Environment env = solve_environment(cfg, g.seed);
      if (inst.contains("channel_seed")) env.channel_seed = inst.at("channel_seed").get<std::uint64_t>();
      SolutionBundle sol;
      for (const auto& p : inst.at("placement")) sol.placement.positions.push_back({p.at(0), p.at(1), p.at(2)});
      const auto& rows = inst.at("association");
      sol.decided = Association(sol.placement.size(), cfg.network.num_gus);
      if (static_cast<int>(rows.size()) != sol.placement.size())
        throw std::invalid_argument("instance: association rows must match placement");
      for (int k = 0; k < sol.placement.size(); ++k) {
        const std::string row = rows[k].get<std::string>();
        if (static_cast<int>(row.size()) != cfg.network.num_gus)
          throw std::invalid_argument("instance: association row length must equal num_gus");
        for (int n = 0; n < cfg.network.num_gus; ++n) sol.decided.set(k, n, row[n] == '1');
      }
      sol.assoc = drop_multi_assigned(sol.decided);
      ScaOptions so = solve_options(cfg).sca;
      const ScaResult res = run_sca(sol.assoc, env.channels(sol.placement), cfg.network, so);
      sol.resources = res.solution;
      const Evaluation ev = evaluate(sol, env, cfg.train.omega);
      std::ofstream trace(dir / "sca_trace.csv");
      write_sca_trace(trace, res);
      std::ofstream(dir / "solution.json") << solution_to_json(sol, ev).dump(2) << '\n';
      std::ofstream rates(dir / "rates.csv");
      write_rate_csv(rates, ev.rates);
      out << "rho " << res.rho << " iterations " << res.iterations << '\n';
    } else if (*base_cmd) {
      write_common(dir, cfg, g.seed);
      std::ofstream metrics(dir / "metrics.jsonl");
      if (which == "random") {
        write_summary(dir, "random", random_curve(cfg, g.seed, &metrics));
      } else if (which == "pg") {
        const TrainSetup setup = make_train_setup(cfg);
        DirectPolicy policy(cfg.network.num_aebs, cfg.network.num_gus, cfg.diffusion.grid * cfg.diffusion.grid, 32,
                            derive_seed(g.seed, {0x7067ULL}));
        TrainHooks hooks;
        hooks.metrics = &metrics;
        write_summary(dir, "direct_pg", train_direct(policy, setup, cfg.train, g.seed, hooks).curve);
      } else {
        TrainSetup setup = make_train_setup(cfg);
        setup.reward.rsma = false;
        GraphDenoiser model = make_denoiser(cfg, g.seed);
        TrainHooks hooks;
        hooks.metrics = &metrics;
        const TrainResult tr = train(model, setup, cfg.train, g.seed, {}, hooks);
        write_summary(dir, "jsgd_sdma", tr.curve);
        write_run(dir.string(), cfg, g.seed, solve_with(model, cfg, g.seed, false));
      }
      out << "baseline " << which << " written to " << dir.string() << '\n';
    } else if (*sweep_cmd) {
      fs::create_directories(dir);
      const SweepKind kind = sweep_kind_from_string(kind_name);
      if (empty_grid) grid.clear();
      else if (grid_opt->count() == 0) grid = default_grid(kind);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < num_seeds; ++i) seeds.push_back(g.seed + static_cast<std::uint64_t>(i));
      for (double v : grid) sweep_config(cfg, kind, v, g.seed);  // reject bad grids before any work
      const auto cells = run_sweep(cfg, kind, grid, seeds, workers);
      const std::string stem = std::string("sweep_") + to_string(kind);
      std::ofstream c(dir / (stem + "_cells.csv")), s(dir / (stem + "_summary.csv"));
      write_sweep_cells(c, kind, cells);
      write_sweep_summary(s, kind, cells);
      if (kind == SweepKind::Steps || kind == SweepKind::Lr) {
        std::ofstream cv(dir / (stem + "_curves.csv"));
        write_sweep_curves(cv, kind, cells);
      }
      int failed = 0;
      for (const auto& cell : cells) failed += !cell.error.empty();
      out << "sweep " << to_string(kind) << ": " << cells.size() << " cells, " << failed << " failed\n";
    } else if (*check_cmd) {
      std::ifstream in(solution_path);
      if (!in) throw std::runtime_error("cannot open solution '" + solution_path + "'");
      const nlohmann::json doc = nlohmann::json::parse(in);
      const SolutionBundle sol = solution_from_json(doc);
      const Environment env = solve_environment(cfg, g.seed);
      const Evaluation ev = evaluate(sol, env, cfg.train.omega);
      const bool label_ok = ev.feasible == sol.feasible;
      const bool utility_ok = std::abs(ev.rates.utility - sol.utility) < 1e-9;
      nlohmann::json report = solution_to_json(sol, ev);
      report["label_confirmed"] = label_ok;
      report["utility_confirmed"] = utility_ok;
      out << report.dump(2) << '\n';
      return label_ok && utility_ok ? 0 : 3;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace aebs
