#include "ddqn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ddqn/config.hpp"
#include "ddqn/errors.hpp"
#include "ddqn/harness.hpp"
#include "ddqn/neural.hpp"
#include "ddqn/svg_plot.hpp"

namespace ddqn::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> total_steps;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;

  void apply(RunConfig& cfg) const {
    if (seed) cfg.run.seed = *seed;
    if (total_steps) cfg.run.total_steps = *total_steps;
    if (out_dir) cfg.run.out_dir = *out_dir;
    if (jobs) cfg.jobs = *jobs;
    cfg.validate();
  }
};

void make_parent_dirs(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
}

std::string out_dir_or(const RunConfig& cfg, const std::string& fallback) {
  return cfg.run.out_dir.empty() ? fallback : cfg.run.out_dir;
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    const auto bars = load_bars(path);
    out << path << ": " << bars.size() << " valid bars";
    if (!bars.empty())
      out << ", timestamps " << bars.front().timestamp << " .. " << bars.back().timestamp;
    out << '\n';
    return kExitOk;
  } catch (const DataError& e) {
    err << path << ": line " << e.line_no << ": " << e.what() << '\n';
    return kExitValidation;
  }
}

int cmd_train(const std::string& config_path, const Overrides& ov, std::ostream& out) {
  RunConfig cfg = load_config(config_path);
  ov.apply(cfg);
  cfg.run.out_dir = out_dir_or(cfg, "runs/train");
  const Dataset ds = load_dataset(cfg.data);
  fs::create_directories(cfg.run.out_dir);
  save_config(cfg, (fs::path(cfg.run.out_dir) / "config_resolved.json").string());
  const auto spec = cfg.net.spec_for(cfg.env);
  const TrainResult res = train(ds.train, cfg.env, cfg.agent, spec, cfg.run, &ds.test);
  out << "trained " << nn::to_string(spec.arch) << " for " << cfg.run.total_steps << " steps, "
      << res.metrics.size() << " episodes; outputs in " << cfg.run.out_dir << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path, const std::string& scenario,
             const std::string& out_stem, std::ostream& out) {
  const RunConfig cfg = load_config(config_path);
  const Scenario s = scenario_from_string(scenario);
  const nn::Checkpoint ckpt = nn::load_checkpoint(ckpt_path);
  const Dataset ds = load_dataset(cfg.data);
  const EvalReport rep = evaluate(ckpt, ds.test, cfg.env, s, cfg.agent.batch_size, cfg.run.baseline_episodes);
  const std::string stem =
      out_stem.empty() ? (fs::path(out_dir_or(cfg, "runs/eval")) / ("eval_" + scenario)).string() : out_stem;
  make_parent_dirs(stem);
  save_report(rep, stem);
  out << std::setprecision(6) << "scenario " << scenario << ": return " << rep.final_return_pct
      << "% over " << rep.trades << " trade legs; random baseline " << rep.baseline_random_return_pct
      << " +- " << rep.baseline_random_stddev_pct << "%\nreport: " << stem << ".json\n";
  return kExitOk;
}

int cmd_baseline(const std::string& config_path, const Overrides& ov, const std::string& scenario,
                 std::ostream& out) {
  RunConfig cfg = load_config(config_path);
  ov.apply(cfg);
  const Dataset ds = load_dataset(cfg.data);
  const EnvConfig ev = evaluation_env(cfg.env, ds.test, scenario_from_string(scenario));
  const BaselineSummary b =
      random_baseline(ds.test, ev, stream_seed(cfg.run.seed, "baseline"), cfg.run.baseline_episodes);
  out << std::setprecision(6) << "random baseline (" << scenario << ", " << cfg.run.baseline_episodes
      << " episodes): " << b.mean << " +- " << b.stddev << "%\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const Overrides& ov, std::ostream& out) {
  RunConfig cfg = load_config(config_path);
  ov.apply(cfg);
  cfg.run.out_dir = out_dir_or(cfg, "runs/sweep");
  const Dataset ds = load_dataset(cfg.data);
  fs::create_directories(cfg.run.out_dir);
  save_config(cfg, (fs::path(cfg.run.out_dir) / "config_resolved.json").string());
  const SweepResult res = sweep(cfg.sweep, ds.train, ds.test, cfg.env, cfg.agent, cfg.net, cfg.run, cfg.jobs);
  write_summary_csv(out, res.summary);
  return kExitOk;
}

int cmd_gradcheck(const std::string& arch, std::uint64_t seed, int window, std::ostream& out) {
  EnvConfig env;
  env.window_n = window;
  const auto spec = NetConfig{}.spec_for(nn::arch_from_string(arch), env);
  const auto problem = nn::random_gradcheck_problem(spec, seed);
  const double err = nn::gradcheck(problem.net, problem.input, nn::linear_loss(problem.loss_weights), 1e-5);
  out << std::setprecision(6) << std::scientific << err << '\n';
  return err < 1e-4 ? kExitOk : kExitValidation;
}

std::vector<std::pair<double, double>> read_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::pair<double, double>> pts;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::istringstream row(line);
    double x = 0, y = 0;
    char comma = 0;
    if (!(row >> x >> comma >> y) || comma != ',') throw MalformedRow("unparsable curve row", line_no);
    pts.emplace_back(x, y);
  }
  return pts;
}

int cmd_plot(const std::string& metrics_path, const std::string& curve_path, const std::string& svg_path,
             std::ostream& out) {
  std::ifstream in(metrics_path);
  if (!in) throw Error("cannot open '" + metrics_path + "'");
  const auto rows = read_metrics_csv(in);

  plot::Line reward{"episode reward", {}}, cumulative{"cumulative reward", {}};
  double running = 0.0;
  for (const auto& r : rows) {
    reward.points.emplace_back(static_cast<double>(r.episode_index), r.cumulative_reward);
    running += r.cumulative_reward;
    cumulative.points.emplace_back(static_cast<double>(r.episode_index), running);
  }
  std::vector<plot::Panel> panels{
      {"Reward per training episode", "episode", "reward %", {reward}},
      {"Cumulative reward over training episodes", "episode", "cumulative reward %", {cumulative}}};
  if (!curve_path.empty())
    panels.push_back({"Evaluation cumulative reward", "step", "cumulative reward %",
                      {{fs::path(curve_path).filename().string(), read_curve(curve_path)}}});

  const std::string doc = plot::render_svg(panels);
  make_parent_dirs(svg_path);
  std::ofstream svg(svg_path);
  if (!svg) throw Error("cannot write '" + svg_path + "'");
  svg << doc;
  out << "wrote " << svg_path << " (" << rows.size() << " episodes)\n";
  return kExitOk;
}

int cmd_synth(const std::string& path, const SyntheticSpec& spec, std::ostream& out) {
  make_parent_dirs(path);
  std::ofstream csv(path);
  if (!csv) throw Error("cannot write '" + path + "'");
  write_bars(csv, make_periodic_bars(spec));
  out << "wrote " << spec.bars << " bars to " << path << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dueling Double-DQN trading: training, evaluation and commission sweeps"};
  app.require_subcommand(1);

  std::string csv_path;
  auto* validate = app.add_subcommand("validate-data", "Parse a minute-bar CSV and report invariant violations");
  validate->add_option("csv", csv_path, "CSV file")->required();

  std::string config_path, ckpt_path, scenario = "with_commission", out_stem;
  Overrides ov;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "Master seed (overrides run.seed)");
    sub->add_option("--total-steps", ov.total_steps, "Overrides run.total_steps");
    sub->add_option("--out-dir", ov.out_dir, "Overrides run.out_dir");
  };

  auto* train_cmd = app.add_subcommand("train", "Train one agent");
  train_cmd->add_option("--config", config_path, "Config JSON")->required();
  add_overrides(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a checkpoint on the held-out data");
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint JSON")->required();
  eval_cmd->add_option("--config", config_path, "Config JSON")->required();
  eval_cmd->add_option("--scenario", scenario, "with_commission | no_commission")->required();
  eval_cmd->add_option("--out", out_stem, "Report path stem (writes <stem>.json and <stem>.csv)");

  auto* baseline_cmd = app.add_subcommand("baseline", "Random-policy baseline on the held-out data");
  baseline_cmd->add_option("--config", config_path, "Config JSON")->required();
  baseline_cmd->add_option("--scenario", scenario, "with_commission | no_commission");
  add_overrides(baseline_cmd);

  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate the arch x batch x commission grid");
  sweep_cmd->add_option("--config", config_path, "Config JSON")->required();
  sweep_cmd->add_option("--jobs", ov.jobs, "Parallel grid cells");
  add_overrides(sweep_cmd);

  std::string arch = "ffdqn";
  std::uint64_t gc_seed = 0;
  int gc_window = 10;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of backpropagation");
  grad_cmd->add_option("--arch", arch, "ffdqn | cnn")->check(CLI::IsMember({"ffdqn", "cnn"}));
  grad_cmd->add_option("--seed", gc_seed, "Seed for weights and inputs");
  grad_cmd->add_option("--window", gc_window, "Observation window length");

  std::string metrics_path, curve_path, svg_path;
  auto* plot_cmd = app.add_subcommand("plot", "Render metrics as SVG line charts");
  plot_cmd->add_option("--metrics", metrics_path, "metrics.csv from train")->required();
  plot_cmd->add_option("--curve", curve_path, "Optional evaluation curve CSV");
  plot_cmd->add_option("--out", svg_path, "Output SVG")->required();

  SyntheticSpec synth;
  std::string synth_path;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic periodic minute-bar CSV");
  synth_cmd->add_option("--out", synth_path, "Output CSV")->required();
  synth_cmd->add_option("--bars", synth.bars, "Number of bars");
  synth_cmd->add_option("--period", synth.period, "Cycle length in bars");
  synth_cmd->add_option("--amplitude", synth.amplitude, "Relative amplitude of the cycle");
  synth_cmd->add_option("--noise", synth.noise, "Relative uniform noise");
  synth_cmd->add_option("--seed", synth.seed, "Noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(csv_path, out, err);
    if (*train_cmd) return cmd_train(config_path, ov, out);
    if (*eval_cmd) return cmd_eval(ckpt_path, config_path, scenario, out_stem, out);
    if (*baseline_cmd) return cmd_baseline(config_path, ov, scenario, out);
    if (*sweep_cmd) return cmd_sweep(config_path, ov, out);
    if (*grad_cmd) return cmd_gradcheck(arch, gc_seed, gc_window, out);
    if (*plot_cmd) return cmd_plot(metrics_path, curve_path, svg_path, out);
    if (*synth_cmd) return cmd_synth(synth_path, synth, out);
  } catch (const ConfigInvalid& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace ddqn::cli
