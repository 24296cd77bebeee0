#include "ddqn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "ddqn/errors.hpp"

namespace ddqn {

namespace fs = std::filesystem;

nn::NetSpec NetConfig::spec_for(nn::ArchTag a, const EnvConfig& env) const {
  return a == nn::ArchTag::ffdqn ? nn::NetSpec::ffdqn(env.channels(), env.window_n, ffdqn_hidden)
                                 : nn::NetSpec::cnn(env.channels(), env.window_n, cnn_conv, cnn_hidden);
}

std::string to_string(Scenario s) {
  return s == Scenario::with_commission ? "with_commission" : "no_commission";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "with_commission") return Scenario::with_commission;
  if (name == "no_commission") return Scenario::no_commission;
  throw ConfigInvalid("scenario", "expected with_commission or no_commission, got '" + name + "'");
}

namespace {

class PreciseStream {
 public:
  explicit PreciseStream(std::ostream& out)
      : out_(out), old_(out.precision(std::numeric_limits<double>::max_digits10)) {}
  ~PreciseStream() { out_.precision(old_); }
  PreciseStream(const PreciseStream&) = delete;
  PreciseStream& operator=(const PreciseStream&) = delete;

 private:
  std::ostream& out_;
  std::streamsize old_;
};

void write_metrics_header(std::ostream& out) {
  out << "# format_version=" << kMetricsFormatVersion << '\n'
      << "episode_index,global_step,cumulative_reward_pct,trades,epsilon,mean_loss\n";
}

void write_metrics_row(std::ostream& out, const EpisodeMetrics& m) {
  PreciseStream precise(out);
  out << m.episode_index << ',' << m.global_step << ',' << m.cumulative_reward << ',' << m.trades
      << ',' << m.epsilon << ',' << m.mean_loss << '\n';
}

void write_step_log_header(std::ostream& out) {
  out << "# format_version=" << kMetricsFormatVersion << '\n' << "global_step,epsilon,loss\n";
}

void write_step_log_row(std::ostream& out, const StepLog& s) {
  PreciseStream precise(out);
  out << s.global_step << ',' << s.epsilon << ',' << s.loss << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

struct GreedyPass {
  std::vector<CurvePoint> curve;
  double total = 0.0;
  int trades = 0;
};

GreedyPass greedy_pass(const QNet& net, const PriceSeries& series, const EnvConfig& env_cfg) {
  TradingEnv env(series, env_cfg);
  Rng unused(0);  // random_start is off for evaluation passes
  Observation obs = env.reset(unused);
  GreedyPass pass;
  pass.curve.push_back({0, 0.0});
  for (long step = 1;; ++step) {
    const StepResult& r = env.step(greedy_action(net, obs));
    pass.total += r.reward;
    pass.trades += static_cast<int>(r.info.trade_opened) + static_cast<int>(r.info.trade_closed);
    pass.curve.push_back({step, pass.total});
    if (r.done) break;
    obs = r.observation;
  }
  return pass;
}

void check_layout(const nn::NetSpec& spec, const EnvConfig& env_cfg) {
  if (spec.window_n != env_cfg.window_n || spec.input_channels != env_cfg.channels())
    throw ConfigInvalid("net", "network input (" + std::to_string(spec.input_channels) + "x" +
                                   std::to_string(spec.window_n) +
                                   ") does not match the environment observation (" +
                                   std::to_string(env_cfg.channels()) + "x" +
                                   std::to_string(env_cfg.window_n) + ")");
}

}  // namespace

TrainResult train(const PriceSeries& series, const EnvConfig& env_cfg,
                  const AgentConfig& agent_cfg, const nn::NetSpec& net_spec,
                  const RunSettings& settings, const PriceSeries* eval_series) {
  env_cfg.validate();
  agent_cfg.validate();
  net_spec.validate();
  check_layout(net_spec, env_cfg);
  if (settings.total_steps < 0) throw ConfigInvalid("run.total_steps", "must be >= 0");
  if (settings.log_every < 1) throw ConfigInvalid("run.log_every", "must be >= 1");
  if (settings.checkpoint_every < 0) throw ConfigInvalid("run.checkpoint_every", "must be >= 0");
  if (settings.eval_every < 0) throw ConfigInvalid("run.eval_every", "must be >= 0");

  Rng init_rng = make_stream(settings.seed, "init");
  Rng env_rng = make_stream(settings.seed, "env");
  Rng agent_rng = make_stream(settings.seed, "agent");
  Rng buffer_rng = make_stream(settings.seed, "buffer");

  QNet online = QNet::glorot(net_spec, init_rng);
  QNet target = online;
  nn::Optimizer<double> optimizer(agent_cfg.optimizer);
  ReplayBuffer buffer(agent_cfg.replay_capacity);

  TrainResult result;
  const bool to_disk = !settings.out_dir.empty();
  const fs::path dir(settings.out_dir);
  std::ofstream metrics_out, log_out, eval_out;
  if (to_disk) {
    fs::create_directories(dir);
    metrics_out = open_out(dir / "metrics.csv");
    write_metrics_header(metrics_out);
    log_out = open_out(dir / "train_log.csv");
    write_step_log_header(log_out);
    if (settings.eval_every > 0 && eval_series) {
      eval_out = open_out(dir / "midtrain_eval.csv");
      eval_out << "# format_version=" << kMetricsFormatVersion << '\n'
               << "global_step,eval_return_pct,trades\n";
    }
  }
  auto snapshot = [&](long step) { return nn::Checkpoint{online, settings.seed, step}; };

  // Truncated held-out slice for mid-training evaluations.
  PriceSeries eval_slice;
  EnvConfig eval_env;
  const bool mid_evals = settings.eval_every > 0 && eval_series != nullptr;
  if (mid_evals) {
    const auto n = std::min<std::size_t>(eval_series->size(),
                                         static_cast<std::size_t>(std::max(settings.eval_slice, 0L)));
    eval_slice.bars.assign(eval_series->bars.begin(), eval_series->bars.begin() + static_cast<std::ptrdiff_t>(n));
    eval_slice.rel.assign(eval_series->rel.begin(), eval_series->rel.begin() + static_cast<std::ptrdiff_t>(n));
    eval_slice.source_id = eval_series->source_id;
    eval_env = evaluation_env(env_cfg, eval_slice, Scenario::with_commission);
  }

  if (settings.total_steps > 0) {
    TradingEnv env(series, env_cfg);
    Observation obs = env.reset(env_rng);
    const auto warm = std::max(static_cast<std::size_t>(agent_cfg.batch_size),
                               static_cast<std::size_t>(agent_cfg.replay_start));
    EpisodeMetrics episode;
    double loss_sum = 0.0;
    long loss_count = 0;
    double last_loss = 0.0;

    for (long step = 0; step < settings.total_steps;) {
      const double eps = epsilon_at(agent_cfg.schedule, step);
      const Action action = select_action(online, obs, eps, agent_rng);
      const StepResult r = env.step(action);
      buffer.push({obs, action, r.reward, r.observation, r.done});
      ++step;

      episode.cumulative_reward += r.reward;
      episode.trades += static_cast<int>(r.info.trade_opened) + static_cast<int>(r.info.trade_closed);
      ++episode.steps;
      episode.epsilon = eps;

      if (buffer.size() >= warm) {
        last_loss = train_step(online, target, buffer, agent_cfg, optimizer, buffer_rng);
        loss_sum += last_loss;
        ++loss_count;
      }
      if (step % agent_cfg.sync_every == 0) nn::sync_target(online, target);
      if (step % settings.log_every == 0) {
        result.step_log.push_back({step, eps, last_loss});
        if (to_disk) write_step_log_row(log_out, result.step_log.back());
      }
      if (to_disk && settings.checkpoint_every > 0 && step % settings.checkpoint_every == 0)
        nn::save_checkpoint(snapshot(step), (dir / ("checkpoint_" + std::to_string(step) + ".json")).string());
      if (mid_evals && step % settings.eval_every == 0) {
        const GreedyPass pass = greedy_pass(online, eval_slice, eval_env);
        result.mid_evals.push_back({step, pass.total, pass.trades});
        if (to_disk) {
          PreciseStream precise(eval_out);
          eval_out << step << ',' << pass.total << ',' << pass.trades << '\n';
        }
      }

      if (r.done) {
        episode.episode_index = static_cast<long>(result.metrics.size());
        episode.global_step = step;
        episode.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        result.metrics.push_back(episode);
        if (to_disk) {
          write_metrics_row(metrics_out, episode);
          metrics_out.flush();
        }
        episode = {};
        loss_sum = 0.0;
        loss_count = 0;
        obs = env.reset(env_rng);
      } else {
        obs = r.observation;
      }
    }
  }

  result.checkpoint = snapshot(settings.total_steps);
  if (to_disk) nn::save_checkpoint(result.checkpoint, (dir / "checkpoint_final.json").string());
  return result;
}

EnvConfig evaluation_env(const EnvConfig& env_cfg, const PriceSeries& series, Scenario scenario) {
  EnvConfig ev = env_cfg;
  ev.random_start = false;
  const auto steps = static_cast<long>(series.size()) - env_cfg.window_n;
  if (steps < 1)
    throw SeriesTooShort("evaluation series of " + std::to_string(series.size()) +
                         " bars is shorter than window + 1");
  ev.episode_len = static_cast<int>(steps);
  if (scenario == Scenario::no_commission) ev.commission_rate = 0.0;
  return ev;
}

EvalReport evaluate(const nn::Checkpoint& ckpt, const PriceSeries& series,
                    const EnvConfig& env_cfg, Scenario scenario, int batch_size,
                    int baseline_episodes) {
  const auto& spec = ckpt.net.spec();
  if (spec.window_n != env_cfg.window_n || spec.input_channels != env_cfg.channels())
    throw CheckpointMismatch("checkpoint expects " + std::to_string(spec.input_channels) +
                             " channels x " + std::to_string(spec.window_n) +
                             " bars; environment provides " + std::to_string(env_cfg.channels()) +
                             " x " + std::to_string(env_cfg.window_n));
  const EnvConfig ev = evaluation_env(env_cfg, series, scenario);
  GreedyPass pass = greedy_pass(ckpt.net, series, ev);

  EvalReport report;
  report.scenario = scenario;
  report.arch = spec.arch;
  report.batch_size = batch_size;
  report.commission_rate = ev.commission_rate;
  report.final_return_pct = pass.total;
  report.trades = pass.trades;
  report.cumulative_reward_curve = std::move(pass.curve);
  if (baseline_episodes > 0) {
    const auto base =
        random_baseline(series, ev, stream_seed(ckpt.rng_seed, "baseline"), baseline_episodes);
    report.baseline_random_return_pct = base.mean;
    report.baseline_random_stddev_pct = base.stddev;
  }
  return report;
}

BaselineSummary random_baseline(const PriceSeries& series, const EnvConfig& env_cfg,
                                std::uint64_t seed, int episodes) {
  if (episodes < 1) throw ConfigInvalid("run.baseline_episodes", "must be >= 1");
  Rng rng(seed);
  TradingEnv env(series, env_cfg);
  BaselineSummary out;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng);
    double total = 0.0;
    for (;;) {
      const StepResult& r = env.step(action_from_index(static_cast<int>(uniform_index(rng, kNumActions))));
      total += r.reward;
      if (r.done) break;
    }
    out.returns.push_back(total);
  }
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.mean = sum / static_cast<double>(episodes);
  if (episodes > 1) {
    double ss = 0.0;
    for (double r : out.returns) ss += (r - out.mean) * (r - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(episodes - 1));
  }
  return out;
}

SweepResult sweep(const SweepGrid& grid, const PriceSeries& train_series,
                  const PriceSeries& eval_series, const EnvConfig& env_cfg,
                  const AgentConfig& agent_cfg, const NetConfig& net_cfg,
                  const RunSettings& settings, int jobs) {
  if (grid.archs.empty() || grid.batch_sizes.empty() || grid.scenarios.empty())
    throw ConfigInvalid("sweep", "grid axes must be non-empty");
  struct Cell {
    nn::ArchTag arch;
    int batch;
  };
  std::vector<Cell> cells;
  for (auto a : grid.archs)
    for (int b : grid.batch_sizes) cells.push_back({a, b});

  std::vector<TrainResult> runs(cells.size());
  std::vector<std::vector<EvalReport>> reports(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());

  auto run_cell = [&](std::size_t i) {
    try {
      const Cell& cell = cells[i];
      AgentConfig agent = agent_cfg;
      agent.batch_size = cell.batch;
      RunSettings run = settings;
      const std::string name = nn::to_string(cell.arch) + "_b" + std::to_string(cell.batch);
      if (!settings.out_dir.empty()) run.out_dir = (fs::path(settings.out_dir) / name).string();
      runs[i] = train(train_series, env_cfg, agent, net_cfg.spec_for(cell.arch, env_cfg), run,
                      &eval_series);
      for (Scenario s : grid.scenarios) {
        EvalReport rep = evaluate(runs[i].checkpoint, eval_series, env_cfg, s, cell.batch,
                                  settings.baseline_episodes);
        if (!run.out_dir.empty())
          save_report(rep, (fs::path(run.out_dir) / ("report_" + to_string(s))).string());
        reports[i].push_back(std::move(rep));
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(cells.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) run_cell(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SweepResult out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    SummaryRow row{cells[i].arch, cells[i].batch, std::nullopt, std::nullopt};
    for (auto& rep : reports[i]) {
      (rep.scenario == Scenario::no_commission ? row.return_no_commission_pct
                                               : row.return_with_commission_pct) = rep.final_return_pct;
      out.reports.push_back(std::move(rep));
    }
    out.summary.push_back(row);
  }
  out.runs = std::move(runs);
  if (!settings.out_dir.empty()) {
    fs::create_directories(settings.out_dir);
    auto summary = open_out(fs::path(settings.out_dir) / "summary.csv");
    write_summary_csv(summary, out.summary);
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const std::vector<EpisodeMetrics>& metrics) {
  write_metrics_header(out);
  for (const auto& m : metrics) write_metrics_row(out, m);
}

void write_step_log_csv(std::ostream& out, const std::vector<StepLog>& log) {
  write_step_log_header(out);
  for (const auto& s : log) write_step_log_row(out, s);
}

void write_mid_eval_csv(std::ostream& out, const std::vector<MidTrainEval>& evals) {
  out << "# format_version=" << kMetricsFormatVersion << '\n' << "global_step,eval_return_pct,trades\n";
  PreciseStream precise(out);
  for (const auto& e : evals) out << e.global_step << ',' << e.return_pct << ',' << e.trades << '\n';
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "# format_version=" << kMetricsFormatVersion << '\n' << "step,cumulative_reward_pct\n";
  PreciseStream precise(out);
  for (const auto& p : curve) out << p.step << ',' << p.cumulative_reward << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "# format_version=" << kMetricsFormatVersion << '\n'
      << "arch,batch_size,return_no_commission_pct,return_with_commission_pct\n";
  PreciseStream precise(out);
  for (const auto& r : rows) {
    out << nn::to_string(r.arch) << ',' << r.batch_size << ',';
    if (r.return_no_commission_pct) out << *r.return_no_commission_pct;
    out << ',';
    if (r.return_with_commission_pct) out << *r.return_with_commission_pct;
    out << '\n';
  }
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.cumulative_reward_curve) curve.push_back({p.step, p.cumulative_reward});
  return {{"format_version", kMetricsFormatVersion},
          {"scenario", to_string(r.scenario)},
          {"arch_tag", nn::to_string(r.arch)},
          {"batch_size", r.batch_size},
          {"commission_rate", r.commission_rate},
          {"final_return_pct", r.final_return_pct},
          {"trades", r.trades},
          {"baseline_random_return_pct", r.baseline_random_return_pct},
          {"baseline_random_stddev_pct", r.baseline_random_stddev_pct},
          {"cumulative_reward_curve", curve}};
}

void save_report(const EvalReport& report, const std::string& stem) {
  {
    auto out = open_out(stem + ".json");
    out << report_to_json(report).dump(1) << '\n';
  }
  auto csv = open_out(stem + ".csv");
  write_curve_csv(csv, report.cumulative_reward_curve);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("episode_index,", 0) != 0) throw MalformedRow("not a metrics CSV header", line_no);
      continue;
    }
    std::istringstream fields(line);
    MetricsRow r;
    char c1, c2, c3, c4, c5;
    fields >> r.episode_index >> c1 >> r.global_step >> c2 >> r.cumulative_reward >> c3 >> r.trades >>
        c4 >> r.epsilon >> c5 >> r.mean_loss;
    if (!fields || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',')
      throw MalformedRow("unparsable metrics row", line_no);
    rows.push_back(r);
  }
  if (!header_seen) throw MalformedRow("missing metrics header", line_no == 0 ? 1 : line_no);
  return rows;
}

std::vector<Bar> make_periodic_bars(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::vector<Bar> bars;
  bars.reserve(spec.bars);
  double prev_close = spec.base_price;
  for (std::size_t t = 0; t < spec.bars; ++t) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / spec.period;
    const double mid = spec.base_price * (1.0 + spec.amplitude * std::sin(phase));
    Bar b;
    b.timestamp = spec.start_timestamp + static_cast<std::int64_t>(t) * 60;
    b.open = prev_close;
    b.close = mid * (1.0 + spec.noise * (2.0 * uniform_unit(rng) - 1.0));
    b.high = std::max(b.open, b.close) * (1.0 + spec.noise * uniform_unit(rng));
    b.low = std::min(b.open, b.close) * (1.0 - spec.noise * uniform_unit(rng));
    b.volume = 1000.0 * (0.5 + uniform_unit(rng));
    bars.push_back(b);
    prev_close = b.close;
  }
  return bars;
}

}  // namespace ddqn
