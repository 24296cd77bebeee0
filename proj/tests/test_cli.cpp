#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "ddqn/cli.hpp"
#include "ddqn/harness.hpp"

using namespace ddqn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ddqn_trader");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal well-formedness check: one root element, balanced and properly nested tags.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> stack;
  int roots = 0;
  std::size_t i = 0;
  while ((i = doc.find('<', i)) != std::string::npos) {
    const auto close = doc.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = doc.substr(i + 1, close - i - 1);
    i = close + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) ++roots;
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty() && roots == 1;
}

struct Workspace {
  fs::path dir;
  Workspace() : dir(fs::temp_directory_path() / "ddqn_cli_test") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    SyntheticSpec s;
    s.bars = 600;
    s.period = 20;
    std::ofstream csv(dir / "bars.csv");
    write_bars(csv, make_periodic_bars(s));
    nlohmann::json cfg = {
        {"data", {{"path", "bars.csv"}}},
        {"env", {{"window_n", 5}, {"episode_len", 50}}},
        {"agent",
         {{"batch_size", 8},
          {"replay_start", 40},
          {"replay_capacity", 500},
          {"sync_every", 25},
          {"epsilon", {{"decay_steps", 200}}}}},
        {"net", {{"ffdqn_hidden", {8, 8}}, {"cnn_conv", {{{"out_channels", 3}, {"kernel", 3}, {"stride", 1}}}}, {"cnn_hidden", {6}}}},
        {"run", {{"total_steps", 150}, {"seed", 4}, {"log_every", 10}, {"baseline_episodes", 3}}},
        {"sweep", {{"batch_sizes", {4, 8}}}}};
    std::ofstream(dir / "cfg.json") << cfg.dump(2);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("gradcheck prints a small error and succeeds") {
  for (const char* arch : {"ffdqn", "cnn"}) {
    const auto r = run_cli({"gradcheck", "--arch", arch, "--seed", "7"});
    CHECK(r.code == cli::kExitOk);
    CHECK(std::stod(r.out) < 1e-4);
  }
}

TEST_CASE("the installed binary maps outcomes to exit codes") {
  const char* exe = std::getenv("DDQN_TRADER");
  REQUIRE_MESSAGE(exe != nullptr, "DDQN_TRADER is not set");
  const std::string quiet = " > /dev/null 2>&1";
  auto code = [&](const std::string& args) {
    const int status = std::system((std::string(exe) + " " + args + quiet).c_str());
    return WEXITSTATUS(status);
  };
  CHECK(code("gradcheck --arch ffdqn --seed 7") == 0);
  CHECK(code("--help") == 0);
  CHECK(code("no-such-command") == 1);
  CHECK(code("validate-data /nonexistent/bars.csv") != 0);
}

TEST_CASE("validate-data accepts good data and names the bad line") {
  Workspace ws;
  auto ok = run_cli({"validate-data", ws.path("bars.csv")});
  CHECK(ok.code == cli::kExitOk);
  CHECK(ok.out.find("600 valid bars") != std::string::npos);

  std::ofstream(ws.dir / "bad.csv") << "timestamp,open,high,low,close,volume\n"
                                       "1600000000,10,11,9,10,5\n"
                                       "1600000060,10,9,11,10,5\n";
  const auto bad = run_cli({"validate-data", ws.path("bad.csv")});
  CHECK(bad.code == cli::kExitValidation);
  CHECK(bad.err.find("line 3") != std::string::npos);
}

TEST_CASE("train with zero steps writes the initial checkpoint and an empty metrics file") {
  Workspace ws;
  const auto r = run_cli({"train", "--config", ws.path("cfg.json"), "--total-steps", "0", "--out-dir", ws.path("run0")});
  CHECK(r.code == cli::kExitOk);
  CHECK(fs::exists(ws.dir / "run0" / "checkpoint_final.json"));
  std::ifstream metrics(ws.dir / "run0" / "metrics.csv");
  CHECK(read_metrics_csv(metrics).empty());
  const auto ckpt = nn::load_checkpoint((ws.dir / "run0" / "checkpoint_final.json").string());
  CHECK(ckpt.training_step == 0);
}

TEST_CASE("train, eval and sweep are reproducible byte for byte") {
  Workspace ws;
  for (const char* d : {"a", "b"}) {
    REQUIRE(run_cli({"train", "--config", ws.path("cfg.json"), "--out-dir", ws.path(std::string("train_") + d)}).code == 0);
    const auto ckpt = ws.path(std::string("train_") + d + "/checkpoint_final.json");
    REQUIRE(run_cli({"eval", "--checkpoint", ckpt, "--config", ws.path("cfg.json"), "--scenario",
                     "with_commission", "--out", ws.path(std::string("eval_") + d)})
                .code == 0);
    REQUIRE(run_cli({"sweep", "--config", ws.path("cfg.json"), "--jobs", d[0] == 'a' ? "1" : "2",
                     "--out-dir", ws.path(std::string("sweep_") + d)})
                .code == 0);
  }
  CHECK(slurp(ws.dir / "train_a" / "metrics.csv") == slurp(ws.dir / "train_b" / "metrics.csv"));
  CHECK(!slurp(ws.dir / "train_a" / "metrics.csv").empty());
  CHECK(slurp(ws.dir / "eval_a.csv") == slurp(ws.dir / "eval_b.csv"));
  CHECK(slurp(ws.dir / "eval_a.json") == slurp(ws.dir / "eval_b.json"));
  CHECK(slurp(ws.dir / "sweep_a" / "summary.csv") == slurp(ws.dir / "sweep_b" / "summary.csv"));
  CHECK(slurp(ws.dir / "sweep_a" / "cnn_b8" / "metrics.csv") == slurp(ws.dir / "sweep_b" / "cnn_b8" / "metrics.csv"));

  const auto summary = slurp(ws.dir / "sweep_a" / "summary.csv");
  CHECK(summary.rfind("# format_version=1\narch,batch_size,return_no_commission_pct,return_with_commission_pct\n", 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 6);

  const auto seeded = run_cli({"train", "--config", ws.path("cfg.json"), "--seed", "5", "--out-dir", ws.path("train_c")});
  CHECK(seeded.code == 0);
  CHECK(slurp(ws.dir / "train_c" / "metrics.csv") != slurp(ws.dir / "train_a" / "metrics.csv"));
}

TEST_CASE("eval rejects an unknown scenario and a mismatched checkpoint") {
  Workspace ws;
  REQUIRE(run_cli({"train", "--config", ws.path("cfg.json"), "--total-steps", "0", "--out-dir", ws.path("r")}).code == 0);
  const auto ckpt = ws.path("r/checkpoint_final.json");
  CHECK(run_cli({"eval", "--checkpoint", ckpt, "--config", ws.path("cfg.json"), "--scenario", "maybe"}).code ==
        cli::kExitValidation);
  auto cfg = nlohmann::json::parse(slurp(ws.dir / "cfg.json"));
  cfg["env"]["window_n"] = 6;
  std::ofstream(ws.dir / "cfg6.json") << cfg.dump();
  CHECK(run_cli({"eval", "--checkpoint", ckpt, "--config", ws.path("cfg6.json"), "--scenario", "no_commission"}).code ==
        cli::kExitRuntime);
}

TEST_CASE("config errors exit 1 and name the field") {
  Workspace ws;
  auto cfg = nlohmann::json::parse(slurp(ws.dir / "cfg.json"));
  cfg["agent"]["gamma"] = 3;
  std::ofstream(ws.dir / "bad.json") << cfg.dump();
  const auto r = run_cli({"train", "--config", ws.path("bad.json")});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("agent.gamma") != std::string::npos);
}

TEST_CASE("baseline reports mean and spread") {
  Workspace ws;
  const auto r = run_cli({"baseline", "--config", ws.path("cfg.json")});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("random baseline") != std::string::npos);
  CHECK(run_cli({"baseline", "--config", ws.path("cfg.json")}).out == r.out);
}

TEST_CASE("plot writes well-formed SVG and leaves its inputs alone") {
  Workspace ws;
  REQUIRE(run_cli({"train", "--config", ws.path("cfg.json"), "--out-dir", ws.path("t")}).code == 0);
  REQUIRE(run_cli({"eval", "--checkpoint", ws.path("t/checkpoint_final.json"), "--config", ws.path("cfg.json"),
                   "--scenario", "no_commission", "--out", ws.path("rep")})
              .code == 0);
  const auto metrics_before = slurp(ws.dir / "t" / "metrics.csv");
  const auto curve_before = slurp(ws.dir / "rep.csv");
  const auto r = run_cli({"plot", "--metrics", ws.path("t/metrics.csv"), "--curve", ws.path("rep.csv"), "--out",
                          ws.path("plot.svg")});
  CHECK(r.code == cli::kExitOk);
  const auto svg = slurp(ws.dir / "plot.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(well_formed_xml(svg));
  CHECK(slurp(ws.dir / "t" / "metrics.csv") == metrics_before);
  CHECK(slurp(ws.dir / "rep.csv") == curve_before);
  CHECK(run_cli({"plot", "--metrics", ws.path("missing.csv"), "--out", ws.path("x.svg")}).code != cli::kExitOk);
}

TEST_CASE("synth writes a valid series") {
  Workspace ws;
  CHECK(run_cli({"synth", "--out", ws.path("s.csv"), "--bars", "300", "--seed", "3"}).code == 0);
  CHECK(run_cli({"validate-data", ws.path("s.csv")}).out.find("300 valid bars") != std::string::npos);
}
