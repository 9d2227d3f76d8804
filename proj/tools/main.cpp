#include "fbff/harness.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using fbff::harness::RunConfig;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNumericalAbort = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
  std::string output_dir;
  std::string mode;
  std::string failure;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "Config file (key = value lines)");
  cmd->add_option("-s,--seed", c.seed, "Random seed");
  cmd->add_option("-o,--output", c.output_dir, "Output directory");
  cmd->add_option("--set", c.overrides, "Override a config key: key=value")->take_all();
}

RunConfig build_config(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : RunConfig::load(c.config_path);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed >= 0) config.seed = static_cast<std::uint64_t>(c.seed);
  if (!c.output_dir.empty()) config.output_dir = c.output_dir;
  if (!c.mode.empty()) config.eval_mode = fbff::parse_eval_mode(c.mode);
  if (!c.failure.empty()) config.set("failure", c.failure);
  config.validate();
  return config;
}

void print_summary(const fbff::harness::RunSummary& s) {
  std::cout << "seed " << s.seed << ": episodes " << s.episodes_completed << ", median last "
            << s.median_last << ", final w " << s.final_mean_w
            << (s.success ? ", success" : ", no success")
            << (s.aborted ? ", ABORTED: " + s.abort_reason : "") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback/feedforward policy optimization experiments"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train = app.add_subcommand("train", "Train one agent");
  add_common(train, train_opts);
  bool quiet = false;
  train->add_flag("-q,--quiet", quiet, "No per-episode progress");

  Common eval_opts;
  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Deterministic rollout from a checkpoint");
  add_common(eval, eval_opts);
  eval->add_option("-k,--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("-m,--mode", eval_opts.mode, "composed | fb-only | ff-only");
  eval->add_option("-f,--failure", eval_opts.failure, "Sensing failure on | off");

  Common sweep_opts;
  std::vector<std::uint64_t> seeds;
  int seed_count = 0;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Train one agent per seed and aggregate");
  add_common(sweep, sweep_opts);
  sweep->add_option("--seeds", seeds, "Explicit seed list");
  sweep->add_option("-n,--num-seeds", seed_count, "Seeds 0..n-1");
  sweep->add_option("-j,--jobs", jobs, "Concurrent training runs");

  std::vector<std::string> run_dirs;
  std::string plot_out = "aggregate.csv";
  auto* plot = app.add_subcommand("plot-data", "Quantile curves across run directories");
  plot->add_option("runs", run_dirs, "Run directories containing metrics.csv")->required();
  plot->add_option("-o,--output", plot_out, "Output CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const RunConfig config = build_config(train_opts);
      std::cout << "config " << config.hash() << ", seed " << config.seed << " -> "
                << config.output_dir.string() << "\n";
      const auto result = fbff::harness::run_train(config, [&](const auto& m) {
        if (!quiet)
          std::cout << "episode " << m.episode << " score " << m.score << " w " << m.mean_w
                    << "\n";
      });
      print_summary(result.summary);
      return result.summary.aborted ? kNumericalAbort : kOk;
    }
    if (*eval) {
      const RunConfig config = build_config(eval_opts);
      const auto report =
          fbff::harness::run_eval(config, checkpoint, config.eval_mode, config.failure);
      auto env = fbff::harness::make_environment(config, config.seed, false);
      fbff::harness::write_eval_report(report, env->observation_labels(), config.output_dir);
      std::cout << fbff::to_string(report.mode) << (report.failure ? " with failure" : "")
                << ": score " << report.score << ", steps " << report.steps;
      if (config.env == "snake")
        std::cout << ", final x " << report.final_x << ", final |y| " << report.final_abs_y
                  << (report.reached_goal ? ", reached goal" : "");
      std::cout << "\n";
      return kOk;
    }
    if (*sweep) {
      const RunConfig config = build_config(sweep_opts);
      if (seeds.empty())
        for (int i = 0; i < seed_count; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
      if (seeds.empty()) throw std::invalid_argument("sweep: give --seeds or --num-seeds");
      const auto result = fbff::harness::run_sweep(config, seeds, jobs, print_summary);
      std::cout << "successes " << result.successes << ", failures " << result.failures << "\n";
      for (const auto& r : result.runs)
        if (r.aborted) return kNumericalAbort;
      return kOk;
    }
    if (*plot) {
      std::vector<std::vector<fbff::harness::EpisodeMetrics>> runs;
      for (const auto& dir : run_dirs) runs.push_back(fbff::harness::read_metrics(fs::path(dir) / "metrics.csv"));
      fbff::harness::write_aggregate(fbff::harness::aggregate_runs(runs), plot_out);
      std::cout << "wrote " << plot_out << "\n";
      return kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
