#pragma once

// Experiment runner: configuration, training, evaluation, seed sweeps and
// the aggregation the plotting tools consume.

#include "fbff/envs/environment.hpp"
#include "fbff/learner.hpp"
#include "fbff/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fbff::harness {

struct RunConfig {
  std::string env = "cartpole";
  int episodes = 300;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  EvalMode eval_mode = EvalMode::kComposed;
  bool failure = false;
  double failure_x_threshold = 0.0;  // snake: x < threshold freezes (x, y)
  int checkpoint_interval = 50;
  bool dump_trajectories = false;

  // Summary and partition thresholds.
  int summary_window = 20;
  double success_threshold = 450.0;
  double hff_jump_threshold = 5.0;

  // Environment constants.
  int cartpole_max_steps = 500;
  int snake_max_steps = 2000;
  double snake_field_length = 4.0;
  double snake_field_width = 2.0;
  double snake_start_margin = 2.0;
  double snake_link_length = 0.1;
  double snake_tracking_gain = 25.0;
  int snake_substeps = 10;
  bool snake_exit_terminal = false;
  std::string cpg_topology = "directed";

  Hyperparams hp;

  /// Applies one key = value pair. Throws std::invalid_argument for unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its current value, one "key = value" line each.
  std::string to_text() const;
  /// Stable 64-bit FNV-1a hash of to_text() without seed and output_dir.
  std::string hash() const;
  void validate() const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  static std::vector<std::string> keys();
};

std::unique_ptr<envs::Environment> make_environment(const RunConfig& config,
                                                    std::uint64_t seed, bool with_failure);

struct EpisodeMetrics {
  int episode = 0;
  double score = 0.0;
  int steps = 0;
  double mean_w = 0.0;
  double mean_d = 0.0;
  double mean_h_fb = 0.0;
  double mean_h_ff = 0.0;
  double mean_delta = 0.0;
  double loss_traj = 0.0;
  double loss_value = 0.0;
  double loss_model_recon = 0.0;
  double loss_model_kl = 0.0;
  double loss_model_ce = 0.0;
};

/// Column order of metrics.csv.
const std::vector<std::string>& metrics_columns();
std::string metrics_row(const EpisodeMetrics& m);
std::vector<EpisodeMetrics> read_metrics(const std::filesystem::path& csv);

/// Episodes e (1-based, e >= 2) where |H_FF(e) - H_FF(e-1)| exceeds threshold.
std::vector<int> detect_hff_jumps(const std::vector<EpisodeMetrics>& episodes,
                                  double threshold);

struct CollapseAnalysis {
  bool reached_success = false;
  int first_success_episode = 0;  // window end, 0 if never
  double final_median = 0.0;
  bool collapsed = false;         // success, then final median < threshold / 2
  std::vector<int> hff_jumps;
  bool explained = true;          // collapsed implies a jump after first success
};

CollapseAnalysis analyze_collapse(const std::vector<EpisodeMetrics>& episodes, int window,
                                  double success_threshold, double jump_threshold);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);

struct RunSummary {
  std::string config_hash;
  std::uint64_t seed = 0;
  int episodes_completed = 0;
  bool aborted = false;
  std::string abort_reason;
  double mean_last = 0.0;
  double median_last = 0.0;
  double final_mean_w = 0.0;
  double mean_w_first50 = 0.0;
  double mean_w_last50 = 0.0;
  bool success = false;
  CollapseAnalysis collapse;
  double seconds = 0.0;
};

struct TrainResult {
  std::filesystem::path run_dir;
  RunSummary summary;
  std::vector<EpisodeMetrics> episodes;
};

using EpisodeCallback = std::function<void(const EpisodeMetrics&)>;

/// Trains for config.episodes episodes, writing config.txt, metrics.csv,
/// checkpoints/ and summary.json (plus failure.txt on a NaN abort) to
/// config.output_dir.
TrainResult run_train(const RunConfig& config, const EpisodeCallback& on_episode = {});

struct EvalStep {
  int step = 0;
  Eigen::VectorXd observation;  // as seen by the agent
  Eigen::VectorXd true_observation;
  Eigen::VectorXd raw_action;
  Eigen::VectorXd applied_action;
  double reward = 0.0;
  double w = 0.0;
  bool failure_active = false;
};

struct EvalReport {
  EvalMode mode = EvalMode::kComposed;
  bool failure = false;
  double score = 0.0;
  int steps = 0;
  double final_x = 0.0;
  double final_abs_y = 0.0;
  double mean_abs_y = 0.0;
  bool reached_goal = false;
  std::vector<EvalStep> trajectory;
};

/// Deterministic (median-noise) rollout of one episode from a checkpoint.
/// Throws std::invalid_argument when failure injection is requested for an
/// environment without pose entries.
EvalReport run_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                    EvalMode mode, bool failure);
/// Uses the agent's current parameters; its histories and traces are reset.
EvalReport run_eval(const RunConfig& config, Agent& agent, EvalMode mode, bool failure);

/// Writes eval_<mode>[_failure].csv and .json into dir.
void write_eval_report(const EvalReport& report, const std::vector<std::string>& labels,
                       const std::filesystem::path& dir);

struct Aggregate {
  std::vector<int> episode;
  std::vector<double> score_q25, score_q50, score_q75;
  std::vector<double> w_q25, w_q50, w_q75;
};

/// Per-episode quantiles across runs (runs shorter than the longest one drop
/// out of later episodes).
Aggregate aggregate_runs(const std::vector<std::vector<EpisodeMetrics>>& runs);
void write_aggregate(const Aggregate& agg, const std::filesystem::path& csv);

struct SweepResult {
  std::vector<RunSummary> runs;
  int successes = 0;
  int failures = 0;
  Aggregate aggregate;
};

/// Trains one run per seed under template.output_dir/seed_<n>, then writes
/// sweep_summary.json and aggregate.csv. jobs > 1 trains seeds concurrently.
/// An empty seed list returns an empty result and writes nothing.
SweepResult run_sweep(const RunConfig& config_template, const std::vector<std::uint64_t>& seeds,
                      int jobs = 1, const std::function<void(const RunSummary&)>& on_run = {});

}  // namespace fbff::harness
