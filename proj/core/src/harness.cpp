#include "fbff/harness.hpp"

#include "fbff/envs/cartpole.hpp"
#include "fbff/envs/failure.hpp"
#include "fbff/envs/snake.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fbff::harness {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config " + key + ": not a number: '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty())
    throw std::invalid_argument("config " + key + ": not an integer: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config " + key + ": not a boolean: '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field double_field(T RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); },
          [m](const RunConfig& c) { return fmt(c.*m); }};
}

template <typename T>
Field int_field(T RunConfig::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) {
            c.*m = static_cast<T>(parse_int(k, v));
          },
          [m](const RunConfig& c) { return std::to_string(c.*m); }};
}

template <typename T>
Field hp_double(T Hyperparams::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) { c.hp.*m = parse_double(k, v); },
          [m](const RunConfig& c) { return fmt(c.hp.*m); }};
}

template <typename T>
Field hp_int(T Hyperparams::*m) {
  return {[m](RunConfig& c, const std::string& k, const std::string& v) {
            c.hp.*m = static_cast<T>(parse_int(k, v));
          },
          [m](const RunConfig& c) { return std::to_string(c.hp.*m); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    f["env"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                  if (v != "cartpole" && v != "snake")
                    throw std::invalid_argument("config env: unknown environment '" + v + "'");
                  c.env = v;
                },
                [](const RunConfig& c) { return c.env; }};
    f["episodes"] = int_field(&RunConfig::episodes);
    f["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   const long long s = parse_int(k, v);
                   if (s < 0) throw std::invalid_argument("config seed must be >= 0");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    f["output_dir"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
                       [](const RunConfig& c) { return c.output_dir.string(); }};
    f["eval_mode"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                        c.eval_mode = parse_eval_mode(v);
                      },
                      [](const RunConfig& c) { return to_string(c.eval_mode); }};
    f["failure"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                      c.failure = parse_bool(k, v);
                    },
                    [](const RunConfig& c) { return fmt_bool(c.failure); }};
    f["failure_x_threshold"] = double_field(&RunConfig::failure_x_threshold);
    f["checkpoint_interval"] = int_field(&RunConfig::checkpoint_interval);
    f["dump_trajectories"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.dump_trajectories = parse_bool(k, v);
                              },
                              [](const RunConfig& c) { return fmt_bool(c.dump_trajectories); }};
    f["summary_window"] = int_field(&RunConfig::summary_window);
    f["success_threshold"] = double_field(&RunConfig::success_threshold);
    f["hff_jump_threshold"] = double_field(&RunConfig::hff_jump_threshold);
    f["cartpole_max_steps"] = int_field(&RunConfig::cartpole_max_steps);
    f["snake_max_steps"] = int_field(&RunConfig::snake_max_steps);
    f["snake_field_length"] = double_field(&RunConfig::snake_field_length);
    f["snake_field_width"] = double_field(&RunConfig::snake_field_width);
    f["snake_start_margin"] = double_field(&RunConfig::snake_start_margin);
    f["snake_link_length"] = double_field(&RunConfig::snake_link_length);
    f["snake_tracking_gain"] = double_field(&RunConfig::snake_tracking_gain);
    f["snake_substeps"] = int_field(&RunConfig::snake_substeps);
    f["snake_exit_terminal"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                  c.snake_exit_terminal = parse_bool(k, v);
                                },
                                [](const RunConfig& c) { return fmt_bool(c.snake_exit_terminal); }};
    f["cpg_topology"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                           envs::parse_topology(v);
                           c.cpg_topology = v;
                         },
                         [](const RunConfig& c) { return c.cpg_topology; }};

    f["gamma"] = hp_double(&Hyperparams::gamma);
    f["learning_rate"] = hp_double(&Hyperparams::learning_rate);
    f["beta_t"] = hp_double(&Hyperparams::beta_t);
    f["beta_z"] = hp_double(&Hyperparams::beta_z);
    f["beta_a"] = hp_double(&Hyperparams::beta_a);
    f["eta"] = hp_double(&Hyperparams::eta);
    f["latent_dim"] = hp_int(&Hyperparams::latent_dim);
    f["rho"] = hp_double(&Hyperparams::rho);
    f["target_rate"] = hp_double(&Hyperparams::target_rate);
    f["behavior_rate"] = hp_double(&Hyperparams::behavior_rate);
    f["trace_lambda"] = hp_double(&Hyperparams::trace_lambda);
    f["tau_opt"] = hp_double(&Hyperparams::tau_opt);
    f["adam_beta1"] = hp_double(&Hyperparams::adam_beta1);
    f["adam_beta2"] = hp_double(&Hyperparams::adam_beta2);
    f["adam_eps"] = hp_double(&Hyperparams::adam_eps);
    f["nu_init"] = hp_double(&Hyperparams::nu_init);
    f["scale_floor"] = hp_double(&Hyperparams::scale_floor);
    f["nu_learnable"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                           c.hp.nu_learnable = parse_bool(k, v);
                         },
                         [](const RunConfig& c) { return fmt_bool(c.hp.nu_learnable); }};
    f["esn_layers"] = hp_int(&Hyperparams::esn_layers);
    f["esn_units"] = hp_int(&Hyperparams::esn_units);
    f["esn_leak"] = hp_double(&Hyperparams::esn_leak);
    return f;
  }();
  return table;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json collapse_json(const CollapseAnalysis& c) {
  return {{"reached_success", c.reached_success},
          {"first_success_episode", c.first_success_episode},
          {"final_median", c.final_median},
          {"collapsed", c.collapsed},
          {"hff_jumps", c.hff_jumps},
          {"explained", c.explained}};
}

json summary_json(const RunSummary& s) {
  return {{"config_hash", s.config_hash},
          {"seed", s.seed},
          {"episodes_completed", s.episodes_completed},
          {"aborted", s.aborted},
          {"abort_reason", s.abort_reason},
          {"mean_last", s.mean_last},
          {"median_last", s.median_last},
          {"final_mean_w", s.final_mean_w},
          {"mean_w_first50", s.mean_w_first50},
          {"mean_w_last50", s.mean_w_last50},
          {"success", s.success},
          {"collapse", collapse_json(s.collapse)},
          {"seconds", s.seconds}};
}

RunSummary summarize(const RunConfig& config, const std::vector<EpisodeMetrics>& eps) {
  RunSummary s;
  s.config_hash = config.hash();
  s.seed = config.seed;
  s.episodes_completed = static_cast<int>(eps.size());
  const std::size_t k = std::min<std::size_t>(eps.size(), static_cast<std::size_t>(config.summary_window));
  std::vector<double> last_scores, last_w;
  for (std::size_t i = eps.size() - k; i < eps.size(); ++i) {
    last_scores.push_back(eps[i].score);
    last_w.push_back(eps[i].mean_w);
  }
  s.mean_last = mean_of(last_scores);
  s.median_last = median(last_scores);
  s.final_mean_w = mean_of(last_w);
  const std::size_t band = std::min<std::size_t>(50, eps.size());
  std::vector<double> first_w, tail_w;
  for (std::size_t i = 0; i < band; ++i) first_w.push_back(eps[i].mean_w);
  for (std::size_t i = eps.size() - band; i < eps.size(); ++i) tail_w.push_back(eps[i].mean_w);
  s.mean_w_first50 = mean_of(first_w);
  s.mean_w_last50 = mean_of(tail_w);
  s.success = !eps.empty() && s.median_last >= config.success_threshold;
  s.collapse = analyze_collapse(eps, config.summary_window, config.success_threshold,
                                config.hff_jump_threshold);
  return s;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(*this) << "\n";
  return os.str();
}

std::string RunConfig::hash() const {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) {
    if (key == "seed" || key == "output_dir") continue;
    os << key << " = " << field.get(*this) << "\n";
  }
  return fnv1a_hex(os.str());
}

void RunConfig::validate() const {
  hp.validate();
  auto fail = [](const std::string& what) { throw std::invalid_argument("config " + what); };
  if (episodes < 1) fail("episodes must be >= 1");
  if (checkpoint_interval < 0) fail("checkpoint_interval must be >= 0");
  if (summary_window < 1) fail("summary_window must be >= 1");
  if (cartpole_max_steps < 1 || snake_max_steps < 1) fail("max steps must be >= 1");
  if (!(snake_field_length > snake_start_margin && snake_start_margin >= 0.0))
    fail("snake field must extend past the start pose");
  if (!(snake_field_width > 0.0)) fail("snake_field_width must be > 0");
  if (!(snake_link_length > 0.0)) fail("snake_link_length must be > 0");
  if (!(snake_tracking_gain > 0.0)) fail("snake_tracking_gain must be > 0");
  if (snake_substeps < 1) fail("snake_substeps must be >= 1");
  if (failure && env != "snake") fail("failure injection needs the snake environment");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

std::unique_ptr<envs::Environment> make_environment(const RunConfig& config, std::uint64_t seed,
                                                    bool with_failure) {
  if (config.env == "cartpole") {
    if (with_failure) throw std::invalid_argument("failure injection needs the snake environment");
    envs::CartPoleParams p;
    p.max_steps = config.cartpole_max_steps;
    return std::make_unique<envs::CartPole>(seed, p);
  }
  if (config.env == "snake") {
    envs::SnakeParams p;
    p.max_steps = config.snake_max_steps;
    p.field_length = config.snake_field_length;
    p.field_width = config.snake_field_width;
    p.start_margin = config.snake_start_margin;
    p.link_length = config.snake_link_length;
    p.tracking_gain = config.snake_tracking_gain;
    p.substeps = config.snake_substeps;
    p.exit_is_terminal = config.snake_exit_terminal;
    p.cpg.topology = envs::parse_topology(config.cpg_topology);
    auto snake = std::make_unique<envs::Snake>(p);
    if (!with_failure) return snake;
    envs::SensingFailure failure({envs::Snake::kXIndex, envs::Snake::kYIndex},
                                 envs::left_of(envs::Snake::kXIndex, config.failure_x_threshold));
    return std::make_unique<envs::FailureWrapper>(std::move(snake), std::move(failure));
  }
  throw std::invalid_argument("unknown environment '" + config.env + "'");
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "episode",    "score",     "mean_w",     "mean_d",           "mean_H_fb",     "mean_H_ff",
      "mean_delta", "loss_traj", "loss_value", "loss_model_recon", "loss_model_kl", "loss_model_ce"};
  return cols;
}

std::string metrics_row(const EpisodeMetrics& m) {
  std::ostringstream os;
  os.precision(10);
  os << m.episode << ',' << m.score << ',' << m.mean_w << ',' << m.mean_d << ',' << m.mean_h_fb
     << ',' << m.mean_h_ff << ',' << m.mean_delta << ',' << m.loss_traj << ',' << m.loss_value
     << ',' << m.loss_model_recon << ',' << m.loss_model_kl << ',' << m.loss_model_ce;
  return os.str();
}

std::vector<EpisodeMetrics> read_metrics(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(trim(cell));
  }
  if (header != metrics_columns()) throw std::runtime_error(csv.string() + ": unexpected columns");
  std::vector<EpisodeMetrics> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) v.push_back(parse_double("metrics", trim(cell)));
    if (v.size() != header.size()) throw std::runtime_error(csv.string() + ": short row");
    EpisodeMetrics m;
    m.episode = static_cast<int>(v[0]);
    m.score = v[1];
    m.mean_w = v[2];
    m.mean_d = v[3];
    m.mean_h_fb = v[4];
    m.mean_h_ff = v[5];
    m.mean_delta = v[6];
    m.loss_traj = v[7];
    m.loss_value = v[8];
    m.loss_model_recon = v[9];
    m.loss_model_kl = v[10];
    m.loss_model_ce = v[11];
    out.push_back(m);
  }
  return out;
}

std::vector<int> detect_hff_jumps(const std::vector<EpisodeMetrics>& episodes, double threshold) {
  std::vector<int> out;
  for (std::size_t i = 1; i < episodes.size(); ++i)
    if (std::abs(episodes[i].mean_h_ff - episodes[i - 1].mean_h_ff) > threshold)
      out.push_back(episodes[i].episode);
  return out;
}

CollapseAnalysis analyze_collapse(const std::vector<EpisodeMetrics>& episodes, int window,
                                  double success_threshold, double jump_threshold) {
  CollapseAnalysis a;
  a.hff_jumps = detect_hff_jumps(episodes, jump_threshold);
  const std::size_t k = static_cast<std::size_t>(std::max(window, 1));
  for (std::size_t end = k; end <= episodes.size(); ++end) {
    std::vector<double> s;
    for (std::size_t i = end - k; i < end; ++i) s.push_back(episodes[i].score);
    if (median(s) >= success_threshold) {
      a.reached_success = true;
      a.first_success_episode = episodes[end - 1].episode;
      break;
    }
  }
  if (!episodes.empty()) {
    std::vector<double> s;
    for (std::size_t i = episodes.size() - std::min(k, episodes.size()); i < episodes.size(); ++i)
      s.push_back(episodes[i].score);
    a.final_median = median(s);
  }
  a.collapsed = a.reached_success && a.final_median < 0.5 * success_threshold;
  if (a.collapsed) {
    a.explained = std::any_of(a.hff_jumps.begin(), a.hff_jumps.end(),
                              [&](int e) { return e > a.first_success_episode; });
  }
  return a;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

TrainResult run_train(const RunConfig& config, const EpisodeCallback& on_episode) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  result.run_dir = config.output_dir;
  fs::create_directories(config.output_dir / "checkpoints");
  write_text(config.output_dir / "config.txt", config.to_text());

  auto env = make_environment(config, config.seed, config.failure);
  Agent agent(env->observation_dim(), env->action_dim(), config.hp, config.seed);

  std::ofstream csv(config.output_dir / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write metrics.csv");
  for (std::size_t i = 0; i < metrics_columns().size(); ++i)
    csv << (i ? "," : "") << metrics_columns()[i];
  csv << "\n";

  RunSummary& summary = result.summary;
  for (int ep = 1; ep <= config.episodes; ++ep) {
    EpisodeMetrics m;
    m.episode = ep;
    Eigen::VectorXd obs = env->reset();
    agent.begin_episode();
    int steps = 0;
    try {
      while (true) {
        const ActionChoice choice = agent.act(obs);
        const envs::StepResult r = env->step(choice.action);
        const Transition tr = agent.make_transition(obs, choice, r.reward, r.observation, r.terminal);
        const StepMetrics s = agent.train_step(tr);
        agent.observe(obs, choice.action);
        ++steps;
        m.score += r.reward;
        m.mean_w += s.w;
        m.mean_d += s.d;
        m.mean_h_fb += s.h_fb;
        m.mean_h_ff += s.h_ff;
        m.mean_delta += s.delta;
        m.loss_traj += s.loss_traj;
        m.loss_value += s.loss_value;
        m.loss_model_recon += s.loss_model_recon;
        m.loss_model_kl += s.loss_model_kl;
        m.loss_model_ce += s.loss_model_ce;
        obs = r.observation;
        if (r.done()) break;
      }
    } catch (const NumericalError& e) {
      summary.aborted = true;
      summary.abort_reason = e.what();
      std::ostringstream diag;
      diag << "episode = " << ep << "\nstep = " << steps << "\nreason = " << e.what()
           << "\nconfig_hash = " << config.hash() << "\nseed = " << config.seed << "\n";
      write_text(config.output_dir / "failure.txt", diag.str());
      break;
    }
    const double n = std::max(steps, 1);
    m.steps = steps;
    for (double* f : {&m.mean_w, &m.mean_d, &m.mean_h_fb, &m.mean_h_ff, &m.mean_delta,
                      &m.loss_traj, &m.loss_value, &m.loss_model_recon, &m.loss_model_kl,
                      &m.loss_model_ce})
      *f /= n;
    csv << metrics_row(m) << "\n";
    csv.flush();
    result.episodes.push_back(m);
    if (on_episode) on_episode(m);
    if (config.checkpoint_interval > 0 && ep % config.checkpoint_interval == 0) {
      std::ostringstream name;
      name << "ep" << std::setw(5) << std::setfill('0') << ep << ".ckpt";
      agent.save(config.output_dir / "checkpoints" / name.str());
    }
  }
  if (!summary.aborted) agent.save(config.output_dir / "final.ckpt");

  const bool aborted = summary.aborted;
  const std::string reason = summary.abort_reason;
  summary = summarize(config, result.episodes);
  summary.aborted = aborted;
  summary.abort_reason = reason;
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(config.output_dir / "summary.json", summary_json(summary).dump(2) + "\n");
  return result;
}

EvalReport run_eval(const RunConfig& config, const fs::path& checkpoint, EvalMode mode,
                    bool failure) {
  config.validate();
  auto probe = make_environment(config, config.seed, false);
  Agent agent(probe->observation_dim(), probe->action_dim(), config.hp, config.seed);
  agent.load(checkpoint);
  return run_eval(config, agent, mode, failure);
}

EvalReport run_eval(const RunConfig& config, Agent& agent, EvalMode mode, bool failure) {
  auto env = make_environment(config, config.seed, failure);
  if (env->observation_dim() != agent.state_dim() || env->action_dim() != agent.action_dim())
    throw std::invalid_argument("eval: agent does not match the " + env->name() + " environment");
  auto* wrapper = dynamic_cast<envs::FailureWrapper*>(env.get());

  EvalReport report;
  report.mode = mode;
  report.failure = failure;
  Eigen::VectorXd obs = env->reset();
  agent.begin_episode();
  const bool is_snake = env->name() == "snake";
  double sum_abs_y = 0.0;
  while (true) {
    const ActionChoice choice = agent.act_deterministic(obs, mode);
    const envs::StepResult r = env->step(choice.action);
    EvalStep st;
    st.step = report.steps + 1;
    st.observation = r.observation;
    st.true_observation = wrapper ? wrapper->true_observation() : r.observation;
    st.raw_action = choice.action;
    st.applied_action = env->applied_action(choice.action);
    st.reward = r.reward;
    st.w = choice.w;
    st.failure_active = wrapper && wrapper->failure_active();
    agent.observe(obs, choice.action);
    obs = r.observation;
    ++report.steps;
    report.score += r.reward;
    if (is_snake) {
      report.final_x = st.true_observation(envs::Snake::kXIndex);
      report.final_abs_y = std::abs(st.true_observation(envs::Snake::kYIndex));
      sum_abs_y += report.final_abs_y;
    }
    report.trajectory.push_back(std::move(st));
    if (r.done()) break;
  }
  if (is_snake) {
    report.mean_abs_y = sum_abs_y / report.steps;
    const double x_max = config.snake_field_length - config.snake_start_margin;
    report.reached_goal = report.final_x > x_max;
  }
  return report;
}

void write_eval_report(const EvalReport& report, const std::vector<std::string>& labels,
                       const fs::path& dir) {
  fs::create_directories(dir);
  const std::string stem =
      "eval_" + to_string(report.mode) + (report.failure ? "_failure" : "");
  std::ofstream csv(dir / (stem + ".csv"));
  if (!csv) throw std::runtime_error("cannot write " + (dir / (stem + ".csv")).string());
  csv.precision(10);
  csv << "step,reward,w,failure_active";
  for (const auto& l : labels) csv << ",obs_" << l;
  for (const auto& l : labels) csv << ",true_" << l;
  if (!report.trajectory.empty()) {
    for (Eigen::Index i = 0; i < report.trajectory.front().raw_action.size(); ++i)
      csv << ",action_raw_" << i + 1;
    for (Eigen::Index i = 0; i < report.trajectory.front().applied_action.size(); ++i)
      csv << ",action_applied_" << i + 1;
  }
  csv << "\n";
  for (const EvalStep& s : report.trajectory) {
    csv << s.step << ',' << s.reward << ',' << s.w << ',' << (s.failure_active ? 1 : 0);
    for (Eigen::Index i = 0; i < s.observation.size(); ++i) csv << ',' << s.observation(i);
    for (Eigen::Index i = 0; i < s.true_observation.size(); ++i) csv << ',' << s.true_observation(i);
    for (Eigen::Index i = 0; i < s.raw_action.size(); ++i) csv << ',' << s.raw_action(i);
    for (Eigen::Index i = 0; i < s.applied_action.size(); ++i) csv << ',' << s.applied_action(i);
    csv << "\n";
  }
  const json j = {{"mode", to_string(report.mode)},
                  {"failure", report.failure},
                  {"score", report.score},
                  {"steps", report.steps},
                  {"final_x", report.final_x},
                  {"final_abs_y", report.final_abs_y},
                  {"mean_abs_y", report.mean_abs_y},
                  {"reached_goal", report.reached_goal}};
  write_text(dir / (stem + ".json"), j.dump(2) + "\n");
}

Aggregate aggregate_runs(const std::vector<std::vector<EpisodeMetrics>>& runs) {
  Aggregate agg;
  std::size_t longest = 0;
  for (const auto& r : runs) longest = std::max(longest, r.size());
  for (std::size_t e = 0; e < longest; ++e) {
    std::vector<double> scores, ws;
    for (const auto& r : runs) {
      if (e < r.size()) {
        scores.push_back(r[e].score);
        ws.push_back(r[e].mean_w);
      }
    }
    agg.episode.push_back(static_cast<int>(e + 1));
    agg.score_q25.push_back(quantile(scores, 0.25));
    agg.score_q50.push_back(quantile(scores, 0.5));
    agg.score_q75.push_back(quantile(scores, 0.75));
    agg.w_q25.push_back(quantile(ws, 0.25));
    agg.w_q50.push_back(quantile(ws, 0.5));
    agg.w_q75.push_back(quantile(ws, 0.75));
  }
  return agg;
}

void write_aggregate(const Aggregate& agg, const fs::path& csv_path) {
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  csv.precision(10);
  csv << "episode,score_q25,score_q50,score_q75,w_q25,w_q50,w_q75\n";
  for (std::size_t i = 0; i < agg.episode.size(); ++i)
    csv << agg.episode[i] << ',' << agg.score_q25[i] << ',' << agg.score_q50[i] << ','
        << agg.score_q75[i] << ',' << agg.w_q25[i] << ',' << agg.w_q50[i] << ',' << agg.w_q75[i]
        << "\n";
}

SweepResult run_sweep(const RunConfig& config_template, const std::vector<std::uint64_t>& seeds,
                      int jobs, const std::function<void(const RunSummary&)>& on_run) {
  config_template.validate();
  if (seeds.empty()) return {};
  std::vector<TrainResult> results(seeds.size());
  std::mutex report_mutex;
  auto train_one = [&](std::size_t i) {
    RunConfig c = config_template;
    c.seed = seeds[i];
    c.output_dir = config_template.output_dir / ("seed_" + std::to_string(seeds[i]));
    results[i] = run_train(c);
    if (on_run) {
      std::lock_guard<std::mutex> lock(report_mutex);
      on_run(results[i].summary);
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::max(jobs, 1));
  for (std::size_t begin = 0; begin < seeds.size(); begin += workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = begin; i < std::min(begin + workers, seeds.size()); ++i)
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                 train_one, i));
    for (auto& f : batch) f.get();
  }

  SweepResult sweep;
  std::vector<std::vector<EpisodeMetrics>> curves;
  json runs = json::array();
  json success_seeds = json::array(), failure_seeds = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const RunSummary& s = results[i].summary;
    sweep.runs.push_back(s);
    curves.push_back(results[i].episodes);
    (s.success ? sweep.successes : sweep.failures)++;
    (s.success ? success_seeds : failure_seeds).push_back(s.seed);
    runs.push_back(summary_json(s));
  }
  sweep.aggregate = aggregate_runs(curves);
  write_aggregate(sweep.aggregate, config_template.output_dir / "aggregate.csv");
  const json j = {{"config_hash", config_template.hash()},
                  {"success_threshold", config_template.success_threshold},
                  {"summary_window", config_template.summary_window},
                  {"successes", sweep.successes},
                  {"failures", sweep.failures},
                  {"success_seeds", success_seeds},
                  {"failure_seeds", failure_seeds},
                  {"runs", runs}};
  write_text(config_template.output_dir / "sweep_summary.json", j.dump(2) + "\n");
  return sweep;
}

}  // namespace fbff::harness
