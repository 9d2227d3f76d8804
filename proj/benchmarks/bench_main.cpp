#include "fbff/envs/cartpole.hpp"
#include "fbff/envs/snake.hpp"
#include "fbff/learner.hpp"
#include "fbff/networks.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace fbff;
using ad::Vector;

namespace {

void BM_MlpForward(benchmark::State& state) {
  ParameterSet params;
  std::mt19937_64 rng(1);
  MlpHead head(params, "m", state.range(0), 8, rng);
  const ad::Tensor x = ad::constant(ad::Matrix(Vector::Ones(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(head.forward(x).value().data());
}
BENCHMARK(BM_MlpForward)->Arg(4)->Arg(34)->Arg(300);

void BM_EchoStateStep(benchmark::State& state) {
  EchoStateOptions o;
  o.units = state.range(0);
  EchoState esn(34, o);
  const Vector u = Vector::Constant(34, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(esn.step(u).data());
}
BENCHMARK(BM_EchoStateStep)->Arg(20)->Arg(100);

template <class Env>
void train_steps(benchmark::State& state, Env& env) {
  Agent agent(env.observation_dim(), env.action_dim(), Hyperparams{}, 0);
  Vector obs = env.reset();
  agent.begin_episode();
  for (auto _ : state) {
    const ActionChoice c = agent.act(obs);
    const envs::StepResult r = env.step(c.action);
    agent.train_step(agent.make_transition(obs, c, r.reward, r.observation, r.terminal));
    agent.observe(obs, c.action);
    obs = r.observation;
    if (r.done()) {
      obs = env.reset();
      agent.begin_episode();
    }
  }
}

void BM_TrainStepCartPole(benchmark::State& state) {
  envs::CartPole env(0);
  train_steps(state, env);
}
BENCHMARK(BM_TrainStepCartPole)->Unit(benchmark::kMillisecond);

void BM_TrainStepSnake(benchmark::State& state) {
  envs::Snake env;
  train_steps(state, env);
}
BENCHMARK(BM_TrainStepSnake)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
