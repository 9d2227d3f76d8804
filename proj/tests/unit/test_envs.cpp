#include "fbff/envs/cartpole.hpp"
#include "fbff/envs/cpg.hpp"
#include "fbff/envs/failure.hpp"
#include "fbff/envs/snake.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace fbff::envs;

namespace {

// Classic cart-pole equations (uniform rod about its centre), written out
// independently of the library, integrated with RK4.
std::array<double, 4> cartpole_rhs(const std::array<double, 4>& s, double f) {
  const double g = 9.81, mc = 1.0, mp = 0.1, l = 0.5;
  const double th = s[2], w = s[3];
  const double c = std::cos(th), sn = std::sin(th);
  const double num = g * sn + c * (-f - mp * l * w * w * sn) / (mc + mp);
  const double den = l * (4.0 / 3.0 - mp * c * c / (mc + mp));
  const double th_acc = num / den;
  const double x_acc = (f + mp * l * (w * w * sn - th_acc * c)) / (mc + mp);
  return {s[1], x_acc, w, th_acc};
}

std::array<double, 4> rk4(std::array<double, 4> s, double f, double duration, double dt) {
  const int n = static_cast<int>(std::lround(duration / dt));
  auto axpy = [](const std::array<double, 4>& a, const std::array<double, 4>& b, double h) {
    return std::array<double, 4>{a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]};
  };
  for (int i = 0; i < n; ++i) {
    const auto k1 = cartpole_rhs(s, f);
    const auto k2 = cartpole_rhs(axpy(s, k1, dt / 2), f);
    const auto k3 = cartpole_rhs(axpy(s, k2, dt / 2), f);
    const auto k4 = cartpole_rhs(axpy(s, k3, dt), f);
    for (int j = 0; j < 4; ++j) s[j] += dt / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return s;
}

TEST(CartPole, UprightEquilibriumIsFixedPoint) {
  CartPole env(1);
  env.set_state({});
  const StepResult r = env.step(Vector::Zero(1));
  EXPECT_TRUE(r.observation.isZero());
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_FALSE(r.done());
}

TEST(CartPole, OneStepMatchesFineOracle) {
  for (double f : {0.0, 5.0, -7.0}) {
    CartPoleState s;
    s.theta = 0.01;
    s.x_dot = 0.1;
    const CartPoleState env = cartpole_integrate(s, f, 0.02, CartPoleParams{});
    const auto ref = rk4({s.x, s.x_dot, s.theta, s.theta_dot}, f, 0.02, 1e-5);
    // Semi-implicit Euler: position error is about dt^2 |acc| / 2 per step,
    // velocity error O(dt^2).
    const auto acc = cartpole_rhs({s.x, s.x_dot, s.theta, s.theta_dot}, f);
    const double dt2 = 0.02 * 0.02;
    EXPECT_NEAR(env.theta, ref[2], 0.6 * dt2 * std::abs(acc[3]) + 1e-9) << f;
    EXPECT_NEAR(env.x, ref[0], 0.6 * dt2 * std::abs(acc[1]) + 1e-9) << f;
    EXPECT_NEAR(env.theta_dot, ref[3], 20.0 * dt2 * (1.0 + std::abs(acc[3]))) << f;
    EXPECT_NEAR(env.x_dot, ref[1], 20.0 * dt2 * (1.0 + std::abs(acc[1]))) << f;
  }
  CartPoleState s;
  s.theta = 0.01;
  const CartPoleState next = cartpole_integrate(s, 0.0, 0.02, CartPoleParams{});
  EXPECT_GT(next.theta, 0.01);
  EXPECT_GT(rk4({0, 0, 0.01, 0}, 0.0, 0.02, 1e-5)[2], 0.01);
}

TEST(CartPole, DerivativeMatchesOracle) {
  const CartPoleState s{0.3, -0.2, 0.15, 0.7};
  for (double f : {0.0, 3.0, -10.0}) {
    const CartPoleState d = cartpole_derivative(s, f, CartPoleParams{});
    const auto ref = cartpole_rhs({s.x, s.x_dot, s.theta, s.theta_dot}, f);
    EXPECT_NEAR(d.x_dot, ref[1], 1e-12);
    EXPECT_NEAR(d.theta_dot, ref[3], 1e-12);
  }
}

TEST(CartPole, ForceSquashedByTanh) {
  CartPole env(1);
  EXPECT_NEAR(env.applied_action(Vector::Constant(1, 100.0))(0), 10.0, 1e-12);
  EXPECT_NEAR(env.applied_action(Vector::Constant(1, 0.5))(0), 10.0 * std::tanh(0.5), 1e-15);
}

TEST(CartPole, CapTruncatesWithoutTerminal) {
  CartPoleParams p;
  p.gravity = 0.0;  // nothing falls
  CartPole env(3, p);
  env.reset();
  env.set_state({});
  double score = 0.0;
  StepResult r;
  int steps = 0;
  do {
    r = env.step(Vector::Zero(1));
    score += r.reward;
    ++steps;
  } while (!r.done());
  EXPECT_EQ(steps, 500);
  EXPECT_EQ(score, 500.0);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminal);
}

TEST(CartPole, FallingTerminatesWithZeroReward) {
  CartPole env(3);
  env.reset();
  CartPoleState s;
  s.theta = 0.19;
  s.theta_dot = 2.0;
  env.set_state(s);
  const StepResult r = env.step(Vector::Zero(1));
  EXPECT_TRUE(r.terminal);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(CartPole, ResetIsSeededAndSmall) {
  CartPole a(9), b(9), c(10);
  const Vector sa = a.reset(), sb = b.reset(), sc = c.reset();
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa, sc);
  EXPECT_LE(sa.cwiseAbs().maxCoeff(), 0.05);
}

TEST(Cpg, DecoupledAdvancesByNaturalRate) {
  CpgParams p;
  p.alpha = 0.0;
  Cpg cpg(p);
  cpg.step();
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(cpg.phases()(i), 0.2, 1e-15);
}

TEST(Cpg, InteriorChainStepFromRest) {
  CpgParams p;
  p.topology = CouplingTopology::kChain;
  Cpg cpg(p);
  cpg.step();
  for (Eigen::Index i = 1; i < 7; ++i) EXPECT_NEAR(cpg.phases()(i), 0.12, 1e-15);
  EXPECT_NEAR(cpg.phases()(0), 0.16, 1e-15);
}

TEST(Cpg, DirectedChainPacemakerAndFollowers) {
  CpgParams p;
  p.topology = CouplingTopology::kDirectedChain;
  Cpg cpg(p);
  cpg.step();
  EXPECT_NEAR(cpg.phases()(0), 0.2, 1e-15);
  for (Eigen::Index i = 1; i < 8; ++i) EXPECT_NEAR(cpg.phases()(i), 0.16, 1e-15);
  // Locked state: each follower lags its predecessor by u_eta.
  for (int t = 0; t < 5000; ++t) cpg.step();
  for (Eigen::Index i = 1; i < 8; ++i)
    EXPECT_NEAR(cpg.phases()(i - 1) - cpg.phases()(i), 1.0, 1e-9);
}

TEST(Cpg, OutputAmplitudeBounded) {
  for (auto topo : {CouplingTopology::kChain, CouplingTopology::kAllToAll,
                    CouplingTopology::kDirectedChain}) {
    CpgParams p;
    p.topology = topo;
    Cpg cpg(p);
    for (int t = 0; t < 100000; ++t)
      ASSERT_LE(cpg.step().cwiseAbs().maxCoeff(), std::numbers::pi / 4 + 1e-15);
  }
}

TEST(Cpg, TopologyText) {
  for (auto t : {CouplingTopology::kChain, CouplingTopology::kAllToAll,
                 CouplingTopology::kDirectedChain})
    EXPECT_EQ(parse_topology(to_string(t)), t);
  EXPECT_THROW(parse_topology("ring"), std::invalid_argument);
}

// Independent resistive-force oracle. Link centres and tangents are computed
// from the full pose, their velocities by central differences of that pose
// map, and the head velocity by weighted least squares (QR).
struct Links {
  std::vector<Eigen::Vector2d> centre, tangent;
};

Links links_of(double x, double y, double heading, const Vector& q, double ell) {
  Links out;
  Eigen::Vector2d front(x, y);
  double angle = heading;
  for (Eigen::Index j = 0; j <= q.size(); ++j) {
    if (j > 0) angle += q(j - 1);
    const Eigen::Vector2d t(std::cos(angle), std::sin(angle));
    out.centre.push_back(front - 0.5 * ell * t);
    out.tangent.push_back(t);
    front -= ell * t;
  }
  return out;
}

Eigen::Vector3d oracle_velocity(double x, double y, double heading, const Vector& q,
                                const Vector& qdot, double ell, double c_lat, double c_lon) {
  const double h = 1e-7;
  const Links base = links_of(x, y, heading, q, ell);
  const std::size_t n = base.centre.size();
  Eigen::MatrixXd a(2 * n, 3);
  Eigen::VectorXd b(2 * n);
  const Links dx = links_of(x + h, y, heading, q, ell), mx = links_of(x - h, y, heading, q, ell);
  const Links dy = links_of(x, y + h, heading, q, ell), my = links_of(x, y - h, heading, q, ell);
  const Links dh = links_of(x, y, heading + h, q, ell), mh = links_of(x, y, heading - h, q, ell);
  const Links dq = links_of(x, y, heading, q + h * qdot, ell), mq = links_of(x, y, heading, q - h * qdot, ell);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d t = base.tangent[i], nn(-t.y(), t.x());
    const Eigen::Vector2d cx = (dx.centre[i] - mx.centre[i]) / (2 * h);
    const Eigen::Vector2d cy = (dy.centre[i] - my.centre[i]) / (2 * h);
    const Eigen::Vector2d ch = (dh.centre[i] - mh.centre[i]) / (2 * h);
    const Eigen::Vector2d shape = (dq.centre[i] - mq.centre[i]) / (2 * h);
    const double sl = std::sqrt(c_lat), so = std::sqrt(c_lon);
    a.row(2 * i) << sl * nn.dot(cx), sl * nn.dot(cy), sl * nn.dot(ch);
    a.row(2 * i + 1) << so * t.dot(cx), so * t.dot(cy), so * t.dot(ch);
    b(2 * i) = -sl * nn.dot(shape);
    b(2 * i + 1) = -so * t.dot(shape);
  }
  return a.colPivHouseholderQr().solve(b);
}

TEST(SnakeModel, ResistiveVelocityMatchesOracle) {
  SnakeParams p;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    Vector q(8), qd(8);
    for (int i = 0; i < 8; ++i) {
      q(i) = u(rng);
      qd(i) = 3.0 * u(rng);
    }
    const double heading = u(rng);
    const Eigen::Vector3d lib = resistive_velocity(heading, q, qd, p);
    const Eigen::Vector3d ref = oracle_velocity(0.0, 0.0, heading, q, qd, p.link_length,
                                                p.drag_lateral, p.drag_longitudinal);
    EXPECT_LT((lib - ref).cwiseAbs().maxCoeff(), 1e-5 * (1.0 + ref.norm())) << trial;
  }
}

TEST(SnakeModel, MirrorSymmetry) {
  SnakeParams p;
  Vector q(8), qd(8);
  q << 0.3, -0.2, 0.1, 0.5, -0.4, 0.2, 0.0, -0.1;
  qd << 1.0, 0.5, -0.3, 0.2, 0.8, -1.1, 0.4, 0.0;
  const Eigen::Vector3d v = resistive_velocity(0.2, q, qd, p);
  const Eigen::Vector3d m = resistive_velocity(-0.2, -q, -qd, p);
  EXPECT_NEAR(m(0), v(0), 1e-12);
  EXPECT_NEAR(m(1), -v(1), 1e-12);
  EXPECT_NEAR(m(2), -v(2), 1e-12);
}

TEST(Snake, ResetValues) {
  Snake snake;
  const Vector obs = snake.reset();
  ASSERT_EQ(obs.size(), 34);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(obs(4 * i), 0.0);
    EXPECT_EQ(obs(4 * i + 3), 0.5);
  }
  EXPECT_EQ(obs(Snake::kXIndex), 0.0);
  EXPECT_EQ(obs(Snake::kYIndex), 0.0);
}

TEST(Snake, ObservationIndexMap) {
  Snake snake;
  const auto labels = snake.observation_labels();
  ASSERT_EQ(labels.size(), 34u);
  EXPECT_EQ(labels[0], "theta_1");
  EXPECT_EQ(labels[1], "theta_dot_1");
  EXPECT_EQ(labels[2], "tau_1");
  EXPECT_EQ(labels[3], "k_1");
  EXPECT_EQ(labels[31], "k_8");
  EXPECT_EQ(labels[Snake::kXIndex], "x");
  EXPECT_EQ(labels[Snake::kYIndex], "y");
  EXPECT_EQ(Snake::kObservationVersion, 1);
  snake.reset();
  const StepResult r = snake.step(Vector::Constant(8, 0.3));
  EXPECT_EQ(r.observation(Snake::kXIndex), snake.state().x);
  EXPECT_EQ(r.observation(Snake::kYIndex), snake.state().y);
  EXPECT_EQ(r.observation.segment(0, 1)(0), snake.state().joint_angle(0));
  EXPECT_NEAR(r.observation(3), 1.0 / (1.0 + std::exp(-0.3)), 1e-15);
}

TEST(Snake, StraightBodyWithZeroStiffnessStaysOnAxis) {
  Snake snake;
  snake.reset();
  for (int t = 0; t < 500; ++t) {
    const StepResult r = snake.step(Vector::Constant(8, -800.0));
    EXPECT_LT(std::abs(snake.state().y), 1e-9);
    EXPECT_LE(r.reward, 0.0);
  }
}

TEST(Snake, RewardIsMinusAbsLateralOffset) {
  Snake snake;
  snake.reset();
  for (int t = 0; t < 300; ++t) {
    const StepResult r = snake.step(Vector::Constant(8, 0.5 * std::sin(0.1 * t)));
    EXPECT_EQ(r.reward, -std::abs(snake.state().y));
    EXPECT_LE(r.reward, 0.0);
    if (r.done()) break;
  }
}

TEST(Snake, ForwardProgressPerCpgPeriodMatchesOracle) {
  // Uniform k = 0.5 (action 0). Let the gait settle, then compare one CPG
  // period against the oracle model integrated at dt = 1e-3.
  SnakeParams p;
  Snake snake(p);
  snake.reset();
  for (int t = 0; t < 200; ++t) snake.step(Vector::Zero(8));
  const SnakeState start = snake.state();
  Cpg cpg = snake.cpg();
  const int period_steps = 31;  // 2 pi / (u_r dt) = 31.4

  double x = start.x, y = start.y, heading = start.heading;
  Vector q = start.joint_angle;
  const double gain = p.tracking_gain * 0.5;
  const int fine = 20;  // 0.02 / 1e-3
  for (int t = 0; t < period_steps; ++t) {
    const Vector ref = cpg.step();
    for (int k = 0; k < fine; ++k) {
      const Vector qd = gain * (ref - q);
      const Eigen::Vector3d v = oracle_velocity(x, y, heading, q, qd, p.link_length,
                                                p.drag_lateral, p.drag_longitudinal);
      x += 1e-3 * v(0);
      y += 1e-3 * v(1);
      heading += 1e-3 * v(2);
      q += 1e-3 * qd;
    }
  }
  for (int t = 0; t < period_steps; ++t) snake.step(Vector::Zero(8));
  const double lib_dx = snake.state().x - start.x;
  const double ref_dx = x - start.x;
  EXPECT_GT(ref_dx, 0.0);
  EXPECT_GT(lib_dx, 0.0);
  EXPECT_NEAR(lib_dx, ref_dx, 0.05 * std::abs(ref_dx));
}

TEST(Snake, LeavingFieldEndsEpisode) {
  for (bool absorbing : {false, true}) {
    SnakeParams p;
    p.field_width = 1e-4;
    p.exit_is_terminal = absorbing;
    Snake snake(p);
    snake.reset();
    StepResult r;
    int t = 0;
    for (; t < 2000 && !r.done(); ++t) r = snake.step(Vector::Constant(8, 2.0));
    EXPECT_LT(t, 2000);
    EXPECT_EQ(r.terminal, absorbing);
    EXPECT_EQ(r.truncated, !absorbing);
  }
}

TEST(Snake, ReplayIsBitwise) {
  auto run = [] {
    Snake s;
    s.reset();
    for (int t = 0; t < 100; ++t) s.step(Vector::Constant(8, std::cos(0.3 * t)));
    return s.observation();
  };
  EXPECT_EQ(run(), run());
}

TEST(SensingFailure, NeverActiveIsIdentity) {
  SensingFailure f({32, 33}, [](const Vector&) { return false; });
  Vector o = Vector::LinSpaced(34, 0, 1);
  EXPECT_EQ(f.reset(o), o);
  for (int t = 0; t < 10; ++t) {
    o.array() += 0.1;
    EXPECT_EQ(f.apply(o), o);
    EXPECT_FALSE(f.active());
  }
}

TEST(SensingFailure, AlwaysActiveFreezesInitialPose) {
  SensingFailure f({32, 33}, [](const Vector&) { return true; });
  Vector o = Vector::LinSpaced(34, 0, 1);
  const Vector first = f.reset(o);
  EXPECT_EQ(first(32), o(32));
  for (int t = 0; t < 10; ++t) {
    o.array() += 0.1;
    const Vector seen = f.apply(o);
    EXPECT_EQ(seen(32), first(32));
    EXPECT_EQ(seen(33), first(33));
    EXPECT_EQ(seen.head(32), o.head(32));
    EXPECT_TRUE(f.active());
  }
}

TEST(SensingFailure, FreezesOnlyInsideRegion) {
  SensingFailure f({32, 33}, left_of(32, 1.5));
  Vector o = Vector::Zero(34);
  o(32) = 1.6;
  o(33) = 0.2;
  f.reset(o);
  o(32) = 1.4;  // enters the region: last good pose is (1.6, 0.2)
  o(33) = 0.3;
  Vector seen = f.apply(o);
  EXPECT_EQ(seen(32), 1.6);
  EXPECT_EQ(seen(33), 0.2);
  o(32) = 1.0;
  seen = f.apply(o);
  EXPECT_EQ(seen(32), 1.6);
  o(32) = 1.7;  // leaves the region
  seen = f.apply(o);
  EXPECT_EQ(seen(32), 1.7);
  EXPECT_EQ(seen(33), 0.3);
  EXPECT_FALSE(f.active());
}

TEST(FailureWrapper, WrapsSnakeAndReportsTruePose) {
  FailureWrapper env(std::make_unique<Snake>(),
                     SensingFailure({Snake::kXIndex, Snake::kYIndex}, left_of(Snake::kXIndex, 1.5)));
  const Vector first = env.reset();
  EXPECT_TRUE(env.failure_active());
  Vector seen;
  for (int t = 0; t < 100; ++t) seen = env.step(Vector::Zero(8)).observation;
  EXPECT_EQ(seen(Snake::kXIndex), first(Snake::kXIndex));
  EXPECT_EQ(seen(Snake::kYIndex), first(Snake::kYIndex));
  EXPECT_NE(env.true_observation()(Snake::kXIndex), first(Snake::kXIndex));
  EXPECT_EQ(seen.head(32), env.true_observation().head(32));
  EXPECT_EQ(env.observation_dim(), 34);
  EXPECT_EQ(env.name(), "snake");
}

}  // namespace
