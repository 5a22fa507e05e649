#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "slotbench/sac.hpp"
#include "support/bandit.hpp"
#include "support/gradcheck.hpp"

namespace slotbench {
namespace {

using test::random_matrix;

Transition tagged(double tag, int obs_dim = 2) {
  Transition t;
  t.observation.assign(static_cast<std::size_t>(obs_dim), tag);
  t.next_observation.assign(static_cast<std::size_t>(obs_dim), tag + 0.5);
  t.action = {tag, -tag, 0.0};
  t.reward = tag;
  t.done = DoneKind::kTruncated;
  return t;
}

// ------------------------------------------------------------------- replay

TEST(ReplayBuffer, OverwritesOldestFirst) {
  ReplayBuffer buf(2, 2);
  buf.push(tagged(1));
  buf.push(tagged(2));
  buf.push(tagged(3));
  ASSERT_EQ(buf.size(), 2U);
  EXPECT_EQ(buf.at(0).reward, 2.0);
  EXPECT_EQ(buf.at(1).reward, 3.0);
  EXPECT_EQ(buf.at(1).next_observation[0], 3.5);
  EXPECT_EQ(buf.at(1).done, DoneKind::kTruncated);
}

TEST(ReplayBuffer, SingleItemSamplesRepeat) {
  ReplayBuffer buf(8, 2);
  buf.push(tagged(7));
  std::mt19937_64 rng(1);
  const Batch b = buf.sample(5, rng);
  ASSERT_EQ(b.obs.cols(), 5);
  for (Eigen::Index j = 0; j < 5; ++j) {
    EXPECT_EQ(b.reward(j), 7.0);
    EXPECT_EQ(b.obs(0, j), 7.0);
    EXPECT_EQ(b.next_obs(1, j), 7.5);
    EXPECT_EQ(b.action(1, j), -7.0);
    EXPECT_EQ(b.terminal(j), 0.0);
  }
}

TEST(ReplayBuffer, TerminalFlagOnlyForTrueTerminations) {
  ReplayBuffer buf(4, 1);
  Transition t = tagged(1, 1);
  t.done = DoneKind::kTerminal;
  buf.push(t);
  std::mt19937_64 rng(1);
  EXPECT_EQ(buf.sample(1, rng).terminal(0), 1.0);
  ReplayBuffer trunc(4, 1);
  trunc.push(tagged(1, 1));
  EXPECT_EQ(trunc.sample(1, rng).terminal(0), 0.0);
}

TEST(ReplayBuffer, UniformSampling) {
  ReplayBuffer buf(10, 1);
  for (int i = 0; i < 25; ++i) buf.push(tagged(i, 1));  // wraps twice
  std::mt19937_64 rng(2);
  std::vector<long> counts(25, 0);
  const int n = 100000;
  for (int k = 0; k < n / 1000; ++k) {
    const Batch b = buf.sample(1000, rng);
    for (Eigen::Index j = 0; j < b.reward.size(); ++j) ++counts[static_cast<std::size_t>(b.reward(j))];
  }
  const double p = 0.1;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int i = 0; i < 15; ++i) EXPECT_EQ(counts[static_cast<std::size_t>(i)], 0);
  for (int i = 15; i < 25; ++i) EXPECT_NEAR(counts[static_cast<std::size_t>(i)], n * p, 3.0 * sigma);
}

TEST(ReplayBuffer, RejectsUnderfilledSampleAndBadWidth) {
  ReplayBuffer buf(4, 2);
  std::mt19937_64 rng(3);
  EXPECT_THROW(buf.sample(1, rng), std::logic_error);
  buf.push(tagged(1));
  EXPECT_THROW(buf.sample(0, rng), std::logic_error);
  EXPECT_THROW(buf.push(tagged(1, 3)), std::invalid_argument);
}

// ------------------------------------------------------------------- scaler

TEST(ObservationScaler, LayoutAndClip) {
  const ObservationScaler s = ObservationScaler::for_frames(2, true);
  ASSERT_EQ(s.scale.size(), 18U);
  std::vector<double> x(18, 1000.0);
  s.apply(x);
  for (double v : x) EXPECT_EQ(v, s.clip);
  const ObservationScaler id = ObservationScaler::identity(3);
  std::vector<double> y{1e9, -2.0, 0.5};
  id.apply(y);
  EXPECT_EQ(y[0], 1e9);
  EXPECT_THROW(id.apply(x), std::invalid_argument);
}

// ---------------------------------------------------------------- updates

SacConfig small_config() {
  SacConfig cfg;
  cfg.hidden = {16, 16};
  cfg.batch = 8;
  cfg.prefill_steps = 8;
  return cfg;
}

Batch random_batch(int obs_dim, int n, std::mt19937_64& rng) {
  Batch b;
  b.obs = random_matrix(obs_dim, n, rng);
  b.action = random_matrix(kActionDim, n, rng, 0.5).array().tanh().matrix();
  b.reward = random_matrix(1, n, rng);
  b.next_obs = random_matrix(obs_dim, n, rng);
  b.terminal = RowVector::Zero(n);
  return b;
}

double mean_squared_error_to(const Mlp& critic, const Batch& b, const RowVector& y) {
  Matrix x(b.obs.rows() + b.action.rows(), b.obs.cols());
  x << b.obs, b.action;
  return (RowVector(mlp_forward(critic, x)) - y).squaredNorm() / static_cast<double>(b.obs.cols());
}

TEST(CriticUpdate, NoDiscountNoEntropyRegressesOnReward) {
  SacConfig cfg = small_config();
  cfg.gamma = 0.0;
  cfg.initial_alpha = 1e-300;
  std::mt19937_64 rng(4);
  TrainState st = make_train_state(4, cfg, 1);
  const Batch b = random_batch(4, 8, rng);
  const double expected =
      0.5 * (mean_squared_error_to(st.critic1, b, b.reward) + mean_squared_error_to(st.critic2, b, b.reward));
  EXPECT_NEAR(critic_update(st, b, cfg), expected, 1e-12);
}

TEST(CriticUpdate, TerminalTargetIsReward) {
  SacConfig cfg = small_config();
  std::mt19937_64 rng(5);
  TrainState st = make_train_state(4, cfg, 2);
  Batch b = random_batch(4, 8, rng);
  b.terminal.setOnes();
  const double expected =
      0.5 * (mean_squared_error_to(st.critic1, b, b.reward) + mean_squared_error_to(st.critic2, b, b.reward));
  TrainState copy = st;
  EXPECT_NEAR(critic_update(copy, b, cfg), expected, 1e-12);

  b.terminal.setZero();  // truncated transitions bootstrap
  TrainState other = st;
  EXPECT_GT(std::abs(critic_update(other, b, cfg) - expected), 1e-6);
}

TEST(CriticUpdate, FitsFixedBatch) {
  SacConfig cfg = small_config();
  cfg.hidden = {64, 64};
  cfg.batch = 32;
  cfg.prefill_steps = 32;
  cfg.lr = 1e-3;
  std::mt19937_64 rng(6);
  TrainState st = make_train_state(4, cfg, 3);
  Batch b = random_batch(4, 32, rng);
  b.terminal.setOnes();
  const double first = critic_update(st, b, cfg);
  double last = first;
  for (int i = 1; i < 200; ++i) last = critic_update(st, b, cfg);
  EXPECT_LT(last, first / 10.0) << first << " -> " << last;
}

TEST(CriticUpdate, SingleCriticMode) {
  SacConfig cfg = small_config();
  cfg.twin_critics = false;
  std::mt19937_64 rng(7);
  TrainState st = make_train_state(3, cfg, 4);
  EXPECT_TRUE(st.critic2.params().values.empty());
  const Batch b = random_batch(3, 8, rng);
  EXPECT_TRUE(std::isfinite(critic_update(st, b, cfg)));
  EXPECT_TRUE(std::isfinite(actor_update(st, b, cfg).loss));
  EXPECT_EQ(make_checkpoint(st).find_network("critic2"), nullptr);
}

TEST(ActorUpdate, HugeAlphaRaisesLogStd) {
  SacConfig cfg = small_config();
  cfg.initial_alpha = 1e4;
  std::mt19937_64 rng(8);
  TrainState st = make_train_state(4, cfg, 5);
  // Start narrower than the widest squashed distribution so entropy has room to grow.
  const std::size_t last = st.actor.spec().layer_count() - 1;
  st.actor.bias(last).tail(kActionDim).setConstant(-2.0);
  const Batch b = random_batch(4, 8, rng);
  auto mean_log_std = [&] {
    const Matrix head = mlp_forward(st.actor, b.obs);
    return head.bottomRows(kActionDim).mean();
  };
  double prev = mean_log_std();
  for (int i = 0; i < 50; ++i) {
    actor_update(st, b, cfg);
    const double now = mean_log_std();
    ASSERT_GT(now, prev) << "update " << i;
    prev = now;
  }
}

TEST(ActorUpdate, ZeroCriticLossIsEntropyTerm) {
  std::mt19937_64 rng(9);
  test::ActorCase c = test::random_actor_case(rng, true);
  const SquashedGaussian pi = policy_sample(mlp_forward(c.state.actor, c.obs), c.noise);
  const double loss = actor_loss_and_grad(c.state, c.obs, c.noise, nullptr);
  EXPECT_NEAR(loss, c.state.alpha() * pi.log_prob.mean(), 1e-12);
  const GradCheckReport r = test::check_actor_loss(c, {});
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(ActorUpdate, GradientMatchesFiniteDifferences) {
  const test::SuiteResult r = test::actor_gradient_suite(20, 10);
  EXPECT_LT(r.max_rel_error, 1e-5);
  EXPECT_GT(r.checked, 10 * r.excluded);
}

TEST(ActorUpdate, DuplicatedStatesGiveSingleStateGradient) {
  std::mt19937_64 rng(11);
  test::ActorCase c = test::random_actor_case(rng);
  const Matrix one_obs = c.obs.col(0);
  const Matrix one_noise = c.noise.col(0);
  ParamVector single;
  ParamVector many;
  actor_loss_and_grad(c.state, one_obs, one_noise, &single);
  actor_loss_and_grad(c.state, one_obs.replicate(1, 7), one_noise.replicate(1, 7), &many);
  ASSERT_EQ(single.size(), many.size());
  for (std::size_t i = 0; i < single.size(); ++i) EXPECT_NEAR(many[i], single[i], 1e-12);
}

TEST(AlphaUpdate, InitialTemperatureIsE) {
  const TrainState st = make_train_state(2, small_config(), 1);
  EXPECT_NEAR(st.alpha(), 2.71828, 1e-5);
  EXPECT_DOUBLE_EQ(st.log_alpha, 1.0);
}

TEST(AlphaUpdate, EntropyAtTargetLeavesAlpha) {
  const SacConfig cfg = small_config();
  TrainState st = make_train_state(2, cfg, 1);
  const double before = st.log_alpha;
  alpha_update(st, -cfg.resolved_target_entropy(), cfg);
  EXPECT_EQ(st.log_alpha, before);
}

TEST(AlphaUpdate, LowEntropyRaisesAlpha) {
  const SacConfig cfg = small_config();
  TrainState st = make_train_state(2, cfg, 1);
  const double before = st.alpha();
  for (int i = 0; i < 10; ++i) alpha_update(st, 20.0, cfg);
  EXPECT_GT(st.alpha(), before);
  TrainState high = make_train_state(2, cfg, 1);
  for (int i = 0; i < 10; ++i) alpha_update(high, -20.0, cfg);
  EXPECT_LT(high.alpha(), before);
  EXPECT_GT(high.alpha(), 0.0);
}

TEST(AlphaUpdate, LossGradientMatchesFiniteDifferences) {
  const test::SuiteResult r = test::alpha_gradient_suite(20, 12);
  EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(AlphaUpdate, FixedTemperatureNeverMoves) {
  SacConfig cfg = small_config();
  cfg.learn_alpha = false;
  TrainState st = make_train_state(2, cfg, 1);
  alpha_update(st, 50.0, cfg);
  EXPECT_DOUBLE_EQ(st.log_alpha, 1.0);
}

TEST(TargetPolyak, Examples) {
  TrainState st = make_train_state(2, small_config(), 1);
  std::fill(st.target1.params().values.begin(), st.target1.params().values.end(), 0.0);
  std::fill(st.critic1.params().values.begin(), st.critic1.params().values.end(), 1.0);
  TrainState frozen = st;
  target_polyak(frozen, 0.0);
  EXPECT_EQ(frozen.target1.params().values, st.target1.params().values);
  target_polyak(st, 0.5);
  target_polyak(st, 0.5);
  for (double v : st.target1.params().values) EXPECT_DOUBLE_EQ(v, 0.75);
  target_polyak(st, 1.0);
  EXPECT_EQ(st.target1.params().values, st.critic1.params().values);
  EXPECT_EQ(st.target2.params().values, st.critic2.params().values);
}

TEST(TargetPolyak, DriftNeverGrowsWhenOnlineFrozen) {
  std::mt19937_64 rng(13);
  SacConfig cfg = small_config();
  TrainState st = make_train_state(3, cfg, 2);
  st.critic1.initialize(rng);
  st.critic2.initialize(rng);
  std::vector<double> gap(st.target1.params().size());
  auto gaps = [&] {
    for (std::size_t i = 0; i < gap.size(); ++i) {
      gap[i] = std::abs(st.target1.params().values[i] - st.critic1.params().values[i]);
    }
    return gap;
  };
  std::vector<double> prev = gaps();
  for (int k = 0; k < 20; ++k) {
    target_polyak(st, cfg.polyak_tau);
    const std::vector<double> now = gaps();
    for (std::size_t i = 0; i < now.size(); ++i) ASSERT_LE(now[i], prev[i]);
    prev = now;
  }
}

TEST(TrainState, TargetsStartEqualToCritics) {
  const TrainState st = make_train_state(5, small_config(), 7);
  EXPECT_EQ(st.target1.params().values, st.critic1.params().values);
  EXPECT_EQ(st.target2.params().values, st.critic2.params().values);
  EXPECT_NE(st.critic1.params().values, st.critic2.params().values);
  EXPECT_TRUE(std::isfinite(st.log_alpha));
}

TEST(SacConfig, Validation) {
  SacConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.batch = cfg.prefill_steps + 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SacConfig{};
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SacConfig{};
  cfg.polyak_tau = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SacConfig{};
  cfg.initial_alpha = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.learn_alpha = false;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(SacConfig{}.resolved_target_entropy(), -3.0);
}

// ------------------------------------------------------------- train loop

EnvFactory bandit_factory() {
  return [](int) { return std::make_unique<test::BanditEnv>(test::kBanditOptimum); };
}

SacConfig tiny_loop_config() {
  SacConfig cfg;
  cfg.hidden = {16, 16};
  cfg.batch = 16;
  cfg.prefill_steps = 64;
  cfg.env_steps_per_iteration = 8;
  cfg.updates_per_iteration = 5;
  cfg.iterations = 6;
  cfg.workers = 1;
  return cfg;
}

TEST(TrainLoop, ZeroIterationsOnlyPrefills) {
  SacConfig cfg = tiny_loop_config();
  cfg.iterations = 0;
  const TrainResult r = train_loop(bandit_factory(), cfg, Curriculum::constant(0.0),
                                   ObservationScaler::identity(1), 1);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.state.updates, 0);
  EXPECT_EQ(r.state.env_steps, 64);
  EXPECT_EQ(r.prefill_episodes, 64);
  const TrainState fresh = make_train_state(1, cfg, 0);
  EXPECT_EQ(r.state.actor.spec(), fresh.actor.spec());
}

TEST(TrainLoop, SingleWorkerIsReproducible) {
  const SacConfig cfg = tiny_loop_config();
  auto run = [&] {
    std::string csv;
    TrainHooks hooks;
    hooks.on_iteration = [&](const IterationMetrics& m, const TrainState&) {
      csv += metrics_csv_row(m) + "\n";
    };
    const TrainResult r = train_loop(bandit_factory(), cfg, Curriculum::constant(0.0),
                                     ObservationScaler::identity(1), 42, hooks);
    return std::pair{csv, r.state.actor.params().values};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(std::count(a.first.begin(), a.first.end(), '\n'), 6);
}

TEST(TrainLoop, FixedWorkerCountIsReproducible) {
  SacConfig cfg = tiny_loop_config();
  cfg.workers = 3;
  auto run = [&] {
    return train_loop(bandit_factory(), cfg, Curriculum::constant(0.0),
                      ObservationScaler::identity(1), 5)
        .state.critic1.params()
        .values;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainLoop, MetricsAreFiniteAndAlphaPositive) {
  SacConfig cfg = tiny_loop_config();
  cfg.iterations = 20;
  const TrainResult r = train_loop(bandit_factory(), cfg, Curriculum::ramp(20),
                                   ObservationScaler::identity(1), 9);
  ASSERT_EQ(r.metrics.size(), 20U);
  for (const IterationMetrics& m : r.metrics) {
    EXPECT_TRUE(std::isfinite(m.critic_loss));
    EXPECT_TRUE(std::isfinite(m.actor_loss));
    EXPECT_GT(m.alpha, 0.0);
    EXPECT_GE(m.epsilon_frac, 0.0);
    EXPECT_LE(m.epsilon_frac, 1.0);
  }
  EXPECT_EQ(r.metrics.back().epsilon_frac, 1.0);
  EXPECT_EQ(r.state.updates, 100);
}

TEST(TrainLoop, RejectsMismatchedScaler) {
  EXPECT_THROW(train_loop(bandit_factory(), tiny_loop_config(), Curriculum::constant(0.0),
                          ObservationScaler::identity(4), 1),
               std::invalid_argument);
}

TEST(TrainLoop, BanditConvergesWithoutEntropy) {
  const test::BanditOutcome r = test::run_bandit(400, {64, 64}, 3);
  EXPECT_LE(r.updates, 20000);
  EXPECT_LT(r.max_error, 0.05) << r.mean_action[0] << " " << r.mean_action[1] << " "
                               << r.mean_action[2];
}

TEST(Metrics, CsvFormat) {
  EXPECT_EQ(metrics_csv_header(),
            "iteration,env_steps,mean_return,success_rate,critic_loss,actor_loss,alpha,epsilon_frac");
  IterationMetrics m;
  m.iteration = 3;
  m.env_steps = 420;
  m.mean_return = -0.5;
  m.success_rate = 0.25;
  m.alpha = 1.0;
  EXPECT_EQ(metrics_csv_row(m), "3,420,-0.5,0.25,0,0,1,0");
}

TEST(Checkpointing, NetworksRoundTrip) {
  const TrainState st = make_train_state(6, small_config(), 3);
  const Checkpoint c = make_checkpoint(st);
  EXPECT_EQ(c.scalar("obs_dim"), 6.0);
  TrainState other = make_train_state(6, small_config(), 99);
  other.log_alpha = -4.0;
  load_networks(other, c);
  EXPECT_EQ(other.actor.params().values, st.actor.params().values);
  EXPECT_EQ(other.target2.params().values, st.target2.params().values);
  EXPECT_EQ(other.log_alpha, st.log_alpha);
}

}  // namespace
}  // namespace slotbench
