#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "slotbench/eval.hpp"
#include "slotbench/policy.hpp"
#include "support/stats.hpp"

namespace slotbench {
namespace {

InsertionEnv make_env() { return InsertionEnv(EnvConfig{}, SimConfig{}, LayoutConfig{}, PlateShape{}); }

EpisodeSpec clean_centered() {
  EpisodeSpec spec;
  spec.noise_fraction = 0.0;
  spec.blocker = BlockerMode::kNone;
  spec.partial_insert = false;
  spec.start_dx = 0.0;
  spec.start_height = 0.10;
  return spec;
}

EpisodeSpec noisy_blocked() {
  EpisodeSpec spec;
  spec.blocker = BlockerMode::kTargetSlot;
  spec.partial_insert = false;
  spec.start_dx = 0.0;
  spec.start_height = 0.10;
  return spec;
}

void expect_in_bounds(const Action& a) {
  for (double v : a) {
    ASSERT_GE(v, -1.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(ActionForDisplacement, ComposesToRequestedTarget) {
  const EnvConfig cfg;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int i = 0; i < 200; ++i) {
    const Pose2 current{u(rng), 0.3 + u(rng), u(rng)};
    // Within reach of one composite action.
    const Pose2 goal{current.x() + 0.1 * u(rng), current.z() + 0.1 * u(rng),
                     current.theta() + 0.1 * u(rng)};
    const double dx = 0.25 * u(rng);
    const double dz = 0.25 * u(rng);
    const Action a = action_for_displacement(current, goal, dx, dz, 0.0, cfg);
    expect_in_bounds(a);
    const Pose2 t = compose_target(current, goal, a, cfg);
    EXPECT_NEAR(t.x(), current.x() + dx, 1e-12);
    EXPECT_NEAR(t.z(), current.z() + dz, 1e-12);
    EXPECT_NEAR(t.theta(), current.theta(), 1e-12);
  }
}

TEST(StraightDown, TargetIsFiveCentimetresBelow) {
  InsertionEnv env = make_env();
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    env.reset(seed);
    const Action a = straight_down_action(env);
    expect_in_bounds(a);
    const Pose2& p = env.state().body.pose;
    const Pose2 t = compose_target(p, env.state().start.noisy_goal, a, env.config());
    EXPECT_NEAR(t.z(), p.z() - 0.05, 1e-12);
    EXPECT_NEAR(t.x(), p.x(), 1e-12);
    EXPECT_NEAR(t.theta(), p.theta(), 1e-12);
  }
}

TEST(StraightDown, SlidesInWithoutNoiseOrBlocker) {
  InsertionEnv env = make_env();
  StraightDownPolicy policy;
  for (int slot = 0; slot < 3; ++slot) {
    EpisodeSpec spec = clean_centered();
    spec.target_slot = slot;
    EpisodeRecord rec;
    run_episode(env, policy, spec, 10 + static_cast<std::uint64_t>(slot), &rec);
    EXPECT_EQ(rec.outcome, Termination::kSuccess) << "slot " << slot;
  }
}

TEST(StraightDown, NeverSucceedsIntoBlockedSlot) {
  InsertionEnv env = make_env();
  StraightDownPolicy policy;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EpisodeSpec spec = noisy_blocked();
    spec.noise_fraction = 0.0;
    spec.target_slot = static_cast<int>(seed % 3);
    EpisodeRecord rec;
    run_episode(env, policy, spec, seed, &rec);
    EXPECT_NE(rec.outcome, Termination::kSuccess) << seed;
  }
}

TEST(RandomSearch, WithoutContactMatchesStraightDown) {
  RandomSearchConfig cfg;
  cfg.descend_step = kStraightDownStep;
  InsertionEnv a = make_env();
  InsertionEnv b = make_env();
  StraightDownPolicy sd;
  RandomSearchPolicy rs(cfg);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    EpisodeSpec spec = clean_centered();
    spec.target_slot = static_cast<int>(seed % 3);
    const EpisodeLog la = run_episode(a, sd, spec, seed);
    const EpisodeLog lb = run_episode(b, rs, spec, seed);
    ASSERT_EQ(la.steps.size(), lb.steps.size());
    for (std::size_t i = 0; i < la.steps.size(); ++i) {
      EXPECT_EQ(la.steps[i].action, lb.steps[i].action);
      EXPECT_EQ(la.steps[i].pose, lb.steps[i].pose);
    }
    EXPECT_EQ(rs.state().phase, RandomSearchState::Phase::kDescend);
  }
}

TEST(RandomSearch, ContactTriggersRetreat) {
  InsertionEnv env = make_env();
  EpisodeStart start;
  start.target_slot = 1;
  const PlateShape plate;
  const double seated_z = plate.half_height + plate.grasp_offset.z();
  start.true_goal = start.noisy_goal = Pose2{0.0, seated_z, 0.0};
  // Both bottom corners 0.0175 mm into the floor: 3.5 N in total.
  start.body.pose = Pose2{0.0, seated_z - 1.75e-5, 0.0};
  env.restore(start, 1);
  ASSERT_NEAR(env.state().last_wrench.force_norm(), 3.5, 1e-9);
  RandomSearchState state;
  std::mt19937_64 rng(1);
  const Action a = random_search_action(env, state, rng);
  EXPECT_EQ(state.phase, RandomSearchState::Phase::kRetreat);
  EXPECT_NEAR(state.retreat_z, seated_z + 0.06 + 0.05, 1e-12);
  expect_in_bounds(a);
  EXPECT_GT(compose_target(start.body.pose, start.noisy_goal, a, env.config()).z(),
            start.body.pose.z());

  // Below the threshold nothing changes.
  start.body.pose = Pose2{0.0, seated_z - 1.25e-5, 0.0};
  env.restore(start, 1);
  RandomSearchState calm;
  random_search_action(env, calm, rng);
  EXPECT_EQ(calm.phase, RandomSearchState::Phase::kDescend);
}

TEST(RandomSearch, RepositionOffsetsAreUniform) {
  InsertionEnv env = make_env();
  env.reset(3);
  std::mt19937_64 rng(4);
  std::vector<double> offsets;
  for (int i = 0; i < 10000; ++i) {
    RandomSearchState s;
    s.phase = RandomSearchState::Phase::kRetreat;
    s.retreat_z = -10.0;
    random_search_action(env, s, rng);
    ASSERT_LE(std::abs(s.x_offset), 0.025);
    offsets.push_back(s.x_offset);
  }
  EXPECT_GT(test::ks_uniform_p(offsets, -0.025, 0.025), 0.01);
}

TEST(RandomSearch, CyclesThroughPhases) {
  InsertionEnv env = make_env();
  RandomSearchPolicy rs;
  EpisodeSpec spec = noisy_blocked();
  spec.target_slot = 1;
  spec.noise_fraction = 0.0;
  env.reset(5, spec);
  rs.begin_episode(env, 5);
  std::vector<double> obs = env.observation();
  bool retreated = false;
  bool repositioned = false;
  while (env.episode_active()) {
    const Action a = rs.act(env, obs);
    expect_in_bounds(a);
    retreated = retreated || rs.state().phase == RandomSearchState::Phase::kRetreat;
    repositioned = repositioned || rs.state().phase == RandomSearchState::Phase::kReposition;
    obs = env.step(a).observation;
  }
  EXPECT_TRUE(retreated);
  EXPECT_TRUE(repositioned);
}

TEST(Baselines, ActionsAlwaysInBoundsAndDeterministic) {
  InsertionEnv env = make_env();
  StraightDownPolicy sd;
  RandomSearchPolicy rs;
  for (EpisodePolicy* p : {static_cast<EpisodePolicy*>(&sd), static_cast<EpisodePolicy*>(&rs)}) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      EpisodeSpec spec;  // everything sampled
      const EpisodeLog first = run_episode(env, *p, spec, seed);
      const EpisodeLog again = run_episode(env, *p, spec, seed);
      ASSERT_EQ(first.steps.size(), again.steps.size());
      for (std::size_t i = 0; i < first.steps.size(); ++i) {
        expect_in_bounds(first.steps[i].action);
        ASSERT_EQ(first.steps[i].action, again.steps[i].action);
        ASSERT_EQ(first.steps[i].pose, again.steps[i].pose);
      }
    }
  }
}

TEST(LearnedPolicy, RejectsWidthMismatch) {
  EXPECT_THROW(LearnedPolicy(Mlp({4, {8}, 6}), ObservationScaler::identity(5)),
               std::invalid_argument);
  LearnedPolicy ok(Mlp({48, {8}, 6}), ObservationScaler::for_frames(8, false));
  InsertionEnv env = make_env();
  const std::vector<double> obs = env.reset(1);
  EXPECT_EQ(ok.act(env, obs), (Action{0.0, 0.0, 0.0}));
}

}  // namespace
}  // namespace slotbench
