#include "slotbench/sac.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace slotbench {

namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Matrix stack(const Matrix& obs, const Matrix& action) {
  Matrix x(obs.rows() + action.rows(), obs.cols());
  x << obs, action;
  return x;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite ") + what);
}

struct ActorPass {
  double loss = 0.0;
  double mean_log_prob = 0.0;
};

ActorPass actor_pass(const TrainState& st, const Matrix& obs, const Matrix& noise,
                     ParamVector* grad) {
  const auto batch = static_cast<double>(obs.cols());
  const double alpha = st.alpha();
  MlpCache actor_cache;
  const Matrix head = mlp_forward(st.actor, obs, &actor_cache);
  const SquashedGaussian pi = policy_sample(head, noise);
  const Matrix x = stack(obs, pi.action);

  MlpCache c1;
  MlpCache c2;
  const RowVector q1 = mlp_forward(st.critic1, x, &c1);
  const bool twin = !st.critic2.params().values.empty();
  RowVector q2 = q1;
  if (twin) q2 = mlp_forward(st.critic2, x, &c2);
  const RowVector qmin = q1.cwiseMin(q2);

  ActorPass out;
  out.mean_log_prob = pi.log_prob.mean();
  out.loss = (alpha * pi.log_prob - qmin).mean();
  if (grad) {
    const RowVector pick1 = (q1.array() <= q2.array()).cast<double>().matrix();
    const RowVector dq1 = -pick1 / batch;
    Matrix action_grad = mlp_backward(st.critic1, c1, dq1, {}).bottomRows(kActionDim);
    if (twin) {
      const RowVector dq2 = -(RowVector::Ones(q1.size()) - pick1) / batch;
      action_grad += mlp_backward(st.critic2, c2, dq2, {}).bottomRows(kActionDim);
    }
    const RowVector dlogp = RowVector::Constant(q1.size(), alpha / batch);
    const Matrix head_grad = policy_sample_backward(pi, action_grad, dlogp);
    grad->assign(st.actor.spec().param_count(), 0.0);
    mlp_backward(st.actor, actor_cache, head_grad, *grad);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim)
    : capacity_(capacity), obs_dim_(obs_dim) {
  if (capacity == 0 || obs_dim <= 0) {
    throw std::invalid_argument("replay buffer needs positive capacity and obs_dim");
  }
  const std::size_t d = static_cast<std::size_t>(obs_dim);
  obs_.resize(capacity * d);
  next_obs_.resize(capacity * d);
  actions_.resize(capacity * kActionDim);
  rewards_.resize(capacity);
  done_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  const std::size_t d = static_cast<std::size_t>(obs_dim_);
  if (t.observation.size() != d || t.next_observation.size() != d) {
    throw std::invalid_argument("transition observation width mismatch");
  }
  std::copy(t.observation.begin(), t.observation.end(), obs_.begin() + cursor_ * d);
  std::copy(t.next_observation.begin(), t.next_observation.end(),
            next_obs_.begin() + cursor_ * d);
  std::copy(t.action.begin(), t.action.end(), actions_.begin() + cursor_ * kActionDim);
  rewards_[cursor_] = t.reward;
  done_[cursor_] = t.done;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Batch ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (n == 0 || size_ == 0) {
    throw std::logic_error("cannot sample " + std::to_string(n) + " items from a buffer of " +
                           std::to_string(size_));
  }
  const auto d = static_cast<Eigen::Index>(obs_dim_);
  const auto cols = static_cast<Eigen::Index>(n);
  Batch b{Matrix(d, cols), Matrix(kActionDim, cols), RowVector(cols), Matrix(d, cols),
          RowVector(cols)};
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const std::size_t i = pick(rng);
    b.obs.col(j) = Eigen::Map<const Eigen::VectorXd>(obs_.data() + i * obs_dim_, d);
    b.next_obs.col(j) = Eigen::Map<const Eigen::VectorXd>(next_obs_.data() + i * obs_dim_, d);
    b.action.col(j) = Eigen::Map<const Eigen::VectorXd>(actions_.data() + i * kActionDim,
                                                        kActionDim);
    b.reward[j] = rewards_[i];
    b.terminal[j] = done_[i] == DoneKind::kTerminal ? 1.0 : 0.0;
  }
  return b;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index out of range");
  const std::size_t p = (cursor_ + capacity_ - size_ + i) % capacity_;
  const std::size_t d = static_cast<std::size_t>(obs_dim_);
  Transition t;
  t.observation.assign(obs_.begin() + p * d, obs_.begin() + (p + 1) * d);
  t.next_observation.assign(next_obs_.begin() + p * d, next_obs_.begin() + (p + 1) * d);
  std::copy_n(actions_.begin() + p * kActionDim, kActionDim, t.action.begin());
  t.reward = rewards_[p];
  t.done = done_[p];
  return t;
}

// ---------------------------------------------------------------- scaling

ObservationScaler ObservationScaler::for_frames(int history, bool include_velocity) {
  ObservationScaler s;
  for (int i = 0; i < history; ++i) {
    s.scale.insert(s.scale.end(), {10.0, 10.0, 10.0, 0.2, 0.2, 2.0});
    if (include_velocity) s.scale.insert(s.scale.end(), {2.0, 2.0, 1.0});
  }
  return s;
}

ObservationScaler ObservationScaler::identity(int dim) {
  ObservationScaler s;
  s.scale.assign(static_cast<std::size_t>(dim), 1.0);
  s.clip = std::numeric_limits<double>::infinity();
  return s;
}

void ObservationScaler::apply(std::span<double> obs) const {
  if (obs.size() != scale.size()) throw std::invalid_argument("observation width mismatch");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    obs[i] = std::clamp(obs[i] * scale[i], -clip, clip);
  }
}

Matrix ObservationScaler::apply(const Matrix& obs) const {
  if (static_cast<std::size_t>(obs.rows()) != scale.size()) {
    throw std::invalid_argument("observation width mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> s(scale.data(), obs.rows());
  return (obs.array().colwise() * s.array()).cwiseMax(-clip).cwiseMin(clip).matrix();
}

// ---------------------------------------------------------------- SAC

void SacConfig::validate() const {
  if (batch <= 0) throw std::invalid_argument("batch must be positive");
  if (batch > prefill_steps && iterations > 0) {
    throw std::invalid_argument("batch must not exceed prefill_steps");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(polyak_tau > 0.0 && polyak_tau <= 1.0)) {
    throw std::invalid_argument("polyak tau must lie in (0, 1]");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (initial_alpha < 0.0 || (learn_alpha && initial_alpha <= 0.0)) {
    throw std::invalid_argument("initial alpha must be positive");
  }
  if (workers < 1 || updates_per_iteration < 0 || env_steps_per_iteration < 1 ||
      iterations < 0 || prefill_steps < 0 || buffer_capacity == 0) {
    throw std::invalid_argument("invalid training loop counts");
  }
}

TrainState make_train_state(int obs_dim, const SacConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TrainState st;
  st.rng.seed(seed);
  st.actor = Mlp({obs_dim, cfg.hidden, 2 * kActionDim});
  st.critic1 = Mlp({obs_dim + kActionDim, cfg.hidden, 1});
  st.critic2 = cfg.twin_critics ? Mlp({obs_dim + kActionDim, cfg.hidden, 1}) : Mlp();
  st.actor.initialize(st.rng, cfg.actor_output_init);
  st.critic1.initialize(st.rng);
  if (cfg.twin_critics) st.critic2.initialize(st.rng);
  st.target1 = st.critic1;
  st.target2 = st.critic2;
  st.log_alpha = std::log(cfg.initial_alpha);
  return st;
}

double critic_update(TrainState& st, const Batch& b, const SacConfig& cfg) {
  const auto n = b.obs.cols();
  const double alpha = st.alpha();
  const bool twin = cfg.twin_critics;

  const Matrix noise = gaussian_matrix(kActionDim, n, st.rng);
  const SquashedGaussian next = policy_sample(mlp_forward(st.actor, b.next_obs), noise);
  const Matrix xn = stack(b.next_obs, next.action);
  RowVector q_next = mlp_forward(st.target1, xn);
  if (twin) q_next = q_next.cwiseMin(RowVector(mlp_forward(st.target2, xn)));
  RowVector soft = q_next;
  if (alpha != 0.0) soft -= alpha * next.log_prob;
  const RowVector y =
      b.reward + cfg.gamma * ((1.0 - b.terminal.array()) * soft.array()).matrix();

  const Matrix x = stack(b.obs, b.action);
  const AdamConfig adam{cfg.lr};
  auto fit = [&](Mlp& critic) {
    MlpCache cache;
    const RowVector err = RowVector(mlp_forward(critic, x, &cache)) - y;
    const double loss = err.squaredNorm() / static_cast<double>(n);
    ParamVector grad(critic.spec().param_count(), 0.0);
    mlp_backward(critic, cache, 2.0 * err / static_cast<double>(n), grad);
    adam_update(critic.params().values, grad, critic.params().adam, adam);
    return loss;
  };
  double loss = fit(st.critic1);
  if (twin) loss = 0.5 * (loss + fit(st.critic2));
  check_finite(loss, "critic loss");
  return loss;
}

double actor_loss_and_grad(const TrainState& state, const Matrix& obs, const Matrix& noise,
                           ParamVector* grad) {
  return actor_pass(state, obs, noise, grad).loss;
}

ActorUpdateResult actor_update(TrainState& st, const Batch& b, const SacConfig& cfg) {
  const Matrix noise = gaussian_matrix(kActionDim, b.obs.cols(), st.rng);
  ParamVector grad;
  const ActorPass pass = actor_pass(st, b.obs, noise, &grad);
  check_finite(pass.loss, "actor loss");
  adam_update(st.actor.params().values, grad, st.actor.params().adam, AdamConfig{cfg.lr});
  return {pass.loss, -pass.mean_log_prob, pass.mean_log_prob};
}

double alpha_loss(double log_alpha, double mean_log_prob, double target_entropy) {
  return -log_alpha * (mean_log_prob + target_entropy);
}

void alpha_update(TrainState& st, double mean_log_prob, const SacConfig& cfg) {
  if (!cfg.learn_alpha) return;
  const double grad = -(mean_log_prob + cfg.resolved_target_entropy());
  std::span<double> param(&st.log_alpha, 1);
  adam_update(param, std::span<const double>(&grad, 1), st.alpha_adam, AdamConfig{cfg.lr});
  check_finite(st.log_alpha, "log alpha");
}

void alpha_update(TrainState& st, const Batch& b, const SacConfig& cfg) {
  const Matrix noise = gaussian_matrix(kActionDim, b.obs.cols(), st.rng);
  const SquashedGaussian pi = policy_sample(mlp_forward(st.actor, b.obs), noise);
  alpha_update(st, pi.log_prob.mean(), cfg);
}

void target_polyak(TrainState& st, double tau) {
  auto track = [tau](Mlp& target, const Mlp& online) {
    auto& t = target.params().values;
    const auto& o = online.params().values;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
  };
  track(st.target1, st.critic1);
  track(st.target2, st.critic2);
}

Action policy_mean_action(const Mlp& actor, const ObservationScaler& scaler,
                          std::span<const double> obs) {
  std::vector<double> x(obs.begin(), obs.end());
  scaler.apply(x);
  const Matrix head =
      mlp_forward(actor, Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1));
  Action a{};
  for (int i = 0; i < kActionDim; ++i) a[static_cast<std::size_t>(i)] = std::tanh(head(i, 0));
  return a;
}

// ---------------------------------------------------------------- metrics

std::string metrics_csv_header() {
  return "iteration,env_steps,mean_return,success_rate,critic_loss,actor_loss,alpha,epsilon_frac";
}

std::string metrics_csv_row(const IterationMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(10) << m.iteration << ',' << m.env_steps << ',' << m.mean_return << ','
     << m.success_rate << ',' << m.critic_loss << ',' << m.actor_loss << ',' << m.alpha << ','
     << m.epsilon_frac;
  return os.str();
}

// ---------------------------------------------------------------- training loop

namespace {

struct EpisodeOutcome {
  double ret = 0.0;
  bool success = false;
};

struct Worker {
  std::unique_ptr<Environment> env;
  std::mt19937_64 rng;
  std::vector<double> obs;
  bool needs_reset = true;
  double episode_return = 0.0;
  std::vector<Transition> transitions;
  std::vector<EpisodeOutcome> finished;
};

enum class Behaviour { kRandom, kStochastic };

void collect(Worker& w, long steps, Behaviour behaviour, const Mlp& actor,
             const ObservationScaler& scaler, double noise_fraction) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (long s = 0; s < steps; ++s) {
    if (w.needs_reset) {
      w.obs = w.env->reset_episode(w.rng(), noise_fraction);
      w.needs_reset = false;
      w.episode_return = 0.0;
    }
    Action action{};
    if (behaviour == Behaviour::kRandom) {
      for (double& a : action) a = unit(w.rng);
    } else {
      std::vector<double> x = w.obs;
      scaler.apply(x);
      const Matrix head = mlp_forward(
          actor, Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1));
      Matrix noise(kActionDim, 1);
      for (int i = 0; i < kActionDim; ++i) noise(i, 0) = normal(w.rng);
      const SquashedGaussian pi = policy_sample(head, noise);
      for (int i = 0; i < kActionDim; ++i) action[static_cast<std::size_t>(i)] = pi.action(i, 0);
    }
    StepResult r = w.env->step(action);
    Transition t;
    t.observation = std::move(w.obs);
    t.action = action;
    t.reward = r.reward;
    t.next_observation = r.observation;
    t.done = r.terminated != Termination::kNone ? DoneKind::kTerminal
             : r.truncated                      ? DoneKind::kTruncated
                                                : DoneKind::kNone;
    w.episode_return += r.reward;
    w.obs = std::move(r.observation);
    w.transitions.push_back(std::move(t));
    if (r.done()) {
      w.finished.push_back({w.episode_return, r.terminated == Termination::kSuccess});
      w.needs_reset = true;
    }
  }
}

void collect_all(std::vector<Worker>& workers, long total, Behaviour behaviour, const Mlp& actor,
                 const ObservationScaler& scaler, double noise_fraction) {
  const long n = static_cast<long>(workers.size());
  const long share = (total + n - 1) / n;
  if (n == 1) {
    collect(workers[0], share, behaviour, actor, scaler, noise_fraction);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(workers.size());
  for (Worker& w : workers) {
    threads.emplace_back([&, share] { collect(w, share, behaviour, actor, scaler, noise_fraction); });
  }
}

}  // namespace

TrainResult train_loop(const EnvFactory& factory, const SacConfig& cfg,
                       const Curriculum& curriculum, const ObservationScaler& scaler,
                       std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate();
  curriculum.validate();
  std::mt19937_64 master(seed);
  std::vector<Worker> workers(static_cast<std::size_t>(cfg.workers));
  for (int i = 0; i < cfg.workers; ++i) {
    workers[static_cast<std::size_t>(i)].env = factory(i);
    workers[static_cast<std::size_t>(i)].rng.seed(master());
  }
  const int obs_dim = workers.front().env->observation_size();
  if (scaler.scale.size() != static_cast<std::size_t>(obs_dim)) {
    throw std::invalid_argument("observation scaler width does not match the environment");
  }

  TrainResult result{make_train_state(obs_dim, cfg, master()), {}, 0};
  TrainState& st = result.state;
  ReplayBuffer buffer(cfg.buffer_capacity, obs_dim);
  std::deque<EpisodeOutcome> window;

  auto drain = [&](long* episodes) {
    for (Worker& w : workers) {
      for (const Transition& t : w.transitions) buffer.push(t);
      st.env_steps += static_cast<long>(w.transitions.size());
      w.transitions.clear();
      for (const EpisodeOutcome& e : w.finished) {
        window.push_back(e);
        if (window.size() > 100) window.pop_front();
        ++*episodes;
      }
      w.finished.clear();
    }
  };

  long episodes = 0;
  if (cfg.prefill_steps > 0) {
    collect_all(workers, cfg.prefill_steps, Behaviour::kRandom, st.actor, scaler,
                curriculum.fraction(0.0));
    drain(&episodes);
    result.prefill_episodes = episodes;
  }

  for (long it = 0; it < cfg.iterations; ++it) {
    st.iteration = it;
    const double frac = curriculum.fraction(static_cast<double>(it));
    collect_all(workers, cfg.env_steps_per_iteration, Behaviour::kStochastic, st.actor, scaler,
                frac);
    drain(&episodes);

    IterationMetrics m;
    m.iteration = it;
    m.epsilon_frac = frac;
    if (buffer.size() >= static_cast<std::size_t>(cfg.batch)) {
      for (int u = 0; u < cfg.updates_per_iteration; ++u) {
        Batch b = buffer.sample(static_cast<std::size_t>(cfg.batch), st.rng);
        b.obs = scaler.apply(b.obs);
        b.next_obs = scaler.apply(b.next_obs);
        m.critic_loss += critic_update(st, b, cfg);
        const ActorUpdateResult a = actor_update(st, b, cfg);
        m.actor_loss += a.loss;
        alpha_update(st, a.mean_log_prob, cfg);
        target_polyak(st, cfg.polyak_tau);
        ++st.updates;
      }
      if (cfg.updates_per_iteration > 0) {
        m.critic_loss /= cfg.updates_per_iteration;
        m.actor_loss /= cfg.updates_per_iteration;
      }
    }
    m.env_steps = st.env_steps;
    m.alpha = st.alpha();
    m.episodes = episodes;
    for (const EpisodeOutcome& e : window) {
      m.mean_return += e.ret;
      m.success_rate += e.success ? 1.0 : 0.0;
    }
    if (!window.empty()) {
      m.mean_return /= static_cast<double>(window.size());
      m.success_rate /= static_cast<double>(window.size());
    }
    result.metrics.push_back(m);
    if (hooks.on_iteration) hooks.on_iteration(m, st);
  }
  st.iteration = cfg.iterations;
  return result;
}

Checkpoint make_checkpoint(const TrainState& st) {
  Checkpoint c;
  c.scalars = {{"log_alpha", st.log_alpha},
               {"iteration", static_cast<double>(st.iteration)},
               {"env_steps", static_cast<double>(st.env_steps)},
               {"obs_dim", static_cast<double>(st.actor.spec().input_dim)}};
  auto add = [&c](const char* name, const Mlp& net) {
    if (net.params().values.empty()) return;
    c.networks.push_back(
        {name, net.spec(), {net.params().values.begin(), net.params().values.end()}});
  };
  add("actor", st.actor);
  add("critic1", st.critic1);
  add("critic2", st.critic2);
  add("target1", st.target1);
  add("target2", st.target2);
  return c;
}

void load_networks(TrainState& st, const Checkpoint& ckpt) {
  auto load = [&ckpt](const char* name, Mlp& net) {
    const NamedNetwork* n = ckpt.find_network(name);
    if (!n) return;
    net = Mlp(n->spec);
    net.params().values.assign(n->values.begin(), n->values.end());
  };
  load("actor", st.actor);
  load("critic1", st.critic1);
  load("critic2", st.critic2);
  load("target1", st.target1);
  load("target2", st.target2);
  if (ckpt.has_scalar("log_alpha")) st.log_alpha = ckpt.scalar("log_alpha");
}

}  // namespace slotbench
