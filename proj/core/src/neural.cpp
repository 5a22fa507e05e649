#include "slotbench/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace slotbench {

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw std::invalid_argument("MLP dims must be positive");
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("MLP hidden widths must be positive");
  }
}

int MlpSpec::layer_in(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden[layer - 1];
}

int MlpSpec::layer_out(std::size_t layer) const {
  return layer == hidden.size() ? output_dim : hidden[layer];
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    n += static_cast<std::size_t>(layer_out(l)) * (static_cast<std::size_t>(layer_in(l)) + 1);
  }
  return n;
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_update: shape mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double step_size = cfg.lr / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    params[i] -= step_size * state.m[i] / (std::sqrt(state.v[i]) * inv_sqrt_c2 + cfg.eps);
  }
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  params_ = ParamStore(spec_.param_count());
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(spec_.layer_out(l)) *
           (static_cast<std::size_t>(spec_.layer_in(l)) + 1);
  }
}

Eigen::Map<const Matrix> Mlp::weight(std::size_t layer) const {
  return {params_.values.data() + offset(layer), spec_.layer_out(layer), spec_.layer_in(layer)};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  const auto w = static_cast<std::size_t>(spec_.layer_out(layer)) * spec_.layer_in(layer);
  return {params_.values.data() + offset(layer) + w, spec_.layer_out(layer)};
}

Eigen::Map<Matrix> Mlp::weight(std::size_t layer) {
  return {params_.values.data() + offset(layer), spec_.layer_out(layer), spec_.layer_in(layer)};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t layer) {
  const auto w = static_cast<std::size_t>(spec_.layer_out(layer)) * spec_.layer_in(layer);
  return {params_.values.data() + offset(layer) + w, spec_.layer_out(layer)};
}

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache) {
  const MlpSpec& spec = net.spec();
  if (input.rows() != spec.input_dim) {
    throw std::invalid_argument("mlp_forward: input height " + std::to_string(input.rows()) +
                                " != input_dim " + std::to_string(spec.input_dim));
  }
  if (cache) {
    cache->inputs.resize(spec.layer_count());
    cache->preact.resize(spec.layer_count());
  }
  Matrix x = input;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    Matrix z = net.weight(l) * x;
    z.colwise() += net.bias(l);
    if (cache) cache->inputs[l] = std::move(x);
    if (l + 1 < spec.layer_count()) {
      x = z.cwiseMax(0.0);
      if (cache) cache->preact[l] = std::move(z);
    } else {
      x = std::move(z);
    }
  }
  return x;
}

Matrix mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& out_grad,
                    std::span<double> param_grad) {
  const MlpSpec& spec = net.spec();
  const bool want_params = !param_grad.empty();
  if (want_params && param_grad.size() != spec.param_count()) {
    throw std::invalid_argument("mlp_backward: gradient buffer size mismatch");
  }
  if (cache.inputs.size() != spec.layer_count() || out_grad.rows() != spec.output_dim ||
      out_grad.cols() != cache.inputs.front().cols()) {
    throw std::invalid_argument("mlp_backward: cache/output gradient shape mismatch");
  }
  Matrix delta = out_grad;
  std::size_t off = spec.param_count();
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const int out = spec.layer_out(l);
    const int in = spec.layer_in(l);
    if (l + 1 < spec.layer_count()) {
      delta = (cache.preact[l].array() > 0.0).select(delta, 0.0);
    }
    off -= static_cast<std::size_t>(out) * (static_cast<std::size_t>(in) + 1);
    if (want_params) {
      Eigen::Map<Matrix> gw(param_grad.data() + off, out, in);
      Eigen::Map<Eigen::VectorXd> gb(
          param_grad.data() + off + static_cast<std::size_t>(out) * in, out);
      gw.noalias() += delta * cache.inputs[l].transpose();
      gb += delta.rowwise().sum();
    }
    delta = net.weight(l).transpose() * delta;
  }
  return delta;
}

std::uint64_t activation_signature(const MlpCache& cache) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Matrix& z : cache.preact) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      h = (h ^ static_cast<std::uint64_t>(z.data()[i] > 0.0)) * 1099511628211ULL;
    }
  }
  return h;
}

SquashedGaussian policy_sample(const Matrix& head, const Matrix& noise) {
  if (head.rows() % 2 != 0) throw std::invalid_argument("policy head needs 2n rows");
  const Eigen::Index n = head.rows() / 2;
  if (noise.rows() != n || noise.cols() != head.cols()) {
    throw std::invalid_argument("policy_sample: noise shape mismatch");
  }
  SquashedGaussian s;
  s.mean = head.topRows(n);
  const Matrix raw = head.bottomRows(n);
  s.log_std_clamped = (raw.array() < kLogStdMin) || (raw.array() > kLogStdMax);
  s.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.std = s.log_std.array().exp();
  s.noise = noise;
  s.action = (s.mean.array() + s.std.array() * noise.array()).tanh();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto a2 = s.action.array().square();
  s.log_prob = (-0.5 * noise.array().square() - s.log_std.array() - half_log_2pi -
                (1.0 - a2 + kSquashEps).log())
                   .matrix()
                   .colwise()
                   .sum();
  return s;
}

Matrix policy_sample_backward(const SquashedGaussian& s, const Matrix& action_grad,
                              const RowVector& log_prob_grad) {
  const Eigen::Index n = s.mean.rows();
  const auto a = s.action.array();
  const auto one_minus_a2 = 1.0 - a.square();
  const auto sigma_xi = s.std.array() * s.noise.array();
  // d logp / du from the squash correction only; the Gaussian term is fixed by xi.
  const Eigen::ArrayXXd dlogp_du = 2.0 * a * one_minus_a2 / (one_minus_a2 + kSquashEps);
  const Eigen::ArrayXXd lp = log_prob_grad.replicate(n, 1).array();

  Matrix grad(2 * n, s.mean.cols());
  const Eigen::ArrayXXd du = action_grad.array() * one_minus_a2 + lp * dlogp_du;
  grad.topRows(n) = du.matrix();
  const Eigen::ArrayXXd dls = du * sigma_xi - lp;
  grad.bottomRows(n) = s.log_std_clamped.select(0.0, dls).matrix();
  return grad;
}

GradCheckReport grad_check(std::span<double> params, std::span<const double> analytic,
                           const std::function<double()>& loss, const GradCheckOptions& opts,
                           const std::function<std::uint64_t()>& regime) {
  if (analytic.size() != params.size()) {
    throw std::invalid_argument("grad_check: gradient size mismatch");
  }
  GradCheckReport report;
  const std::uint64_t base_regime = regime ? regime() : 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + opts.step;
    const double up = loss();
    const bool up_same = !regime || regime() == base_regime;
    params[i] = saved - opts.step;
    const double down = loss();
    const bool down_same = !regime || regime() == base_regime;
    params[i] = saved;
    if (!up_same || !down_same) {
      ++report.excluded;
      continue;
    }
    const double numeric = (up - down) / (2.0 * opts.step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), opts.abs_floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - analytic[i]) / denom);
    ++report.checked;
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

}  // namespace slotbench
