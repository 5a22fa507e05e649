#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slotbench {

/// Batches are column-major: one sample per column.
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden{256, 256};
  int output_dim = 1;

  void validate() const;
  std::size_t layer_count() const { return hidden.size() + 1; }
  int layer_in(std::size_t layer) const;
  int layer_out(std::size_t layer) const;
  std::size_t param_count() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// Vectorized kernels peel differently depending on the start address, so parameter
/// arrays always start on the same boundary to keep results independent of the heap.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Flat parameter array of one network plus its optimizer moments. Layer l owns a
/// column-major (out x in) weight block followed by its bias.
struct ParamStore {
  ParamVector values;
  AdamState adam;

  explicit ParamStore(std::size_t n = 0) : values(n, 0.0), adam{std::vector<double>(n, 0.0),
                                                                std::vector<double>(n, 0.0), 0} {}
  std::size_t size() const { return values.size(); }
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const AdamConfig& cfg);

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  /// Uniform(+-1/sqrt(fan_in)) weights and biases; the output layer uses
  /// +-output_scale instead when output_scale > 0.
  template <typename Rng>
  void initialize(Rng& rng, double output_scale = 0.0);

  const MlpSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

 private:
  std::size_t offset(std::size_t layer) const { return offsets_[layer]; }

  MlpSpec spec_;
  ParamStore params_;
  std::vector<std::size_t> offsets_;
};

/// Layer inputs and pre-activations kept by the forward pass.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preact;
};

/// Rectifier hidden layers, linear output. Throws std::invalid_argument when the
/// input height does not match spec.input_dim.
Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache = nullptr);

/// Accumulates parameter gradients into `param_grad` (size param_count, or empty to
/// skip them) and returns the gradient with respect to the input batch.
Matrix mlp_backward(const Mlp& net, const MlpCache& cache, const Matrix& out_grad,
                    std::span<double> param_grad);

/// Bitmask-like fingerprint of the rectifier pattern, used to skip kinks.
std::uint64_t activation_signature(const MlpCache& cache);

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

/// tanh-squashed diagonal Gaussian built from a head of 2n rows (mean, log_std).
struct SquashedGaussian {
  Matrix mean;
  Matrix log_std;  // clamped
  Matrix std;
  Matrix noise;
  Matrix action;
  RowVector log_prob;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> log_std_clamped;
};

SquashedGaussian policy_sample(const Matrix& head, const Matrix& noise);

/// Gradient with respect to the head given upstream gradients on action and log_prob.
Matrix policy_sample_backward(const SquashedGaussian& s, const Matrix& action_grad,
                              const RowVector& log_prob_grad);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double tolerance = 1e-5;
  double step = 1e-5;
  double abs_floor = 1e-6;  // denominators below this are treated as this
};

/// Central finite differences over every entry of `params`, compared with `analytic`.
/// When `regime` is given, entries whose perturbation changes the regime (e.g. a
/// rectifier crossing its kink) are excluded instead of compared.
GradCheckReport grad_check(std::span<double> params, std::span<const double> analytic,
                           const std::function<double()>& loss, const GradCheckOptions& opts,
                           const std::function<std::uint64_t()>& regime = {});

// ---------------------------------------------------------------------------

template <typename Rng>
void Mlp::initialize(Rng& rng, double output_scale) {
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    double bound = 1.0 / std::sqrt(static_cast<double>(spec_.layer_in(l)));
    if (l + 1 == spec_.layer_count() && output_scale > 0.0) bound = output_scale;
    auto w = weight(l);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = std::uniform_real_distribution<double>(-bound, bound)(rng);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b[i] = std::uniform_real_distribution<double>(-bound, bound)(rng);
    }
  }
}

}  // namespace slotbench
