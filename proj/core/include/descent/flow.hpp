#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace descent {

/// One masked affine autoregressive transform with a single-hidden-layer
/// MADE conditioner. The generative direction (base -> data) inverts each
/// dimension sequentially; the normalizing direction (data -> base) is one
/// masked MLP pass, which is what training evaluates.
class MaskedAffineFlow {
 public:
  /// reversed chooses the alternating input ordering.
  MaskedAffineFlow(int dim, int hidden_width, bool reversed);

  int dim() const { return dim_; }
  int hidden_width() const { return hidden_; }
  bool reversed() const { return reversed_; }

  /// Scale clamp: log-scales are soft-limited to (-kScaleCap, kScaleCap).
  static constexpr double kScaleCap = 3.0;

  /// Conditioner outputs for a batch of inputs (columns are samples).
  void conditioner(const Eigen::MatrixXd& y, Eigen::MatrixXd& mu, Eigen::MatrixXd& alpha,
                   Eigen::MatrixXd* hidden_out = nullptr,
                   Eigen::MatrixXd* clamp_deriv_out = nullptr) const;

  /// Normalizing direction: u = (y - mu(y)) .* exp(-alpha(y)).
  /// Appends -sum(alpha) per sample to logdet (may be null).
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& y, Eigen::VectorXd* logdet) const;

  /// Generative direction for a single sample: x with x_d = u_d*exp(alpha_d)+mu_d,
  /// filled in degree order.
  Eigen::VectorXd generate(const Eigen::VectorXd& u) const;

  struct Gradients {
    Eigen::MatrixXd w1, w2;
    Eigen::VectorXd b1, b2;
  };
  Gradients zero_gradients() const;

  /// Backprop of the normalizing pass. grad_u is dL/du; alpha_direct is the
  /// per-entry direct dL/dalpha contribution (the +alpha NLL term). Returns
  /// dL/dy and accumulates parameter gradients.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& y, const Eigen::MatrixXd& hidden,
                           const Eigen::MatrixXd& mu, const Eigen::MatrixXd& alpha,
                           const Eigen::MatrixXd& clamp_deriv, const Eigen::MatrixXd& grad_u,
                           double alpha_direct, Gradients& grads) const;

  // Parameters (masked entries are kept at zero).
  Eigen::MatrixXd w1, w2;  // hidden x dim, 2*dim x hidden
  Eigen::VectorXd b1, b2;  // hidden, 2*dim

  const Eigen::MatrixXd& mask1() const { return mask1_; }
  const Eigen::MatrixXd& mask2() const { return mask2_; }

  long free_param_count() const;

 private:
  int dim_, hidden_;
  bool reversed_;
  std::vector<int> degree_in_;    // autoregressive degree per input dim, 1-based
  std::vector<int> order_;        // dims sorted by degree
  Eigen::MatrixXd mask1_, mask2_;
};

/// A stack of masked affine flows over a standard-normal base.
struct FlowModel {
  int dim = 0;
  int n_flows = 0;
  int hidden_width = 0;
  std::vector<MaskedAffineFlow> flows;  // applied in order in the generative direction

  static FlowModel make(int dim, int n_flows, int hidden_width);

  /// base z -> data x.
  Eigen::VectorXd forward(const Eigen::VectorXd& z) const;
  /// data x -> base z.
  Eigen::VectorXd inverse(const Eigen::VectorXd& x) const;
  /// log p(x) under the flow (standard-normal base plus log-determinants).
  double log_density(const Eigen::VectorXd& x) const;

  /// Flat parameter vector (fixed order: per flow w1, b1, w2, b2, row-major).
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& theta);
  long flat_size() const;
  long free_param_count() const;
};

struct NfTrainOptions {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 256;       // full batch when n < 512
  int max_epochs = 2000;
  int patience = 50;          // early-stopping epochs without val improvement
  double val_frac = 0.1;
  int max_lr_restarts = 3;    // on divergence, halve lr and restart
};

struct NfTrainResult {
  double final_train_nll = 0.0;
  double best_val_nll = 0.0;
  int epochs = 0;
  int lr_restarts = 0;
};

/// Mini-batch momentum SGD on mean NLL with a held-out validation slice and
/// early stopping. Data columns are dimensions, rows samples (n x d).
/// Deterministic given seed. Throws on persistent divergence.
NfTrainResult train_flow(FlowModel& model, const Eigen::MatrixXd& data, std::uint64_t seed,
                         const NfTrainOptions& opts = {});

/// Mean negative log-likelihood of rows of data under the flow.
double flow_mean_nll(const FlowModel& model, const Eigen::MatrixXd& data);

}  // namespace descent
