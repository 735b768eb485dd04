#include "descent/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "descent/errors.hpp"
#include "descent/rng.hpp"

namespace descent {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

MaskedAffineFlow::MaskedAffineFlow(int dim, int hidden_width, bool reversed)
    : dim_(dim), hidden_(hidden_width), reversed_(reversed) {
  if (dim < 1 || hidden_width < 1) {
    throw std::domain_error("MaskedAffineFlow: dim and hidden width must be >= 1");
  }
  degree_in_.resize(dim);
  order_.resize(dim);
  for (int d = 0; d < dim; ++d) {
    degree_in_[d] = reversed ? dim - d : d + 1;
    order_[degree_in_[d] - 1] = d;
  }

  // MADE masks: hidden unit j carries degree 1 + (j mod (dim-1)); inputs
  // connect non-strictly, outputs strictly, which yields the autoregressive
  // property. dim == 1 leaves the conditioner constant.
  mask1_ = Eigen::MatrixXd::Zero(hidden_, dim_);
  mask2_ = Eigen::MatrixXd::Zero(2 * dim_, hidden_);
  if (dim_ > 1) {
    std::vector<int> hidden_degree(hidden_);
    for (int j = 0; j < hidden_; ++j) hidden_degree[j] = 1 + (j % (dim_ - 1));
    for (int j = 0; j < hidden_; ++j) {
      for (int d = 0; d < dim_; ++d) {
        if (hidden_degree[j] >= degree_in_[d]) mask1_(j, d) = 1.0;
      }
    }
    for (int d = 0; d < dim_; ++d) {
      for (int j = 0; j < hidden_; ++j) {
        if (degree_in_[d] > hidden_degree[j]) {
          mask2_(d, j) = 1.0;          // mu row
          mask2_(dim_ + d, j) = 1.0;   // log-scale row
        }
      }
    }
  }

  w1 = Eigen::MatrixXd::Zero(hidden_, dim_);
  w2 = Eigen::MatrixXd::Zero(2 * dim_, hidden_);
  b1 = Eigen::VectorXd::Zero(hidden_);
  b2 = Eigen::VectorXd::Zero(2 * dim_);
}

void MaskedAffineFlow::conditioner(const Eigen::MatrixXd& y, Eigen::MatrixXd& mu,
                                   Eigen::MatrixXd& alpha, Eigen::MatrixXd* hidden_out,
                                   Eigen::MatrixXd* clamp_deriv_out) const {
  const Eigen::MatrixXd hidden =
      ((w1 * y).colwise() + b1).array().tanh().matrix();  // hidden x B
  const Eigen::MatrixXd pre2 = (w2 * hidden).colwise() + b2;
  mu = pre2.topRows(dim_);
  const Eigen::ArrayXXd scaled = pre2.bottomRows(dim_).array() / kScaleCap;
  const Eigen::ArrayXXd t = scaled.tanh();
  alpha = (kScaleCap * t).matrix();
  if (hidden_out) *hidden_out = hidden;
  if (clamp_deriv_out) *clamp_deriv_out = (1.0 - t.square()).matrix();
}

Eigen::MatrixXd MaskedAffineFlow::normalize(const Eigen::MatrixXd& y,
                                            Eigen::VectorXd* logdet) const {
  Eigen::MatrixXd mu, alpha;
  conditioner(y, mu, alpha);
  if (logdet) *logdet -= alpha.colwise().sum().transpose();
  return ((y - mu).array() * (-alpha.array()).exp()).matrix();
}

Eigen::VectorXd MaskedAffineFlow::generate(const Eigen::VectorXd& u) const {
  Eigen::VectorXd x = u;
  Eigen::MatrixXd mu, alpha;
  for (int p = 0; p < dim_; ++p) {
    const int d = order_[p];
    conditioner(x, mu, alpha);
    x[d] = u[d] * std::exp(alpha(d, 0)) + mu(d, 0);
  }
  return x;
}

MaskedAffineFlow::Gradients MaskedAffineFlow::zero_gradients() const {
  return {Eigen::MatrixXd::Zero(hidden_, dim_), Eigen::MatrixXd::Zero(2 * dim_, hidden_),
          Eigen::VectorXd::Zero(hidden_), Eigen::VectorXd::Zero(2 * dim_)};
}

Eigen::MatrixXd MaskedAffineFlow::backward(const Eigen::MatrixXd& y,
                                           const Eigen::MatrixXd& hidden,
                                           const Eigen::MatrixXd& mu,
                                           const Eigen::MatrixXd& alpha,
                                           const Eigen::MatrixXd& clamp_deriv,
                                           const Eigen::MatrixXd& grad_u, double alpha_direct,
                                           Gradients& grads) const {
  const Eigen::ArrayXXd t = (-alpha.array()).exp();
  const Eigen::ArrayXXd u = (y - mu).array() * t;

  const Eigen::MatrixXd dmu = (-grad_u.array() * t).matrix();
  const Eigen::MatrixXd dalpha_raw =
      ((grad_u.array() * (-u) + alpha_direct) * clamp_deriv.array()).matrix();

  Eigen::MatrixXd delta2(2 * dim_, y.cols());
  delta2.topRows(dim_) = dmu;
  delta2.bottomRows(dim_) = dalpha_raw;

  grads.w2.array() += (delta2 * hidden.transpose()).array() * mask2_.array();
  grads.b2 += delta2.rowwise().sum();

  const Eigen::MatrixXd delta_h =
      ((w2.transpose() * delta2).array() * (1.0 - hidden.array().square())).matrix();
  grads.w1.array() += (delta_h * y.transpose()).array() * mask1_.array();
  grads.b1 += delta_h.rowwise().sum();

  return (grad_u.array() * t).matrix() + w1.transpose() * delta_h;
}

long MaskedAffineFlow::free_param_count() const {
  return static_cast<long>(mask1_.sum() + mask2_.sum()) + hidden_ + 2 * dim_;
}

FlowModel FlowModel::make(int dim, int n_flows, int hidden_width) {
  if (n_flows < 1) throw std::domain_error("FlowModel: need at least one flow");
  FlowModel m;
  m.dim = dim;
  m.n_flows = n_flows;
  m.hidden_width = hidden_width;
  m.flows.reserve(n_flows);
  for (int k = 0; k < n_flows; ++k) {
    m.flows.emplace_back(dim, hidden_width, k % 2 == 1);
  }
  return m;
}

Eigen::VectorXd FlowModel::forward(const Eigen::VectorXd& z) const {
  Eigen::VectorXd x = z;
  for (const auto& f : flows) x = f.generate(x);
  return x;
}

Eigen::VectorXd FlowModel::inverse(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd y = x;
  for (auto it = flows.rbegin(); it != flows.rend(); ++it) y = it->normalize(y, nullptr);
  return y.col(0);
}

double FlowModel::log_density(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd y = x;
  Eigen::VectorXd logdet = Eigen::VectorXd::Zero(1);
  for (auto it = flows.rbegin(); it != flows.rend(); ++it) y = it->normalize(y, &logdet);
  return -0.5 * y.col(0).squaredNorm() - 0.5 * dim * kLog2Pi + logdet[0];
}

long FlowModel::flat_size() const {
  long n = 0;
  for (const auto& f : flows) {
    n += f.w1.size() + f.b1.size() + f.w2.size() + f.b2.size();
  }
  return n;
}

long FlowModel::free_param_count() const {
  long n = 0;
  for (const auto& f : flows) n += f.free_param_count();
  return n;
}

Eigen::VectorXd FlowModel::flat_parameters() const {
  Eigen::VectorXd theta(flat_size());
  long at = 0;
  const auto put_matrix = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) theta[at++] = m(r, c);
    }
  };
  const auto put_vector = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index r = 0; r < v.size(); ++r) theta[at++] = v[r];
  };
  for (const auto& f : flows) {
    put_matrix(f.w1);
    put_vector(f.b1);
    put_matrix(f.w2);
    put_vector(f.b2);
  }
  return theta;
}

void FlowModel::set_flat_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != flat_size()) {
    throw std::domain_error("FlowModel: flat parameter size mismatch");
  }
  long at = 0;
  const auto get_matrix = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& mask) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = theta[at++] * mask(r, c);
    }
  };
  const auto get_vector = [&](Eigen::VectorXd& v) {
    for (Eigen::Index r = 0; r < v.size(); ++r) v[r] = theta[at++];
  };
  for (auto& f : flows) {
    get_matrix(f.w1, f.mask1());
    get_vector(f.b1);
    get_matrix(f.w2, f.mask2());
    get_vector(f.b2);
  }
}

double flow_mean_nll(const FlowModel& model, const Eigen::MatrixXd& data) {
  if (data.rows() == 0) throw std::domain_error("flow_mean_nll: empty data");
  Eigen::MatrixXd y = data.transpose();  // d x n
  Eigen::VectorXd logdet = Eigen::VectorXd::Zero(data.rows());
  for (auto it = model.flows.rbegin(); it != model.flows.rend(); ++it) {
    y = it->normalize(y, &logdet);
  }
  const double quad = 0.5 * y.array().square().colwise().sum().mean();
  return quad + 0.5 * model.dim * kLog2Pi - logdet.mean();
}

namespace {

struct Momentum {
  std::vector<MaskedAffineFlow::Gradients> v;
  explicit Momentum(const FlowModel& m) {
    v.reserve(m.flows.size());
    for (const auto& f : m.flows) v.push_back(f.zero_gradients());
  }
  void reset() {
    for (auto& g : v) {
      g.w1.setZero();
      g.w2.setZero();
      g.b1.setZero();
      g.b2.setZero();
    }
  }
};

void init_parameters(FlowModel& model, Rng& rng) {
  for (auto& f : model.flows) {
    for (Eigen::Index r = 0; r < f.w1.rows(); ++r) {
      for (Eigen::Index c = 0; c < f.w1.cols(); ++c) {
        f.w1(r, c) = 0.1 * rng.normal() * f.mask1()(r, c);
      }
    }
    f.b1.setZero();
    f.w2.setZero();  // identity transform at init
    f.b2.setZero();
  }
}

/// One SGD step over a batch (columns). Returns the batch mean NLL.
double step_batch(FlowModel& model, const Eigen::MatrixXd& batch, double lr, double momentum,
                  Momentum& mom) {
  const auto n_flows = model.flows.size();
  const double inv_b = 1.0 / static_cast<double>(batch.cols());

  // Normalizing passes with caches; flows applied from last to first.
  std::vector<Eigen::MatrixXd> ys(n_flows), hids(n_flows), mus(n_flows), alphas(n_flows),
      clamps(n_flows);
  Eigen::MatrixXd y = batch;
  double alpha_sum = 0.0;
  for (std::size_t i = 0; i < n_flows; ++i) {
    const auto& f = model.flows[n_flows - 1 - i];
    ys[i] = y;
    Eigen::MatrixXd mu, alpha, hidden, clamp;
    f.conditioner(y, mu, alpha, &hidden, &clamp);
    hids[i] = std::move(hidden);
    clamps[i] = std::move(clamp);
    y = ((y - mu).array() * (-alpha.array()).exp()).matrix();
    alpha_sum += alpha.sum();
    mus[i] = std::move(mu);
    alphas[i] = std::move(alpha);
  }

  const double nll = 0.5 * y.array().square().sum() * inv_b +
                     0.5 * model.dim * kLog2Pi + alpha_sum * inv_b;

  std::vector<MaskedAffineFlow::Gradients> grads;
  grads.reserve(n_flows);
  for (const auto& f : model.flows) grads.push_back(f.zero_gradients());

  Eigen::MatrixXd grad = y * inv_b;  // dNLL/dz
  for (std::size_t i = n_flows; i-- > 0;) {
    const auto& f = model.flows[n_flows - 1 - i];
    grad = f.backward(ys[i], hids[i], mus[i], alphas[i], clamps[i], grad, inv_b,
                      grads[n_flows - 1 - i]);
  }

  for (std::size_t k = 0; k < n_flows; ++k) {
    auto& f = model.flows[k];
    auto& v = mom.v[k];
    const auto& g = grads[k];
    v.w1 = momentum * v.w1 - lr * g.w1;
    v.b1 = momentum * v.b1 - lr * g.b1;
    v.w2 = momentum * v.w2 - lr * g.w2;
    v.b2 = momentum * v.b2 - lr * g.b2;
    f.w1 += v.w1;
    f.b1 += v.b1;
    f.w2 += v.w2;
    f.b2 += v.b2;
  }
  return nll;
}

}  // namespace

NfTrainResult train_flow(FlowModel& model, const Eigen::MatrixXd& data, std::uint64_t seed,
                         const NfTrainOptions& opts) {
  const long n = data.rows();
  const int d = model.dim;
  if (data.cols() != d) throw std::domain_error("train_flow: data dim mismatch");
  if (n < 2) throw InsufficientDataError("train_flow: need at least 2 samples");

  Rng split_rng(seed);
  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  split_rng.shuffle(idx);

  const long n_val = n >= 10 ? std::max<long>(1, std::lround(opts.val_frac * n)) : 0;
  const long n_train = n - n_val;
  Eigen::MatrixXd val(d, n_val), train(d, n_train);
  for (long i = 0; i < n_val; ++i) val.col(i) = data.row(idx[i]).transpose();
  for (long i = 0; i < n_train; ++i) train.col(i) = data.row(idx[n_val + i]).transpose();

  const long batch_size = n_train < 512 ? n_train : std::min<long>(opts.batch_size, n_train);

  const auto eval_nll = [&](const Eigen::MatrixXd& cols) {
    Eigen::MatrixXd y = cols;
    Eigen::VectorXd logdet = Eigen::VectorXd::Zero(cols.cols());
    for (auto it = model.flows.rbegin(); it != model.flows.rend(); ++it) {
      y = it->normalize(y, &logdet);
    }
    return 0.5 * y.array().square().colwise().sum().mean() + 0.5 * d * kLog2Pi -
           logdet.mean();
  };

  NfTrainResult result;
  double lr = opts.learning_rate;
  for (int attempt = 0;; ++attempt) {
    Rng rng(Rng::substream(seed, 0xF10Du ^ static_cast<std::uint64_t>(attempt)).next_u64());
    init_parameters(model, rng);
    Momentum mom(model);
    mom.reset();

    Eigen::VectorXd best_params = model.flat_parameters();
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    bool diverged = false;
    int epoch = 0;

    std::vector<long> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (epoch = 0; epoch < opts.max_epochs; ++epoch) {
      rng.shuffle(order);
      double epoch_nll = 0.0;
      long batches = 0;
      for (long at = 0; at < n_train; at += batch_size) {
        const long b = std::min(batch_size, n_train - at);
        Eigen::MatrixXd batch(d, b);
        for (long i = 0; i < b; ++i) batch.col(i) = train.col(order[at + i]);
        epoch_nll += step_batch(model, batch, lr, opts.momentum, mom);
        ++batches;
      }
      epoch_nll /= static_cast<double>(batches);
      if (!std::isfinite(epoch_nll)) {
        diverged = true;
        break;
      }
      const double monitored = n_val > 0 ? eval_nll(val) : epoch_nll;
      if (!std::isfinite(monitored)) {
        diverged = true;
        break;
      }
      if (monitored < best_val - 1e-9) {
        best_val = monitored;
        best_params = model.flat_parameters();
        since_best = 0;
      } else if (++since_best >= opts.patience) {
        ++epoch;
        break;
      }
    }

    if (!diverged) {
      model.set_flat_parameters(best_params);
      result.best_val_nll = best_val;
      result.final_train_nll = flow_mean_nll(model, train.transpose());
      result.epochs = epoch;
      result.lr_restarts = attempt;
      return result;
    }
    if (attempt >= opts.max_lr_restarts) {
      throw std::runtime_error("train_flow: loss diverged after " +
                               std::to_string(attempt + 1) + " attempts");
    }
    lr *= 0.5;
  }
}

}  // namespace descent
