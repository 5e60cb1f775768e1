#pragma once

// Dense networks, polynomial decoder head, Adam and the reconstruction
// training loop. Batches are row-major in the sense of "one sample per row".

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "crl/poly_core.hpp"
#include "crl/types.hpp"

namespace crl {
struct Dataset;
}

namespace crl::nets {

/// Flat view of one parameter tensor and its gradient buffer.
struct ParamView {
  double* value;
  const double* grad;
  Eigen::Index size;
};

inline constexpr double kLeakySlope = 0.5;

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Fully connected network with a leaky-ReLU between layers (none after the
/// last). negative_slope = 0 gives a plain ReLU.
class Mlp {
 public:
  Mlp() = default;
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  Mlp(std::vector<int> dims, Rng& rng, double negative_slope = kLeakySlope);

  /// The encoder used throughout: n -> h -> h -> d.
  static Mlp encoder(int obs_dim, int latent_dim, Rng& rng, int hidden = 200);
  /// The MLP decoder: d -> h -> h -> n.
  static Mlp decoder(int latent_dim, int obs_dim, Rng& rng, int hidden = 200);

  const std::vector<int>& dims() const { return dims_; }
  double negative_slope() const { return slope_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  RowVector& bias(std::size_t l) { return biases_[l]; }
  const RowVector& bias(std::size_t l) const { return biases_[l]; }
  const Matrix& weight_grad(std::size_t l) const { return grad_w_[l]; }
  const RowVector& bias_grad(std::size_t l) const { return grad_b_[l]; }

  /// Caches activations for a following backward().
  Matrix forward(const Matrix& x);
  /// Writes parameter gradients of sum(grad_out .* output) and returns the
  /// gradient with respect to the input batch.
  Matrix backward(const Matrix& grad_out);
  Matrix predict(const Matrix& x) const;
  /// Adds coeff * W to every weight gradient (L2 penalty, biases excluded).
  void add_weight_penalty_grad(double coeff);

  std::vector<ParamView> params();
  Eigen::Index parameter_count() const;

 private:
  std::vector<int> dims_;
  double slope_ = kLeakySlope;
  std::vector<Matrix> weights_;  // in x out
  std::vector<RowVector> biases_;
  std::vector<Matrix> grad_w_;
  std::vector<RowVector> grad_b_;
  std::vector<Matrix> inputs_;  // layer inputs (post-activation of previous)
  std::vector<Matrix> pre_;     // pre-activations of hidden layers
};

/// h(z) = H u(z) with a trainable n x q coefficient matrix.
class PolyDecoderHead {
 public:
  PolyDecoderHead() = default;
  PolyDecoderHead(int latent_dim, int degree, int obs_dim, Rng& rng);

  const MonomialBasis& basis() const { return basis_; }
  int degree() const { return basis_.degree(); }
  int input_dim() const { return basis_.latent_dim(); }
  int output_dim() const { return static_cast<int>(h_.rows()); }
  Matrix& coefficients() { return h_; }
  const Matrix& coefficients() const { return h_; }
  const Matrix& coefficient_grad() const { return grad_h_; }

  Matrix forward(const Matrix& z);
  Matrix backward(const Matrix& grad_out);
  Matrix predict(const Matrix& z) const;
  std::vector<ParamView> params();

 private:
  MonomialBasis basis_;
  Matrix h_;  // n x q
  Matrix grad_h_;
  Matrix phi_;
};

/// Adam with L2 weight decay folded into the gradient and bias-corrected
/// moments.
class Adam {
 public:
  Adam(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<const ParamView> params);
  long steps() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Vector> m_, v_;
};

/// Affine input transform y = (x - mean) * forward, undone by inverse. An
/// empty map is the identity.
struct InputMap {
  RowVector mean;
  Matrix forward;
  Matrix inverse;

  bool empty() const { return mean.size() == 0; }
  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& y) const;
};

/// ZCA whitening fitted on the rows of x. Covariance eigenvalues get
/// ridge * (largest eigenvalue) added so the flat directions of data lying on
/// a low-dimensional subspace stay bounded.
InputMap fit_whitening(const Matrix& x, double ridge = 1e-6);

using Decoder = std::variant<PolyDecoderHead, Mlp>;

/// encoder and decoder act in the coordinates of `input`; encode, decode and
/// reconstruct take and return raw x.
struct Autoencoder {
  Mlp encoder;
  Decoder decoder;
  InputMap input;

  Matrix encode(const Matrix& x) const { return encoder.predict(input.apply(x)); }
  Matrix decode(const Matrix& z) const;
  Matrix reconstruct(const Matrix& x) const { return decode(encode(x)); }
};

/// Mean over entries of (a - b)^2.
double mse(const Matrix& a, const Matrix& b);

struct TrainHyper {
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 5e-4;
  int patience = 10;
  std::uint64_t seed = 0;
  // Whiten x on the training rows first. Without it the degree-2 head on
  // U(-5,5) latents settles on even functions of z (R^2 near 0).
  bool whiten = true;
  double whiten_ridge = 1e-6;
  bool operator==(const TrainHyper&) const = default;
};

struct TrainResult {
  Autoencoder model;  // best-validation checkpoint
  std::vector<double> train_loss;  // in whitened units when hp.whiten
  std::vector<double> val_loss;
  int best_epoch = -1;  // -1 means the initial model
  double best_val = 0.0;
  double initial_val = 0.0;
};

/// Minibatch Adam on mean squared reconstruction. Stops after `patience`
/// epochs without validation improvement and returns the best-validation
/// model. Throws TrainingDivergence on a non-finite loss.
TrainResult train_autoencoder(Autoencoder model, const Matrix& x_train, const Matrix& x_val,
                              const TrainHyper& hp);

/// Trains on the train rows (observational and interventional) of ds and
/// validates on its val rows.
TrainResult train_autoencoder(Autoencoder model, const Dataset& ds, const TrainHyper& hp);

/// Runs one training per grid entry, model k built by make_model(k), and
/// returns the index of the lowest best-validation loss (first one on ties).
/// Repeated learning rates act as restarts. Diverged runs are never chosen.
struct LrSelection {
  std::size_t chosen = 0;
  double lr = 0.0;
  std::vector<double> val_losses;  // +inf for diverged runs
  TrainResult best;
};
LrSelection lr_select(const std::vector<double>& grid, const std::function<Autoencoder(std::size_t)>& make_model,
                      const Matrix& x_train, const Matrix& x_val, TrainHyper hp);

/// Regression head trained like scikit-learn's MLPRegressor defaults:
/// Adam, minibatches of min(200, m), L2 alpha, stop when the training loss
/// fails to improve by tol for n_iter_no_change epochs.
struct RegressorHyper {
  std::vector<int> hidden = {100};
  double lr = 1e-3;
  double alpha = 1e-4;
  int max_iter = 1000;
  int batch_size = 200;
  double tol = 1e-4;
  int n_iter_no_change = 10;
  std::uint64_t seed = 0;
  bool operator==(const RegressorHyper&) const = default;
};

struct RegressorFit {
  Mlp net;
  int epochs = 0;
  bool converged = false;
  double final_loss = 0.0;
};

RegressorFit fit_regressor(const Matrix& x, const Matrix& y, const RegressorHyper& hp);

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const TrainHyper& hp,
                     const Rng& rng_state);
Autoencoder load_checkpoint(const std::filesystem::path& path, TrainHyper* hp = nullptr,
                            Rng* rng_state = nullptr);

}  // namespace crl::nets
