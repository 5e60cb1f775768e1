#include "crl/nets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "crl/datagen.hpp"
#include "crl/io.hpp"

namespace crl::nets {

namespace {

void append(std::vector<ParamView>& out, Matrix& value, const Matrix& grad) {
  out.push_back({value.data(), grad.data(), value.size()});
}
void append(std::vector<ParamView>& out, RowVector& value, const RowVector& grad) {
  out.push_back({value.data(), grad.data(), value.size()});
}

Matrix gather_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

}  // namespace

// ------------------------------------------------------------------------ Mlp

Mlp::Mlp(std::vector<int> dims, Rng& rng, double negative_slope)
    : dims_(std::move(dims)), slope_(negative_slope) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::uniform_real_distribution<double> init(-bound, bound);
    Matrix w(dims_[l], dims_[l + 1]);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = init(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(RowVector::Zero(dims_[l + 1]));
    grad_w_.push_back(Matrix::Zero(dims_[l], dims_[l + 1]));
    grad_b_.push_back(RowVector::Zero(dims_[l + 1]));
  }
}

Mlp Mlp::encoder(int obs_dim, int latent_dim, Rng& rng, int hidden) {
  return Mlp({obs_dim, hidden, hidden, latent_dim}, rng, kLeakySlope);
}

Mlp Mlp::decoder(int latent_dim, int obs_dim, Rng& rng, int hidden) {
  return Mlp({latent_dim, hidden, hidden, obs_dim}, rng, kLeakySlope);
}

Matrix Mlp::forward(const Matrix& x) {
  require_dims(x.cols() == input_dim(), "Mlp::forward: input width mismatch");
  const std::size_t L = weights_.size();
  inputs_.resize(L);
  pre_.resize(L);
  inputs_[0] = x;
  Matrix out;
  for (std::size_t l = 0; l < L; ++l) {
    Matrix z = inputs_[l] * weights_[l];
    z.rowwise() += biases_[l];
    if (l + 1 == L) {
      out = std::move(z);
    } else {
      inputs_[l + 1] = z.cwiseMax(0.0) + slope_ * z.cwiseMin(0.0);
      pre_[l] = std::move(z);
    }
  }
  if (!out.allFinite()) throw std::runtime_error("Mlp::forward: non-finite activations");
  return out;
}

Matrix Mlp::backward(const Matrix& grad_out) {
  const std::size_t L = weights_.size();
  require_dims(!inputs_.empty() && grad_out.rows() == inputs_[0].rows() && grad_out.cols() == output_dim(),
               "Mlp::backward: call forward first with a matching batch");
  Matrix g = grad_out;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L)
      g.array() *= pre_[l].array().unaryExpr([s = slope_](double v) { return v > 0.0 ? 1.0 : s; });
    grad_w_[l].noalias() = inputs_[l].transpose() * g;
    grad_b_[l] = g.colwise().sum();
    Matrix next = g * weights_[l].transpose();
    g = std::move(next);
  }
  return g;
}

Matrix Mlp::predict(const Matrix& x) const {
  require_dims(x.cols() == input_dim(), "Mlp::predict: input width mismatch");
  Matrix a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = a * weights_[l];
    z.rowwise() += biases_[l];
    if (l + 1 < weights_.size()) a = z.cwiseMax(0.0) + slope_ * z.cwiseMin(0.0);
    else a = std::move(z);
  }
  return a;
}

void Mlp::add_weight_penalty_grad(double coeff) {
  for (std::size_t l = 0; l < weights_.size(); ++l) grad_w_[l] += coeff * weights_[l];
}

std::vector<ParamView> Mlp::params() {
  std::vector<ParamView> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    append(out, weights_[l], grad_w_[l]);
    append(out, biases_[l], grad_b_[l]);
  }
  return out;
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

// ------------------------------------------------------------ PolyDecoderHead

PolyDecoderHead::PolyDecoderHead(int latent_dim, int degree, int obs_dim, Rng& rng)
    : basis_(latent_dim, degree) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(basis_.size()));
  std::uniform_real_distribution<double> init(-bound, bound);
  h_.resize(obs_dim, basis_.size());
  for (Eigen::Index c = 0; c < h_.cols(); ++c)
    for (Eigen::Index r = 0; r < h_.rows(); ++r) h_(r, c) = init(rng);
  grad_h_ = Matrix::Zero(h_.rows(), h_.cols());
}

Matrix PolyDecoderHead::forward(const Matrix& z) {
  phi_ = basis_.featurize(z);
  return phi_ * h_.transpose();
}

Matrix PolyDecoderHead::backward(const Matrix& grad_out) {
  require_dims(grad_out.rows() == phi_.rows() && grad_out.cols() == h_.rows(),
               "PolyDecoderHead::backward: call forward first with a matching batch");
  grad_h_.noalias() = grad_out.transpose() * phi_;
  const Matrix grad_phi = grad_out * h_;
  return basis_.featurize_backward(phi_, grad_phi);
}

Matrix PolyDecoderHead::predict(const Matrix& z) const { return basis_.featurize(z) * h_.transpose(); }

std::vector<ParamView> PolyDecoderHead::params() {
  std::vector<ParamView> out;
  append(out, h_, grad_h_);
  return out;
}

// ----------------------------------------------------------------------- Adam

Adam::Adam(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(std::span<const ParamView> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Vector::Zero(p.size));
      v_.push_back(Vector::Zero(p.size));
    }
  }
  require_dims(m_.size() == params.size(), "Adam::step: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    Eigen::Map<Vector> value(p.value, p.size);
    Eigen::Map<const Vector> grad(p.grad, p.size);
    Vector g = grad;
    if (wd_ != 0.0) g += wd_ * value;
    m_[k] = b1_ * m_[k] + (1.0 - b1_) * g;
    v_[k] = b2_ * v_[k] + (1.0 - b2_) * g.cwiseAbs2();
    value.array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

// ---------------------------------------------------------------- Autoencoder

Matrix InputMap::apply(const Matrix& x) const {
  if (empty()) return x;
  require_dims(x.cols() == mean.cols(), "InputMap::apply: width mismatch");
  return (x.rowwise() - mean) * forward;
}

Matrix InputMap::invert(const Matrix& y) const {
  if (empty()) return y;
  require_dims(y.cols() == inverse.rows(), "InputMap::invert: width mismatch");
  return (y * inverse).rowwise() + mean;
}

InputMap fit_whitening(const Matrix& x, double ridge) {
  if (x.rows() < 2) throw std::invalid_argument("fit_whitening: need at least two rows");
  InputMap map;
  map.mean = x.colwise().mean();
  const Matrix c = x.rowwise() - map.mean;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(c.transpose() * c / static_cast<double>(x.rows()));
  if (es.info() != Eigen::Success) throw std::runtime_error("fit_whitening: eigendecomposition failed");
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  const double top = ev.maxCoeff();
  if (!(top > 0.0)) throw std::invalid_argument("fit_whitening: constant input");
  const Vector scale = (ev.array() + ridge * top).sqrt();
  const Matrix& u = es.eigenvectors();
  map.forward = u * scale.cwiseInverse().asDiagonal() * u.transpose();
  map.inverse = u * scale.asDiagonal() * u.transpose();
  return map;
}

Matrix Autoencoder::decode(const Matrix& z) const {
  return input.invert(std::visit([&](const auto& dec) { return dec.predict(z); }, decoder));
}

double mse(const Matrix& a, const Matrix& b) {
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "mse: shape mismatch");
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

TrainResult train_autoencoder(Autoencoder model, const Matrix& x_train_raw, const Matrix& x_val_raw,
                              const TrainHyper& hp) {
  require_dims(x_train_raw.cols() == model.encoder.input_dim(), "train_autoencoder: input width mismatch");
  if (x_train_raw.rows() == 0) throw std::invalid_argument("train_autoencoder: empty training set");
  if (hp.whiten) model.input = fit_whitening(x_train_raw, hp.whiten_ridge);
  const Matrix x_train = model.input.apply(x_train_raw);
  const Matrix x_val = x_val_raw.rows() ? model.input.apply(x_val_raw) : x_val_raw;
  Rng rng(hp.seed);
  Adam opt(hp.lr, hp.weight_decay);

  std::vector<ParamView> params = model.encoder.params();
  std::visit([&](auto& dec) {
    auto extra = dec.params();
    params.insert(params.end(), extra.begin(), extra.end());
  }, model.decoder);

  auto val_loss = [&](const Autoencoder& m) {
    if (!x_val.rows()) return 0.0;
    const Matrix zv = m.encoder.predict(x_val);
    return mse(std::visit([&](const auto& dec) { return dec.predict(zv); }, m.decoder), x_val);
  };

  TrainResult res;
  res.initial_val = val_loss(model);
  res.best_val = res.initial_val;
  res.model = model;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(std::max(1, hp.batch_size));
  int since_best = 0;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      const Matrix xb = gather_rows(x_train, std::span(order).subspan(start, stop - start));
      const Matrix zb = model.encoder.forward(xb);
      const Matrix xh = std::visit([&](auto& dec) { return dec.forward(zb); }, model.decoder);
      const Matrix diff = xh - xb;
      total += diff.squaredNorm();
      const Matrix grad = (2.0 / static_cast<double>(diff.size())) * diff;
      const Matrix gz = std::visit([&](auto& dec) { return dec.backward(grad); }, model.decoder);
      model.encoder.backward(gz);
      opt.step(params);
    }
    const double train = total / static_cast<double>(x_train.size());
    if (!std::isfinite(train))
      throw TrainingDivergence("non-finite training loss at epoch " + std::to_string(epoch), epoch);
    const double val = val_loss(model);
    if (!std::isfinite(val))
      throw TrainingDivergence("non-finite validation loss at epoch " + std::to_string(epoch), epoch);
    res.train_loss.push_back(train);
    res.val_loss.push_back(val);
    if (val < res.best_val) {
      res.best_val = val;
      res.best_epoch = epoch;
      res.model = model;
      since_best = 0;
    } else if (++since_best >= hp.patience) {
      break;
    }
  }
  return res;
}

TrainResult train_autoencoder(Autoencoder model, const Dataset& ds, const TrainHyper& hp) {
  return train_autoencoder(std::move(model), ds.rows_x(ds.select(Split::Train)),
                           ds.rows_x(ds.select(Split::Val)), hp);
}

LrSelection lr_select(const std::vector<double>& grid, const std::function<Autoencoder(std::size_t)>& make_model,
                      const Matrix& x_train, const Matrix& x_val, TrainHyper hp) {
  if (grid.empty()) throw std::invalid_argument("lr_select: empty grid");
  LrSelection sel;
  double best = std::numeric_limits<double>::infinity();
  bool have = false;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    hp.lr = grid[k];
    double val = std::numeric_limits<double>::infinity();
    try {
      auto res = train_autoencoder(make_model(k), x_train, x_val, hp);
      val = res.best_val;
      if (!have || val < best) {
        best = val;
        sel.chosen = k;
        sel.best = std::move(res);
        have = true;
      }
    } catch (const TrainingDivergence&) {
      // recorded as +inf
    }
    sel.val_losses.push_back(val);
  }
  if (!have) throw TrainingDivergence("lr_select: every learning rate diverged", -1);
  sel.lr = grid[sel.chosen];
  return sel;
}

RegressorFit fit_regressor(const Matrix& x, const Matrix& y, const RegressorHyper& hp) {
  require_dims(x.rows() == y.rows() && x.rows() > 0, "fit_regressor: row mismatch or empty input");
  Rng rng(hp.seed);
  std::vector<int> dims{static_cast<int>(x.cols())};
  dims.insert(dims.end(), hp.hidden.begin(), hp.hidden.end());
  dims.push_back(static_cast<int>(y.cols()));
  RegressorFit fit{Mlp(dims, rng, 0.0)};
  auto params = fit.net.params();
  Adam opt(hp.lr);
  const auto m = static_cast<std::size_t>(x.rows());
  const auto batch = std::min<std::size_t>(m, static_cast<std::size_t>(hp.batch_size));
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int epoch = 0; epoch < hp.max_iter; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < m; start += batch) {
      const auto stop = std::min(m, start + batch);
      const auto idx = std::span(order).subspan(start, stop - start);
      const Matrix xb = gather_rows(x, idx);
      const Matrix yb = gather_rows(y, idx);
      const Matrix diff = fit.net.forward(xb) - yb;
      const double bsz = static_cast<double>(xb.rows());
      double penalty = 0.0;
      for (std::size_t l = 0; l < fit.net.num_layers(); ++l) penalty += fit.net.weight(l).squaredNorm();
      total += 0.5 * diff.squaredNorm() + 0.5 * hp.alpha * penalty;
      fit.net.backward(diff / bsz);
      fit.net.add_weight_penalty_grad(hp.alpha / bsz);
      opt.step(params);
    }
    fit.final_loss = total / static_cast<double>(m);
    fit.epochs = epoch + 1;
    if (!std::isfinite(fit.final_loss)) throw TrainingDivergence("regressor diverged", epoch);
    if (fit.final_loss > best - hp.tol) {
      if (++stall >= hp.n_iter_no_change) {
        fit.converged = true;
        break;
      }
    } else {
      stall = 0;
    }
    best = std::min(best, fit.final_loss);
  }
  return fit;
}

// ---------------------------------------------------------------- checkpoints

namespace {

void put_mlp(io::BinaryArchive& ar, const std::string& prefix, const Mlp& net) {
  ar.put_ints(prefix + ".dims", std::vector<std::int64_t>(net.dims().begin(), net.dims().end()));
  Matrix slope(1, 1);
  slope(0, 0) = net.negative_slope();
  ar.put(prefix + ".slope", slope);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    ar.put(prefix + ".w" + std::to_string(l), net.weight(l));
    ar.put(prefix + ".b" + std::to_string(l), net.bias(l));
  }
}

Mlp get_mlp(const io::BinaryArchive& ar, const std::string& prefix) {
  const auto& d = ar.ints(prefix + ".dims");
  std::vector<int> dims(d.begin(), d.end());
  Rng dummy(0);
  Mlp net(dims, dummy, ar.matrix(prefix + ".slope")(0, 0));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = ar.matrix(prefix + ".w" + std::to_string(l));
    const auto& b = ar.matrix(prefix + ".b" + std::to_string(l));
    if (w.rows() != net.weight(l).rows() || w.cols() != net.weight(l).cols() || b.cols() != net.bias(l).cols())
      throw FormatError("checkpoint layer shape mismatch");
    net.weight(l) = w;
    net.bias(l) = b;
  }
  return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model, const TrainHyper& hp,
                     const Rng& rng_state) {
  io::BinaryArchive ar;
  put_mlp(ar, "encoder", model.encoder);
  if (const auto* poly = std::get_if<PolyDecoderHead>(&model.decoder)) {
    ar.put_string("decoder.kind", "poly");
    ar.put_ints("decoder.shape", {poly->input_dim(), poly->degree(), poly->output_dim()});
    ar.put("decoder.H", poly->coefficients());
  } else {
    ar.put_string("decoder.kind", "mlp");
    put_mlp(ar, "decoder", std::get<Mlp>(model.decoder));
  }
  if (!model.input.empty()) {
    ar.put("input.mean", model.input.mean);
    ar.put("input.forward", model.input.forward);
    ar.put("input.inverse", model.input.inverse);
  }
  io::KeyValueDoc h;
  h.set("epochs", hp.epochs);
  h.set("batch_size", hp.batch_size);
  h.set("lr", hp.lr);
  h.set("weight_decay", hp.weight_decay);
  h.set("patience", hp.patience);
  h.set("seed", std::to_string(hp.seed));
  h.set("whiten", hp.whiten ? 1 : 0);
  h.set("whiten_ridge", hp.whiten_ridge);
  ar.put_string("hyper", h.emit());
  std::ostringstream rs;
  rs << rng_state;
  ar.put_string("rng", rs.str());
  ar.save(path);
}

Autoencoder load_checkpoint(const std::filesystem::path& path, TrainHyper* hp, Rng* rng_state) {
  const auto ar = io::BinaryArchive::load(path);
  Autoencoder model;
  model.encoder = get_mlp(ar, "encoder");
  const auto& kind = ar.string("decoder.kind");
  if (kind == "poly") {
    const auto& s = ar.ints("decoder.shape");
    if (s.size() != 3) throw FormatError("bad poly decoder shape");
    Rng dummy(0);
    PolyDecoderHead head(static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2]), dummy);
    const auto& hm = ar.matrix("decoder.H");
    if (hm.rows() != head.coefficients().rows() || hm.cols() != head.coefficients().cols())
      throw FormatError("poly decoder coefficient shape mismatch");
    head.coefficients() = hm;
    model.decoder = std::move(head);
  } else if (kind == "mlp") {
    model.decoder = get_mlp(ar, "decoder");
  } else {
    throw FormatError("unknown decoder kind '" + kind + "'");
  }
  if (ar.has_matrix("input.mean")) {
    model.input.mean = ar.matrix("input.mean");
    model.input.forward = ar.matrix("input.forward");
    model.input.inverse = ar.matrix("input.inverse");
    const auto n = model.encoder.input_dim();
    if (model.input.mean.rows() != 1 || model.input.mean.cols() != n || model.input.forward.rows() != n ||
        model.input.forward.cols() != n || model.input.inverse.rows() != n || model.input.inverse.cols() != n)
      throw FormatError("checkpoint input map shape mismatch");
  }
  if (hp) {
    const auto h = io::KeyValueDoc::parse(ar.string("hyper"));
    hp->epochs = static_cast<int>(h.get_int("epochs"));
    hp->batch_size = static_cast<int>(h.get_int("batch_size"));
    hp->lr = h.get_double("lr");
    hp->weight_decay = h.get_double("weight_decay");
    hp->patience = static_cast<int>(h.get_int("patience"));
    hp->seed = std::stoull(h.require("seed"));
    hp->whiten = h.get_int("whiten") != 0;
    hp->whiten_ridge = h.get_double("whiten_ridge");
  }
  if (rng_state) {
    std::istringstream rs(ar.string("rng"));
    rs >> *rng_state;
  }
  return model;
}

}  // namespace crl::nets
