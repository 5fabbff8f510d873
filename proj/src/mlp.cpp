#include "ridehail/mlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ridehail/error.hpp"
#include "ridehail/rng.hpp"

namespace ridehail {

// ---------------------------------------------------------------------------
// Encoder

std::size_t bit_width_for(long long max_value) {
  std::size_t w = 1;
  while (w < 63 && (1LL << w) <= max_value) ++w;
  return w;
}

InputEncoder InputEncoder::from_fields(std::vector<Field> fields) {
  InputEncoder enc;
  std::size_t offset = 0;
  for (auto& f : fields) {
    f.offset = offset;
    offset += f.width;
  }
  enc.fields_ = std::move(fields);
  enc.width_ = offset;
  return enc;
}

InputEncoder InputEncoder::fit(const Dataset& train) {
  std::vector<Field> fields;
  for (std::size_t j = 0; j < train.n_predictors(); ++j) {
    const Column& c = train.schema().predictor(j);
    Field f;
    if (c.is_categorical() && c.min_level >= 0) {
      f.kind = Kind::Bits;
      f.width = bit_width_for(c.max_level);
    } else if (c.integer_valued && c.lower >= 0.0 && std::isfinite(c.upper)) {
      f.kind = Kind::Bits;
      f.width = bit_width_for(static_cast<long long>(c.upper));
    } else {
      f.kind = Kind::Scaled;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (double v : train.column(j)) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(lo <= hi)) lo = hi = 0.0;
      f.lo = lo;
      f.hi = hi;
    }
    fields.push_back(f);
  }
  return from_fields(std::move(fields));
}

namespace {

std::size_t encode_value(const InputEncoder::Field& f, double v, double* out) {
  std::fill(out, out + f.width, 0.0);
  if (std::isnan(v)) return 0;
  if (f.kind == InputEncoder::Kind::Bits) {
    const auto code = static_cast<unsigned long long>(std::max(0.0, v));
    for (std::size_t b = 0; b < f.width; ++b) out[b] = static_cast<double>((code >> (f.width - 1 - b)) & 1ULL);
    return 0;
  }
  if (f.hi <= f.lo) return (v != f.lo) ? 1 : 0;
  double s = (v - f.lo) / (f.hi - f.lo);
  std::size_t clamped = 0;
  if (s < 0.0 || s > 1.0) {
    s = std::clamp(s, 0.0, 1.0);
    clamped = 1;
  }
  out[0] = s;
  return clamped;
}

}  // namespace

std::size_t InputEncoder::encode(std::span<const double> row, std::span<double> out) const {
  if (row.size() != fields_.size() || out.size() != width_) {
    throw Error(ErrorCategory::Schema, "row width does not match the encoder");
  }
  std::size_t clamped = 0;
  for (std::size_t j = 0; j < fields_.size(); ++j) {
    clamped += encode_value(fields_[j], row[j], out.data() + fields_[j].offset);
  }
  return clamped;
}

std::size_t InputEncoder::encode(const Dataset& data, std::size_t row, std::span<double> out) const {
  if (data.n_predictors() != fields_.size() || out.size() != width_) {
    throw Error(ErrorCategory::Schema, "dataset width does not match the encoder");
  }
  std::size_t clamped = 0;
  for (std::size_t j = 0; j < fields_.size(); ++j) {
    clamped += encode_value(fields_[j], data.at(row, j), out.data() + fields_[j].offset);
  }
  return clamped;
}

std::vector<double> InputEncoder::encode_all(const Dataset& data, std::size_t* clamped) const {
  std::vector<double> out(data.rows() * width_);
  std::size_t total = 0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    total += encode(data, r, std::span<double>(out.data() + r * width_, width_));
  }
  if (clamped) *clamped += total;
  return out;
}

// ---------------------------------------------------------------------------
// Network

void MLPConfig::validate() const {
  if (hidden.empty()) throw Error(ErrorCategory::Config, "need at least one hidden layer");
  for (auto h : hidden) {
    if (h < 1) throw Error(ErrorCategory::Config, "hidden layer sizes must be >= 1");
  }
  if (dropout.size() != hidden.size()) {
    throw Error(ErrorCategory::Config, "need one dropout probability per hidden layer");
  }
  for (double p : dropout) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCategory::Config, "dropout must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCategory::Config, "learning rate must be > 0");
  if (!(decay >= 0.0 && decay < 1.0)) throw Error(ErrorCategory::Config, "decay must lie in [0, 1)");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCategory::Config, "momentum must lie in [0, 1)");
  if (batch_size < 1) throw Error(ErrorCategory::Config, "batch size must be >= 1");
}

std::size_t MLP::parameter_count(std::span<const std::size_t> s) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < s.size(); ++l) n += s[l + 1] * s[l] + s[l + 1];
  return n;
}

std::size_t MLP::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return off;
}

std::size_t MLP::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + sizes[layer + 1] * sizes[layer];
}

namespace {

using Matrix = Eigen::MatrixXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutRowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorMap weights(const MLP& m, std::size_t l) {
  return RowMajorMap(m.params.data() + m.weight_offset(l), static_cast<Eigen::Index>(m.sizes[l + 1]),
                     static_cast<Eigen::Index>(m.sizes[l]));
}

Eigen::Map<const Eigen::VectorXd> biases(const MLP& m, std::size_t l) {
  return Eigen::Map<const Eigen::VectorXd>(m.params.data() + m.bias_offset(l),
                                           static_cast<Eigen::Index>(m.sizes[l + 1]));
}

Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

/// Inputs are columns. `masks[l]`, when non-empty, multiplies the input of
/// hidden layer l. Returns the mean squared error against `t`; fills
/// `gradient` when non-null.
double batch_pass(const MLP& m, const Matrix& x, const double* t, const std::vector<Matrix>& masks,
                  std::vector<double>* gradient) {
  const std::size_t L = m.n_layers();
  const auto batch = x.cols();
  std::vector<Matrix> inputs(L);  // post-mask input of each layer
  std::vector<Matrix> acts(L);    // output of each hidden layer
  Matrix a = x;
  for (std::size_t l = 0; l < L; ++l) {
    inputs[l] = (l < masks.size() && masks[l].size() > 0) ? Matrix(a.cwiseProduct(masks[l])) : a;
    Matrix z = weights(m, l) * inputs[l];
    z.colwise() += biases(m, l);
    if (l + 1 < L) {
      acts[l] = sigmoid(z);
      a = acts[l];
    } else {
      a = z;
    }
  }
  double loss = 0.0;
  Matrix dz(1, batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double z = a(0, i);
    const double yhat = std::max(0.0, z);
    const double err = yhat - t[i];
    loss += err * err;
    dz(0, i) = z > 0.0 ? 2.0 * err / static_cast<double>(batch) : 0.0;
  }
  loss /= static_cast<double>(batch);
  if (!gradient) return loss;

  gradient->assign(m.params.size(), 0.0);
  for (std::size_t l = L; l-- > 0;) {
    MutRowMajorMap gw(gradient->data() + m.weight_offset(l), static_cast<Eigen::Index>(m.sizes[l + 1]),
                      static_cast<Eigen::Index>(m.sizes[l]));
    gw = dz * inputs[l].transpose();
    Eigen::Map<Eigen::VectorXd>(gradient->data() + m.bias_offset(l), static_cast<Eigen::Index>(m.sizes[l + 1])) =
        dz.rowwise().sum();
    if (l == 0) break;
    Matrix da = weights(m, l).transpose() * dz;
    if (l < masks.size() && masks[l].size() > 0) da = da.cwiseProduct(masks[l]);
    const Matrix& h = acts[l - 1];
    dz = da.cwiseProduct(h.cwiseProduct((1.0 - h.array()).matrix()));
  }
  return loss;
}

Matrix columns_from_rows(std::span<const double> rows, std::size_t width, std::span<const std::size_t> pick) {
  Matrix x(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(pick.size()));
  for (std::size_t c = 0; c < pick.size(); ++c) {
    for (std::size_t j = 0; j < width; ++j) x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = rows[pick[c] * width + j];
  }
  return x;
}

std::vector<double> forward_all(const MLP& m, std::span<const double> rows) {
  const std::size_t w = m.sizes.front();
  const std::size_t n = w == 0 ? 0 : rows.size() / w;
  std::vector<double> out(n);
  constexpr std::size_t kChunk = 4096;
  std::vector<std::size_t> pick;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t end = std::min(n, start + kChunk);
    pick.resize(end - start);
    std::iota(pick.begin(), pick.end(), start);
    Matrix a = columns_from_rows(rows, w, pick);
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
      Matrix z = weights(m, l) * a;
      z.colwise() += biases(m, l);
      a = (l + 1 < m.n_layers()) ? sigmoid(z) : z;
    }
    for (std::size_t i = start; i < end; ++i) out[i] = std::max(0.0, a(0, static_cast<Eigen::Index>(i - start)));
  }
  return out;
}

double rmse_scaled(const std::vector<double>& scaled_pred, double scale, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = scale * scaled_pred[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(y.size()));
}

}  // namespace

double MLP::forward(std::span<const double> encoded) const {
  if (encoded.size() != sizes.front()) throw Error(ErrorCategory::Schema, "encoded input has the wrong width");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(encoded.data(), static_cast<Eigen::Index>(encoded.size()));
  for (std::size_t l = 0; l < n_layers(); ++l) {
    Eigen::VectorXd z = weights(*this, l) * a + biases(*this, l);
    a = (l + 1 < n_layers()) ? Eigen::VectorXd(sigmoid(z)) : z;
  }
  return std::max(0.0, a(0));
}

double MLP::predict(const Dataset& data, std::size_t row) const {
  std::vector<double> x(encoder.width());
  encoder.encode(data, row, x);
  return target_scale * forward(x);
}

std::vector<double> MLP::predict_all(const Dataset& data, std::size_t* clamped) const {
  const auto rows = encoder.encode_all(data, clamped);
  auto out = forward_all(*this, rows);
  for (auto& v : out) v *= target_scale;
  return out;
}

std::vector<double> initialize_parameters(std::span<const std::size_t> sizes, std::uint64_t seed,
                                          double output_bias) {
  std::vector<double> params;
  params.reserve(MLP::parameter_count(sizes));
  Rng rng = make_rng(seed, "mlp-init");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, sizes[l])));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < sizes[l + 1] * sizes[l]; ++i) params.push_back(u(rng));
    for (std::size_t i = 0; i < sizes[l + 1]; ++i) params.push_back(0.0);
  }
  params.back() = output_bias;
  return params;
}

double mlp_loss(const MLP& model, std::span<const double> inputs, std::span<const double> scaled_targets,
                std::vector<double>* gradient) {
  const std::size_t w = model.sizes.front();
  if (scaled_targets.empty() || inputs.size() != scaled_targets.size() * w) {
    throw Error(ErrorCategory::Usage, "inputs and targets are not aligned");
  }
  std::vector<std::size_t> pick(scaled_targets.size());
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  return batch_pass(model, columns_from_rows(inputs, w, pick), scaled_targets.data(), {}, gradient);
}

MLP fit_mlp(const Dataset& train, std::span<const double> targets, const MLPConfig& config,
            const Dataset* validation) {
  config.validate();
  if (train.empty()) throw Error(ErrorCategory::Usage, "cannot fit a network on an empty dataset");
  if (targets.size() != train.rows()) throw Error(ErrorCategory::Usage, "targets not aligned with rows");
  for (double y : targets) {
    if (!(y >= 0.0)) throw Error(ErrorCategory::Range, "network targets must be finite and >= 0");
  }
  if (validation && !(validation->schema() == train.schema())) {
    throw Error(ErrorCategory::Schema, "validation schema differs from training schema");
  }

  MLP model;
  model.encoder = InputEncoder::fit(train);
  model.sizes.push_back(model.encoder.width());
  for (auto h : config.hidden) model.sizes.push_back(h);
  model.sizes.push_back(1);

  const std::size_t n = train.rows();
  double mean = 0.0;
  for (double y : targets) mean += y;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double y : targets) var += (y - mean) * (y - mean);
  model.target_scale = std::max(1.0, std::sqrt(var / static_cast<double>(n)));
  model.params = initialize_parameters(model.sizes, config.seed, mean / model.target_scale);

  const std::size_t w = model.encoder.width();
  const auto x_train = model.encoder.encode_all(train);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = targets[i] / model.target_scale;
  std::vector<double> x_valid;
  if (validation) x_valid = model.encoder.encode_all(*validation);

  std::vector<double> best_params = model.params;
  double best_valid = std::numeric_limits<double>::infinity();
  if (validation) best_valid = rmse_scaled(forward_all(model, x_valid), model.target_scale, validation->target());

  std::vector<double> velocity(model.params.size(), 0.0);
  std::vector<double> grad;
  std::vector<std::size_t> order(n);
  std::vector<double> tb;
  std::vector<Matrix> masks(config.hidden.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = make_rng(config.seed, "mlp-epoch", epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.learning_rate * std::pow(1.0 - config.decay, static_cast<double>(epoch));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> pick(order.data() + start, end - start);
      const Matrix xb = columns_from_rows(x_train, w, pick);
      tb.resize(pick.size());
      for (std::size_t i = 0; i < pick.size(); ++i) tb[i] = t[pick[i]];
      for (std::size_t l = 0; l < config.hidden.size(); ++l) {
        const double p = config.dropout[l];
        if (p == 0.0) {
          masks[l].resize(0, 0);
          continue;
        }
        masks[l].resize(static_cast<Eigen::Index>(model.sizes[l]), static_cast<Eigen::Index>(pick.size()));
        const double keep_scale = 1.0 / (1.0 - p);
        for (Eigen::Index c = 0; c < masks[l].cols(); ++c) {
          for (Eigen::Index r = 0; r < masks[l].rows(); ++r) masks[l](r, c) = unit(rng) < p ? 0.0 : keep_scale;
        }
      }
      const double loss = batch_pass(model, xb, tb.data(), masks, &grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCategory::Numeric, "training loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                                "; lower the learning rate or momentum");
      }
      for (std::size_t k = 0; k < velocity.size(); ++k) {
        velocity[k] = config.momentum * velocity[k] - lr * grad[k];
        model.params[k] += velocity[k];
      }
    }

    const double train_rmse = rmse_scaled(forward_all(model, x_train), model.target_scale, targets);
    if (!std::isfinite(train_rmse)) {
      throw Error(ErrorCategory::Numeric, "training loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                              "; lower the learning rate or momentum");
    }
    model.history.train_rmse.push_back(train_rmse);
    if (validation) {
      const double v = rmse_scaled(forward_all(model, x_valid), model.target_scale, validation->target());
      model.history.valid_rmse.push_back(v);
      if (v < best_valid) {
        best_valid = v;
        best_params = model.params;
        model.best_epoch = epoch + 1;
      }
    }
  }
  if (validation) {
    model.params = std::move(best_params);
  } else {
    model.best_epoch = config.epochs;
  }
  return model;
}

}  // namespace ridehail
