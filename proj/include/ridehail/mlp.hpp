#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ridehail/dataset.hpp"

namespace ridehail {

/// Maps a schema row to network inputs. Categorical and bounded
/// integer-valued predictors become fixed-width binary codes (most
/// significant bit first, width ceil(log2(max + 1))); other predictors are
/// min-max scaled to [0, 1] with the range taken from training data.
/// Missing values encode as all zeros.
class InputEncoder {
 public:
  enum class Kind { Bits, Scaled };
  struct Field {
    Kind kind = Kind::Scaled;
    std::size_t width = 1;
    std::size_t offset = 0;
    double lo = 0.0;  // Scaled only
    double hi = 0.0;

    bool operator==(const Field&) const = default;
  };

  InputEncoder() = default;
  static InputEncoder fit(const Dataset& train);

  std::size_t width() const { return width_; }
  std::span<const Field> fields() const { return fields_; }

  /// Writes width() values; returns how many scaled values were clamped.
  std::size_t encode(std::span<const double> row, std::span<double> out) const;
  std::size_t encode(const Dataset& data, std::size_t row, std::span<double> out) const;
  /// Row-major rows x width() matrix; clamp count added to *clamped.
  std::vector<double> encode_all(const Dataset& data, std::size_t* clamped = nullptr) const;

  static InputEncoder from_fields(std::vector<Field> fields);
  bool operator==(const InputEncoder&) const = default;

 private:
  std::vector<Field> fields_;
  std::size_t width_ = 0;
};

/// Bits needed for nonnegative integer codes up to max_value.
std::size_t bit_width_for(long long max_value);

struct MLPConfig {
  std::vector<std::size_t> hidden = {64, 32};
  std::vector<double> dropout = {0.6, 0.05};  // on the input of each hidden layer
  double learning_rate = 1e-4;
  double decay = 0.01;  // fraction of the rate lost per epoch
  double momentum = 0.9;
  std::size_t batch_size = 150;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MLPHistory {
  std::vector<double> train_rmse;
  std::vector<double> valid_rmse;

  bool operator==(const MLPHistory&) const = default;
};

/// Sigmoid hidden layers and a linear output clipped at zero. Parameters
/// are stored flat, layer by layer: weights (out x in, row-major) then
/// biases. The network works in target units divided by target_scale.
struct MLP {
  InputEncoder encoder;
  std::vector<std::size_t> sizes;  // input width, hidden sizes..., 1
  std::vector<double> params;
  double target_scale = 1.0;
  MLPHistory history;
  std::size_t best_epoch = 0;  // 0 = initialization

  std::size_t n_layers() const { return sizes.size() - 1; }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  static std::size_t parameter_count(std::span<const std::size_t> sizes);

  /// Network output in scaled units for an encoded input.
  double forward(std::span<const double> encoded) const;
  double predict(const Dataset& data, std::size_t row) const;
  std::vector<double> predict_all(const Dataset& data, std::size_t* clamped = nullptr) const;

  bool operator==(const MLP&) const = default;
};

/// Uniform(+-1/sqrt(fan_in)) weights and zero biases, except the output
/// bias, which starts at `output_bias`.
std::vector<double> initialize_parameters(std::span<const std::size_t> sizes, std::uint64_t seed,
                                          double output_bias = 0.0);

/// Mean squared error of the network (no dropout) on encoded rows in scaled
/// target units. When `gradient` is given it receives dLoss/dparams.
double mlp_loss(const MLP& model, std::span<const double> inputs, std::span<const double> scaled_targets,
                std::vector<double>* gradient = nullptr);

/// Mini-batch SGD with momentum, learning-rate decay and inverted dropout.
/// With a validation set, the parameters of the epoch with the lowest
/// validation RMSE are kept. Throws a numeric error if the loss diverges.
MLP fit_mlp(const Dataset& train, std::span<const double> targets, const MLPConfig& config,
            const Dataset* validation = nullptr);

}  // namespace ridehail
