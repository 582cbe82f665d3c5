#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lance/domain_shift.hpp"
#include "lance/numerics.hpp"

namespace lance {

/// Final linear layer over concept activations, optionally preceded by a
/// linear hidden layer. The regularizer always sees the product of the two.
struct Classifier {
  std::vector<std::string> class_names;
  std::vector<std::string> concept_names;
  Matrix weights;                    // N_y x M, or N_y x H with a hidden layer
  std::optional<std::vector<float>> bias;
  std::optional<Matrix> hidden;      // H x M

  static Classifier zeros(std::vector<std::string> class_names, std::vector<std::string> concept_names,
                          bool with_bias = false);

  std::size_t n_classes() const noexcept { return weights.rows(); }
  std::size_t n_concepts() const noexcept { return hidden ? hidden->cols() : weights.cols(); }

  /// N_y x M map from activations to logits.
  Matrix effective_weights() const;
  Matrix logits(const Matrix& activations) const;
  void validate() const;
};

/// Parameter-shaped gradient.
struct Gradient {
  Matrix weights;
  std::optional<std::vector<float>> bias;
  std::optional<Matrix> hidden;

  static Gradient zeros_like(const Classifier& c);
  void add_scaled(const Gradient& other, double scale);
};

struct LossAndGradient {
  double loss = 0.0;
  Gradient grad;
};

LossAndGradient cross_entropy(const Classifier& classifier, const Matrix& activations,
                              std::span<const std::size_t> labels);

/// How each N_y-vector W_F * a_hat is reduced before averaging over rows.
enum class DdoReduction {
  MeanAbsolute,  // mean of |v_c| over classes (default)
  SumAbsolute,   // sum of |v_c| over classes
  L2Norm,        // Euclidean norm of v
};

std::string to_string(DdoReduction r);
DdoReduction ddo_reduction_from_string(const std::string& s);

LossAndGradient ddo_loss(const Classifier& classifier, const SimulatedActivations& sim,
                         DdoReduction reduction = DdoReduction::MeanAbsolute);

struct LossBreakdown {
  double ce = 0.0;
  double ddo = 0.0;
  double total = 0.0;
  Gradient grad;
};

/// CE + lambda * DDO. With lambda == 0 the regularizer is never evaluated.
LossBreakdown total_loss(const Classifier& classifier, const Matrix& activations,
                         std::span<const std::size_t> labels, const SimulatedActivations& sim,
                         double lambda, DdoReduction reduction = DdoReduction::MeanAbsolute);

struct TrainConfig {
  double lambda = 1.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool use_bias = false;
  std::size_t hidden_units = 0;  // 0 = single linear layer
  DdoReduction reduction = DdoReduction::MeanAbsolute;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  std::size_t epoch = 0;
  double ce = 0.0;     // mean over batches
  double ddo = 0.0;    // at end-of-epoch weights
  double total = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::string to_tsv() const;
};

struct TrainResult {
  Classifier classifier;
  TrainingLog log;
};

/// Mini-batch Adam from zero-initialized final weights. `sim` may be empty.
TrainResult train(const Matrix& activations, std::span<const std::size_t> labels,
                  const SimulatedActivations& sim, const TrainConfig& config,
                  std::vector<std::string> class_names, std::vector<std::string> concept_names);

/// False when the library was built with the regularizer compiled out.
bool ddo_compiled_in() noexcept;

nlohmann::json classifier_to_json(const Classifier& c, const nlohmann::json& config);
Classifier classifier_from_json(const nlohmann::json& j);
void save_model(const Classifier& c, const TrainConfig& config, const std::filesystem::path& path);
Classifier load_model(const std::filesystem::path& path);

}  // namespace lance
