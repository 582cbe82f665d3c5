#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lance/embedding_io.hpp"
#include "lance/training.hpp"

namespace lance {

/// Argmax of the logits per row, lowest class index on ties.
std::vector<std::size_t> predict(const Classifier& classifier, const Matrix& activations);

struct DomainAccuracy {
  std::size_t n_items = 0;
  std::size_t n_correct = 0;
  double top1_accuracy = 0.0;
};

struct DomainReport {
  std::map<std::string, DomainAccuracy> per_domain;  // domains with items only
  std::vector<std::string> domain_order;             // manifest order, evaluated domains only
  std::string train_domain;
  double id_accuracy = 0.0;
  double ood_accuracy = 0.0;
  std::size_t n_ood_domains = 0;
  std::vector<std::string> warnings;
};

/// Rows of `activations` are addressed through each item's embedding_row.
DomainReport evaluate(const Classifier& classifier, const Matrix& activations, const DatasetManifest& manifest);

struct RankedConcept {
  std::size_t concept_index = 0;
  std::string name;
  double weight = 0.0;
};

struct ClassAttribution {
  std::string class_name;
  std::vector<RankedConcept> concepts;
};

struct AttributionReport {
  std::vector<ClassAttribution> per_class;
};

/// Concepts ranked by signed effective weight, descending, ties by index.
AttributionReport top_k_concepts(const Classifier& classifier, std::size_t k);

inline constexpr std::size_t kDefaultJsBins = 50;
inline constexpr double kJsSmoothing = 1e-10;
inline constexpr const char* kJsRecipe = "shared-range-uniform-bins/eps=1e-10/natural-log/v1";

double js_divergence(std::span<const float> a, std::span<const float> b, std::size_t n_bins = kDefaultJsBins);

nlohmann::json to_json(const DomainReport& r);
nlohmann::json to_json(const AttributionReport& r);
std::string to_tsv(const DomainReport& r);
std::string to_tsv(const AttributionReport& r);

}  // namespace lance
