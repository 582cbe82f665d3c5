#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lance/concept_space.hpp"
#include "lance/numerics.hpp"

namespace lance {

inline constexpr const char* kDefaultTemplate = "a {domain} of a {class}";
inline constexpr const char* kDefaultTrainDescriptor = "photo";

std::string render_prompt(const std::string& prompt_template, const std::string& domain_descriptor,
                          const std::string& class_name);

/// Prompt embeddings for every (descriptor, class) pair plus the training
/// descriptor, which sits at descriptor index n_descriptors().
struct PromptEmbeddingTensor {
  std::string prompt_template = kDefaultTemplate;
  std::string train_descriptor = kDefaultTrainDescriptor;
  std::vector<std::string> descriptors;
  std::vector<std::string> class_names;
  Matrix embeddings;

  std::size_t n_descriptors() const noexcept { return descriptors.size(); }
  std::size_t n_classes() const noexcept { return class_names.size(); }
  std::size_t row_of(std::size_t descriptor, std::size_t cls) const noexcept {
    return descriptor * class_names.size() + cls;
  }
  std::pair<std::size_t, std::size_t> decode(std::size_t row) const noexcept {
    return {row / class_names.size(), row % class_names.size()};
  }
  std::span<const float> prompt(std::size_t descriptor, std::size_t cls) const {
    return embeddings.row(row_of(descriptor, cls));
  }
  std::span<const float> train_prompt(std::size_t cls) const { return prompt(n_descriptors(), cls); }

  /// Checks shapes and re-normalizes rows in place.
  void validate_and_normalize();

  /// Keeps only the listed descriptors (in that order), plus the train rows.
  PromptEmbeddingTensor subset(const std::vector<std::size_t>& descriptor_indices) const;
};

// array file + sidecar JSON (template, train_descriptor, descriptors, class_names)
PromptEmbeddingTensor load_prompt_tensor(const std::filesystem::path& array_path,
                                         const std::filesystem::path& sidecar_path);
void save_prompt_tensor(const PromptEmbeddingTensor& prompts, const std::filesystem::path& array_path,
                        const std::filesystem::path& sidecar_path);
std::string prompt_sidecar_json(const PromptEmbeddingTensor& prompts);

struct DomainShiftTensor {
  Matrix shifts;  // N_p*N_y x d, not re-normalized
  std::size_t n_descriptors = 0;
  std::size_t n_classes = 0;
  std::vector<std::size_t> degenerate_rows;
};

inline constexpr double kDegenerateShiftNorm = 1e-6;

DomainShiftTensor compute_domain_shifts(const PromptEmbeddingTensor& prompts);

struct SimulatedActivations {
  Matrix values;  // N_p*N_y x M
};

/// Default ceiling on the materialized N_p*N_y*M table, in bytes.
inline constexpr std::size_t kDefaultSimulatedBytesCap = std::size_t{1} << 30;

SimulatedActivations simulate_domain_specific_activations(
    const DomainShiftTensor& shifts, const ConceptBank& bank,
    std::size_t memory_cap_bytes = kDefaultSimulatedBytesCap);

struct ConceptScore {
  std::size_t concept_index = 0;
  std::string name;
  double score = 0.0;
};

/// Concepts ranked by dot(concept, shift), descending, ties by index.
std::vector<ConceptScore> domain_relevance_scores(const ConceptBank& bank, std::span<const float> shift_row);

/// Mean of target rows minus mean of source rows.
std::vector<float> class_domain_gap(const Matrix& src_images, const Matrix& tgt_images);

}  // namespace lance
