#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "lance/concept_space.hpp"
#include "lance/domain_shift.hpp"
#include "lance/embedding_io.hpp"
#include "lance/evaluation.hpp"
#include "lance/training.hpp"

namespace lance {

// file names inside a dataset directory
namespace dataset_files {
inline constexpr const char* kImages = "images.npy";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kConcepts = "concepts.txt";
inline constexpr const char* kConceptEmbeddings = "concepts.npy";
inline constexpr const char* kDescriptors = "descriptors.txt";
inline constexpr const char* kPrompts = "prompts.npy";
inline constexpr const char* kPromptSidecar = "prompts.json";
}  // namespace dataset_files

/// Everything one training/evaluation run needs, already in activation space.
struct ExperimentData {
  DatasetManifest manifest;
  ConceptBank bank;
  Matrix activations;                     // one row per embedding row
  std::optional<PromptEmbeddingTensor> prompts;

  std::vector<std::size_t> train_rows;    // embedding rows in the train domain
  std::vector<std::size_t> train_labels;

  ExperimentData(DatasetManifest m, ConceptBank b, const Matrix& images,
                 std::optional<PromptEmbeddingTensor> p);

  Matrix train_activations() const { return activations.select_rows(train_rows); }
  std::size_t n_descriptors() const { return prompts ? prompts->n_descriptors() : 0; }

  /// Simulated activations for the chosen descriptors (all when nullopt).
  SimulatedActivations simulated(const std::optional<std::vector<std::size_t>>& descriptors = std::nullopt,
                                 std::size_t memory_cap_bytes = kDefaultSimulatedBytesCap) const;
};

struct DatasetPaths {
  std::filesystem::path images, manifest, concepts, concept_embeddings, prompts, prompt_sidecar;
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

ExperimentData load_experiment(const DatasetPaths& paths, bool require_prompts);

struct RunOutcome {
  TrainResult trained;
  DomainReport report;
};

RunOutcome run_experiment(const ExperimentData& data, const SimulatedActivations& sim, const TrainConfig& config);

}  // namespace lance
