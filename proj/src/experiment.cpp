#include "lance/experiment.hpp"

#include "lance/error.hpp"

namespace lance {

ExperimentData::ExperimentData(DatasetManifest m, ConceptBank b, const Matrix& images,
                               std::optional<PromptEmbeddingTensor> p)
    : manifest(std::move(m)), bank(std::move(b)), prompts(std::move(p)) {
  manifest.validate(images.rows());
  if (images.cols() != bank.dim()) {
    throw ShapeError("image dimension " + std::to_string(images.cols()) + " != concept dimension " +
                     std::to_string(bank.dim()));
  }
  if (prompts) {
    if (prompts->embeddings.cols() != bank.dim()) {
      throw ShapeError("prompt dimension " + std::to_string(prompts->embeddings.cols()) +
                       " != concept dimension " + std::to_string(bank.dim()));
    }
    if (prompts->class_names != manifest.class_names) {
      throw ShapeError("prompt tensor class order differs from manifest class_names");
    }
  }
  activations = concept_activations(images, bank).values;
  for (const auto& item : manifest.items) {
    if (item.domain != manifest.train_domain) continue;
    train_rows.push_back(item.embedding_row);
    train_labels.push_back(item.label);
  }
}

SimulatedActivations ExperimentData::simulated(const std::optional<std::vector<std::size_t>>& descriptors,
                                               std::size_t memory_cap_bytes) const {
  if (!prompts) return {Matrix(0, bank.size())};
  if (!descriptors) {
    return simulate_domain_specific_activations(compute_domain_shifts(*prompts), bank, memory_cap_bytes);
  }
  return simulate_domain_specific_activations(compute_domain_shifts(prompts->subset(*descriptors)), bank,
                                              memory_cap_bytes);
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  using namespace dataset_files;
  return {dir / kImages, dir / kManifest, dir / kConcepts, dir / kConceptEmbeddings, dir / kPrompts,
          dir / kPromptSidecar};
}

ExperimentData load_experiment(const DatasetPaths& paths, bool require_prompts) {
  auto manifest = load_manifest(paths.manifest);
  const Matrix images = read_array_file(paths.images);
  const TextBank names = load_text_bank(paths.concepts);
  if (names.duplicates_dropped > 0) {
    throw ShapeError(paths.concepts.string() + ": duplicate concept lines break row alignment");
  }
  ConceptBank bank = build_concept_bank(names, read_array_file(paths.concept_embeddings));
  std::optional<PromptEmbeddingTensor> prompts;
  if (require_prompts || std::filesystem::exists(paths.prompts)) {
    prompts = load_prompt_tensor(paths.prompts, paths.prompt_sidecar);
  }
  return ExperimentData(std::move(manifest), std::move(bank), images, std::move(prompts));
}

RunOutcome run_experiment(const ExperimentData& data, const SimulatedActivations& sim, const TrainConfig& config) {
  RunOutcome out{train(data.train_activations(), data.train_labels, sim, config, data.manifest.class_names,
                       data.bank.names()),
                 {}};
  out.report = evaluate(out.trained.classifier, data.activations, data.manifest);
  return out;
}

}  // namespace lance
