#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lance/experiment.hpp"

namespace lance {

struct SyntheticSpec {
  std::size_t d = 64;
  std::size_t n_classes = 10;
  std::size_t n_shared_concepts = 20;
  std::size_t n_specific_concepts = 20;
  std::vector<std::string> domains{"photo", "sketch", "clipart"};  // first one trains
  std::size_t samples_per_class_per_domain = 50;
  double noise_sigma = 0.05;
  double style_strength = 0.8;        // images
  double text_style_strength = 0.6;   // prompts
  std::uint64_t seed = 0;

  // planted structure
  std::size_t hot_classes_per_domain = 3;
  std::size_t classes_per_shared_concept = 4;
  double shared_class_weight = 0.1;
  double specific_class_weight = 0.3;
  std::size_t relevant_descriptors_per_domain = 6;
  std::size_t irrelevant_descriptors = 16;
  double relevant_descriptor_noise = 0.3;
  double irrelevant_descriptor_noise = 2.0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct GroundTruth {
  std::vector<bool> concept_is_specific;
  std::vector<bool> descriptor_is_relevant;
  std::vector<std::vector<std::size_t>> hot_classes;  // per unseen domain

  std::vector<std::size_t> specific_concepts() const;
  std::vector<std::size_t> shared_concepts() const;
  nlohmann::json to_json() const;
};

struct SyntheticWorld {
  SyntheticSpec spec;
  Matrix images;
  DatasetManifest manifest;
  ConceptBank bank;
  PromptEmbeddingTensor prompts;
  GroundTruth truth;

  ExperimentData experiment() const { return ExperimentData(manifest, bank, images, prompts); }
};

SyntheticWorld generate(const SyntheticSpec& spec);

/// Writes the standard dataset directory plus spec.json and ground_truth.json.
void write_world(const SyntheticWorld& world, const std::filesystem::path& dir);

/// Training settings the synthetic benchmark was calibrated with.
TrainConfig synthetic_train_config(double lambda, std::uint64_t seed = 0);

struct EffectReport {
  DomainReport baseline;
  DomainReport ddo;
  double delta_id = 0.0;
  double delta_ood = 0.0;
  double specific_mass_baseline = 0.0;  // sum of |W| over specific-concept columns
  double specific_mass_ddo = 0.0;
  double shared_mass_baseline = 0.0;
  double shared_mass_ddo = 0.0;
  std::size_t classes_with_specific_in_top5_baseline = 0;
  std::size_t classes_with_specific_in_top5_ddo = 0;
  Classifier baseline_model;
  Classifier ddo_model;

  nlohmann::json to_json() const;
};

EffectReport verify_ddo_effect(const SyntheticWorld& world, const TrainConfig& baseline, const TrainConfig& ddo);
EffectReport verify_ddo_effect(const SyntheticSpec& spec, const TrainConfig& baseline, const TrainConfig& ddo);

struct SpecificityStats {
  double js_specific = 0.0;   // mean over concepts of mean JS(train, unseen domain)
  double js_shared = 0.0;
  double relevance_specific = 0.0;  // mean a_hat entry per concept group
  double relevance_shared = 0.0;
  std::vector<double> js_per_concept;
};

SpecificityStats specificity_stats(const SyntheticWorld& world, std::size_t n_bins = kDefaultJsBins);

}  // namespace lance
