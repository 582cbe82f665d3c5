#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lance/experiment.hpp"

namespace lance {

inline constexpr std::size_t kDefaultAblationRepeats = 5;

struct CountPoint {
  std::size_t n_descriptors = 0;
  std::vector<double> id;   // one per random subset
  std::vector<double> ood;
  double id_mean = 0.0, id_sd = 0.0;
  double ood_mean = 0.0, ood_sd = 0.0;
};

struct CountSweep {
  std::vector<CountPoint> points;
  double spearman_count_vs_ood = 0.0;
  nlohmann::json to_json() const;
  std::string to_tsv() const;
};

/// Random descriptor subsets of each size in `grid` (0 = baseline run).
/// Subset r of point i is drawn with sub-seed derive_seed(seed, i * repeats + r).
CountSweep sweep_descriptor_counts(const ExperimentData& data, const std::vector<std::size_t>& grid,
                                   std::size_t repeats, const TrainConfig& config, std::uint64_t seed);

/// Indices of descriptors containing none of the keywords (case-insensitive).
std::vector<std::size_t> descriptors_without_keywords(const std::vector<std::string>& descriptors,
                                                      const std::vector<std::string>& keywords);

struct SubsetComparison {
  DomainReport baseline;  // lambda = 0
  DomainReport full;
  DomainReport subset;
  std::vector<std::size_t> kept;
  double delta_ood_full = 0.0;
  double delta_ood_subset = 0.0;
  double delta_id_full = 0.0;
  double delta_id_subset = 0.0;
  nlohmann::json to_json(const std::vector<std::string>& descriptor_names) const;
  std::string to_tsv() const;
};

SubsetComparison compare_descriptor_subset(const ExperimentData& data, const std::vector<std::size_t>& kept,
                                           const TrainConfig& config);

/// Rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lance
