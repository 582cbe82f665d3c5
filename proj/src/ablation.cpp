#include "lance/ablation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lance/error.hpp"

namespace lance {

using nlohmann::json;

namespace {

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

std::vector<std::size_t> sample_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("spearman: length mismatch");
  if (x.size() < 2) return 0.0;
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

CountSweep sweep_descriptor_counts(const ExperimentData& data, const std::vector<std::size_t>& grid,
                                   std::size_t repeats, const TrainConfig& config, std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("repeats must be ≥ 1");
  const std::size_t n_p = data.n_descriptors();
  for (std::size_t g : grid) {
    if (g > n_p) {
      throw ConfigError("grid point " + std::to_string(g) + " exceeds the " + std::to_string(n_p) +
                        " available descriptors");
    }
  }
  CountSweep sweep;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CountPoint pt;
    pt.n_descriptors = grid[i];
    // the full set and the empty set have only one subset each
    const std::size_t reps = (grid[i] == 0 || grid[i] == n_p) ? 1 : repeats;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto subset = sample_subset(n_p, grid[i], derive_seed(seed, i * repeats + r));
      TrainConfig cfg = config;
      if (grid[i] == 0) cfg.lambda = 0.0;
      const auto outcome = run_experiment(data, data.simulated(subset), cfg);
      pt.id.push_back(outcome.report.id_accuracy);
      pt.ood.push_back(outcome.report.ood_accuracy);
    }
    mean_sd(pt.id, pt.id_mean, pt.id_sd);
    mean_sd(pt.ood, pt.ood_mean, pt.ood_sd);
    xs.push_back(static_cast<double>(pt.n_descriptors));
    ys.push_back(pt.ood_mean);
    sweep.points.push_back(std::move(pt));
  }
  sweep.spearman_count_vs_ood = spearman_rho(xs, ys);
  return sweep;
}

json CountSweep::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    pts.push_back({{"n_descriptors", p.n_descriptors},
                   {"id_mean", p.id_mean},
                   {"id_sd", p.id_sd},
                   {"ood_mean", p.ood_mean},
                   {"ood_sd", p.ood_sd},
                   {"id", p.id},
                   {"ood", p.ood}});
  }
  return {{"points", pts}, {"spearman_count_vs_ood", spearman_count_vs_ood}};
}

std::string CountSweep::to_tsv() const {
  std::ostringstream os;
  os.precision(6);
  os << "n_descriptors\trepeats\tid_mean\tid_sd\tood_mean\tood_sd\n";
  for (const auto& p : points) {
    os << p.n_descriptors << '\t' << p.ood.size() << '\t' << p.id_mean << '\t' << p.id_sd << '\t' << p.ood_mean
       << '\t' << p.ood_sd << '\n';
  }
  os << "# spearman_count_vs_ood\t" << spearman_count_vs_ood << '\n';
  return os.str();
}

std::vector<std::size_t> descriptors_without_keywords(const std::vector<std::string>& descriptors,
                                                      const std::vector<std::string>& keywords) {
  std::vector<std::string> keys;
  for (const auto& k : keywords) {
    if (!k.empty()) keys.push_back(lower(k));
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const std::string d = lower(descriptors[i]);
    const bool hit = std::any_of(keys.begin(), keys.end(), [&](const std::string& k) { return d.find(k) != std::string::npos; });
    if (!hit) kept.push_back(i);
  }
  return kept;
}

SubsetComparison compare_descriptor_subset(const ExperimentData& data, const std::vector<std::size_t>& kept,
                                           const TrainConfig& config) {
  SubsetComparison c;
  c.kept = kept;
  TrainConfig base_cfg = config;
  base_cfg.lambda = 0.0;
  const SimulatedActivations full_sim = data.simulated();
  c.baseline = run_experiment(data, full_sim, base_cfg).report;
  c.full = run_experiment(data, full_sim, config).report;
  c.subset = run_experiment(data, data.simulated(kept), config).report;
  c.delta_ood_full = c.full.ood_accuracy - c.baseline.ood_accuracy;
  c.delta_ood_subset = c.subset.ood_accuracy - c.baseline.ood_accuracy;
  c.delta_id_full = c.full.id_accuracy - c.baseline.id_accuracy;
  c.delta_id_subset = c.subset.id_accuracy - c.baseline.id_accuracy;
  return c;
}

json SubsetComparison::to_json(const std::vector<std::string>& descriptor_names) const {
  json kept_names = json::array();
  for (std::size_t i : kept) kept_names.push_back(descriptor_names.at(i));
  return {{"baseline", lance::to_json(baseline)},
          {"full", lance::to_json(full)},
          {"subset", lance::to_json(subset)},
          {"kept_descriptors", kept_names},
          {"delta_ood_full", delta_ood_full},
          {"delta_ood_subset", delta_ood_subset},
          {"delta_id_full", delta_id_full},
          {"delta_id_subset", delta_id_subset}};
}

std::string SubsetComparison::to_tsv() const {
  std::ostringstream os;
  os.precision(6);
  os << "run\tn_descriptors\tid\tood\tdelta_id\tdelta_ood\n";
  os << "baseline\t0\t" << baseline.id_accuracy << '\t' << baseline.ood_accuracy << "\t0\t0\n";
  os << "full\tall\t" << full.id_accuracy << '\t' << full.ood_accuracy << '\t' << delta_id_full << '\t'
     << delta_ood_full << '\n';
  os << "subset\t" << kept.size() << '\t' << subset.id_accuracy << '\t' << subset.ood_accuracy << '\t'
     << delta_id_subset << '\t' << delta_ood_subset << '\n';
  return os.str();
}

}  // namespace lance
