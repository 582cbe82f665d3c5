#include "lance/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "lance/error.hpp"

namespace lance {

using nlohmann::json;

namespace {

using Vec = std::vector<double>;

double vdot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec normalized(Vec v) {
  const double n = std::sqrt(vdot(v, v));
  if (n > 0.0) {
    for (auto& x : v) x /= n;
  }
  return v;
}

void axpy(Vec& dst, double a, const Vec& x) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * x[i];
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double gauss() { return normal_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Vec gauss_vec(std::size_t n) {
    Vec v(n);
    for (auto& x : v) x = gauss();
    return v;
  }
  // k distinct values from [0, n), in draw order
  std::vector<std::size_t> choose(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_() % (n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// k orthonormal directions in R^d by twice-applied Gram-Schmidt on Gaussian draws
std::vector<Vec> orthonormal_basis(Sampler& s, std::size_t d, std::size_t k) {
  std::vector<Vec> basis;
  while (basis.size() < k) {
    Vec v = s.gauss_vec(d);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) axpy(v, -vdot(v, b), b);
    }
    const double n = std::sqrt(vdot(v, v));
    if (n < 1e-8) continue;
    for (auto& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

Matrix to_matrix(const std::vector<Vec>& rows, std::size_t d) {
  Matrix m(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < d; ++k) m(r, k) = static_cast<float>(rows[r][k]);
  }
  return m;
}

}  // namespace

void SyntheticSpec::validate() const {
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw SpecError(msg);
  };
  need(n_classes >= 1 && n_shared_concepts >= 1 && n_specific_concepts >= 1, "counts must be ≥ 1");
  need(!domains.empty(), "at least one domain is required");
  need(samples_per_class_per_domain >= 1, "samples_per_class_per_domain must be ≥ 1");
  need(std::set<std::string>(domains.begin(), domains.end()).size() == domains.size(), "domain names must be unique");
  need(d >= n_classes + domains.size(), "d must be ≥ n_classes + number of domains");
  need(d >= n_classes + n_specific_concepts + 1, "d must be ≥ n_classes + n_specific_concepts + 1");
  need(n_shared_concepts + n_specific_concepts >= 2, "need at least 2 concepts");
  need(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be ≥ 0");
  need(style_strength >= 0.0 && std::isfinite(style_strength), "style_strength must be ≥ 0");
  need(text_style_strength >= 0.0 && std::isfinite(text_style_strength), "text_style_strength must be ≥ 0");
  need(hot_classes_per_domain >= 1, "hot_classes_per_domain must be ≥ 1");
  need(classes_per_shared_concept >= 1, "classes_per_shared_concept must be ≥ 1");
  need(shared_class_weight >= 0.0 && specific_class_weight >= 0.0, "class weights must be ≥ 0");
  need(relevant_descriptor_noise >= 0.0 && irrelevant_descriptor_noise >= 0.0, "descriptor noise must be ≥ 0");
}

json SyntheticSpec::to_json() const {
  return {{"d", d},
          {"n_classes", n_classes},
          {"n_shared_concepts", n_shared_concepts},
          {"n_specific_concepts", n_specific_concepts},
          {"domains", domains},
          {"samples_per_class_per_domain", samples_per_class_per_domain},
          {"noise_sigma", noise_sigma},
          {"style_strength", style_strength},
          {"text_style_strength", text_style_strength},
          {"seed", seed},
          {"hot_classes_per_domain", hot_classes_per_domain},
          {"classes_per_shared_concept", classes_per_shared_concept},
          {"shared_class_weight", shared_class_weight},
          {"specific_class_weight", specific_class_weight},
          {"relevant_descriptors_per_domain", relevant_descriptors_per_domain},
          {"irrelevant_descriptors", irrelevant_descriptors},
          {"relevant_descriptor_noise", relevant_descriptor_noise},
          {"irrelevant_descriptor_noise", irrelevant_descriptor_noise}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  try {
#define LANCE_FIELD(name) s.name = j.value(#name, s.name)
    LANCE_FIELD(d);
    LANCE_FIELD(n_classes);
    LANCE_FIELD(n_shared_concepts);
    LANCE_FIELD(n_specific_concepts);
    LANCE_FIELD(domains);
    LANCE_FIELD(samples_per_class_per_domain);
    LANCE_FIELD(noise_sigma);
    LANCE_FIELD(style_strength);
    LANCE_FIELD(text_style_strength);
    LANCE_FIELD(seed);
    LANCE_FIELD(hot_classes_per_domain);
    LANCE_FIELD(classes_per_shared_concept);
    LANCE_FIELD(shared_class_weight);
    LANCE_FIELD(specific_class_weight);
    LANCE_FIELD(relevant_descriptors_per_domain);
    LANCE_FIELD(irrelevant_descriptors);
    LANCE_FIELD(relevant_descriptor_noise);
    LANCE_FIELD(irrelevant_descriptor_noise);
#undef LANCE_FIELD
  } catch (const json::exception& e) {
    throw SpecError(e.what());
  }
  return s;
}

std::vector<std::size_t> GroundTruth::specific_concepts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < concept_is_specific.size(); ++i) {
    if (concept_is_specific[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> GroundTruth::shared_concepts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < concept_is_specific.size(); ++i) {
    if (!concept_is_specific[i]) out.push_back(i);
  }
  return out;
}

json GroundTruth::to_json() const {
  json kinds = json::array();
  for (bool s : concept_is_specific) kinds.push_back(s ? "specific" : "shared");
  return {{"concept_kinds", kinds}, {"descriptor_relevant", descriptor_is_relevant}, {"hot_classes", hot_classes}};
}

SyntheticWorld generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.d;
  const std::size_t n_cls = spec.n_classes;
  const std::size_t n_sp = spec.n_specific_concepts;
  const std::size_t n_dom = spec.domains.size();
  Sampler rng(spec.seed);

  // class directions, one style atom per specific concept, one generic direction
  const auto basis = orthonormal_basis(rng, d, n_cls + n_sp + 1);
  const std::vector<Vec> mu(basis.begin(), basis.begin() + static_cast<std::ptrdiff_t>(n_cls));
  const std::vector<Vec> atoms(basis.begin() + static_cast<std::ptrdiff_t>(n_cls),
                               basis.begin() + static_cast<std::ptrdiff_t>(n_cls + n_sp));
  const Vec& generic = basis.back();
  const auto owner = [n_cls](std::size_t atom) { return atom % n_cls; };

  GroundTruth truth;
  std::vector<Vec> styles{Vec(d, 0.0)};
  const std::size_t owning_classes = std::min(n_cls, n_sp);
  const std::size_t n_hot = std::min(spec.hot_classes_per_domain, owning_classes);
  for (std::size_t dom = 1; dom < n_dom; ++dom) {
    auto hot = rng.choose(owning_classes, n_hot);
    Vec style(d, 0.0);
    for (std::size_t c : hot) {
      for (std::size_t j = 0; j < n_sp; ++j) {
        if (owner(j) == c) axpy(style, rng.uniform(0.8, 1.2), atoms[j]);
      }
    }
    truth.hot_classes.push_back(hot);
    styles.push_back(normalized(style));
  }

  std::vector<Vec> image_rows;
  for (std::size_t dom = 0; dom < n_dom; ++dom) {
    for (std::size_t y = 0; y < n_cls; ++y) {
      for (std::size_t s = 0; s < spec.samples_per_class_per_domain; ++s) {
        Vec x = mu[y];
        axpy(x, spec.style_strength, styles[dom]);
        for (auto& v : x) v += spec.noise_sigma * rng.gauss();
        image_rows.push_back(normalized(std::move(x)));
      }
    }
  }
  Matrix images = l2_normalize_rows(to_matrix(image_rows, d)).matrix;

  DatasetManifest manifest;
  for (std::size_t y = 0; y < n_cls; ++y) manifest.class_names.push_back(numbered("class_", y, 2));
  manifest.domain_names = spec.domains;
  manifest.train_domain = spec.domains.front();
  std::size_t row = 0;
  for (std::size_t dom = 0; dom < n_dom; ++dom) {
    for (std::size_t y = 0; y < n_cls; ++y) {
      for (std::size_t s = 0; s < spec.samples_per_class_per_domain; ++s, ++row) {
        manifest.items.push_back({spec.domains[dom] + "/" + manifest.class_names[y] + "/" + numbered("", s, 4),
                                    row, y, spec.domains[dom]});
      }
    }
  }

  std::vector<Vec> concept_rows;
  std::vector<std::string> concept_names;
  for (std::size_t j = 0; j < spec.n_shared_concepts; ++j) {
    Vec mix(d, 0.0);
    for (std::size_t i = 0; i < std::min(spec.classes_per_shared_concept, n_cls); ++i) {
      axpy(mix, rng.uniform(0.5, 1.0), mu[(j + i) % n_cls]);
    }
    Vec c = normalized(std::move(mix));
    for (auto& v : c) v *= spec.shared_class_weight;
    axpy(c, 1.0, generic);
    concept_rows.push_back(normalized(std::move(c)));
    concept_names.push_back(numbered("shared_", j, 2));
    truth.concept_is_specific.push_back(false);
  }
  for (std::size_t j = 0; j < n_sp; ++j) {
    Vec c = atoms[j];
    axpy(c, spec.specific_class_weight, mu[owner(j)]);
    concept_rows.push_back(normalized(std::move(c)));
    concept_names.push_back(numbered("specific_", j, 2));
    truth.concept_is_specific.push_back(true);
  }
  ConceptBank bank(concept_names, to_matrix(concept_rows, d));

  // descriptor style directions: noisy copies of the unseen-domain styles
  const auto atom_noise = [&]() {
    const Vec z = normalized(rng.gauss_vec(n_sp));
    Vec v(d, 0.0);
    for (std::size_t j = 0; j < n_sp; ++j) axpy(v, z[j], atoms[j]);
    return v;
  };
  std::vector<Vec> descriptor_styles;
  PromptEmbeddingTensor prompts;
  if (n_dom > 1) {
    for (std::size_t dom = 1; dom < n_dom; ++dom) {
      for (std::size_t r = 0; r < spec.relevant_descriptors_per_domain; ++r) {
        Vec s = styles[dom];
        axpy(s, spec.relevant_descriptor_noise, atom_noise());
        descriptor_styles.push_back(normalized(std::move(s)));
        prompts.descriptors.push_back(spec.domains[dom] + " rendering " + std::to_string(r + 1));
        truth.descriptor_is_relevant.push_back(true);
      }
    }
    for (std::size_t r = 0; r < spec.irrelevant_descriptors; ++r) {
      Vec s = styles[1 + r % (n_dom - 1)];
      axpy(s, spec.irrelevant_descriptor_noise, atom_noise());
      descriptor_styles.push_back(normalized(std::move(s)));
      prompts.descriptors.push_back("generic look " + std::to_string(r + 1));
      truth.descriptor_is_relevant.push_back(false);
    }
  }
  prompts.class_names = manifest.class_names;
  prompts.train_descriptor = spec.domains.front();
  std::vector<Vec> prompt_rows;
  for (const auto& s : descriptor_styles) {
    for (std::size_t y = 0; y < n_cls; ++y) {
      Vec p = mu[y];
      axpy(p, spec.text_style_strength, s);
      prompt_rows.push_back(normalized(std::move(p)));
    }
  }
  for (std::size_t y = 0; y < n_cls; ++y) prompt_rows.push_back(mu[y]);
  prompts.embeddings = to_matrix(prompt_rows, d);
  prompts.validate_and_normalize();

  return SyntheticWorld{spec, std::move(images), std::move(manifest), std::move(bank), std::move(prompts),
                        std::move(truth)};
}

void write_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  using namespace dataset_files;
  std::filesystem::create_directories(dir);
  write_array_file(world.images, dir / kImages);
  save_manifest(world.manifest, dir / kManifest);
  write_text_bank(world.bank.names(), dir / kConcepts);
  write_array_file(world.bank.embeddings(), dir / kConceptEmbeddings);
  if (!world.prompts.descriptors.empty()) write_text_bank(world.prompts.descriptors, dir / kDescriptors);
  save_prompt_tensor(world.prompts, dir / kPrompts, dir / kPromptSidecar);
  write_file(dir / "spec.json", world.spec.to_json().dump(1) + "\n");
  write_file(dir / "ground_truth.json", world.truth.to_json().dump(1) + "\n");
}

TrainConfig synthetic_train_config(double lambda, std::uint64_t seed) {
  TrainConfig c;
  c.lambda = lambda;
  c.epochs = 500;
  c.batch_size = 64;
  c.adam.lr = 0.03;
  c.seed = seed;
  return c;
}

namespace {

std::size_t classes_with_specific_in_top5(const Classifier& c, const GroundTruth& truth) {
  const std::size_t k = std::min<std::size_t>(5, c.n_concepts());
  const auto report = top_k_concepts(c, k);
  std::size_t count = 0;
  for (const auto& cls : report.per_class) {
    const bool hit = std::any_of(cls.concepts.begin(), cls.concepts.end(),
                                 [&](const RankedConcept& rc) { return truth.concept_is_specific[rc.concept_index]; });
    if (hit) ++count;
  }
  return count;
}

void column_mass(const Classifier& c, const GroundTruth& truth, double& specific, double& shared) {
  const Matrix w = c.effective_weights();
  specific = shared = 0.0;
  for (std::size_t y = 0; y < w.rows(); ++y) {
    for (std::size_t m = 0; m < w.cols(); ++m) {
      (truth.concept_is_specific[m] ? specific : shared) += std::abs(static_cast<double>(w(y, m)));
    }
  }
}

}  // namespace

EffectReport verify_ddo_effect(const SyntheticWorld& world, const TrainConfig& baseline, const TrainConfig& ddo) {
  json a = baseline.to_json(), b = ddo.to_json();
  a.erase("lambda");
  b.erase("lambda");
  if (a != b) throw ConfigError("paired configs may differ only in lambda");
  const ExperimentData data = world.experiment();
  const SimulatedActivations sim = data.simulated();
  auto base_run = run_experiment(data, sim, baseline);
  auto ddo_run = run_experiment(data, sim, ddo);
  EffectReport r;
  r.baseline = base_run.report;
  r.ddo = ddo_run.report;
  r.delta_id = r.ddo.id_accuracy - r.baseline.id_accuracy;
  r.delta_ood = r.ddo.ood_accuracy - r.baseline.ood_accuracy;
  r.baseline_model = std::move(base_run.trained.classifier);
  r.ddo_model = std::move(ddo_run.trained.classifier);
  column_mass(r.baseline_model, world.truth, r.specific_mass_baseline, r.shared_mass_baseline);
  column_mass(r.ddo_model, world.truth, r.specific_mass_ddo, r.shared_mass_ddo);
  r.classes_with_specific_in_top5_baseline = classes_with_specific_in_top5(r.baseline_model, world.truth);
  r.classes_with_specific_in_top5_ddo = classes_with_specific_in_top5(r.ddo_model, world.truth);
  return r;
}

EffectReport verify_ddo_effect(const SyntheticSpec& spec, const TrainConfig& baseline, const TrainConfig& ddo) {
  return verify_ddo_effect(generate(spec), baseline, ddo);
}

json EffectReport::to_json() const {
  const double ratio = specific_mass_baseline > 0.0 ? specific_mass_ddo / specific_mass_baseline : 0.0;
  return {{"baseline", lance::to_json(baseline)},
          {"ddo", lance::to_json(ddo)},
          {"delta_id", delta_id},
          {"delta_ood", delta_ood},
          {"specific_weight_mass", {{"baseline", specific_mass_baseline}, {"ddo", specific_mass_ddo}, {"ratio", ratio}}},
          {"shared_weight_mass", {{"baseline", shared_mass_baseline}, {"ddo", shared_mass_ddo}}},
          {"classes_with_specific_in_top5",
           {{"baseline", classes_with_specific_in_top5_baseline}, {"ddo", classes_with_specific_in_top5_ddo}}}};
}

SpecificityStats specificity_stats(const SyntheticWorld& world, std::size_t n_bins) {
  const ExperimentData data = world.experiment();
  const auto& manifest = data.manifest;
  const std::size_t m_dim = data.bank.size();
  std::vector<std::vector<std::size_t>> rows_by_domain(manifest.domain_names.size());
  for (const auto& it : manifest.items) rows_by_domain[manifest.domain_index(it.domain)].push_back(it.embedding_row);

  SpecificityStats s;
  s.js_per_concept.assign(m_dim, 0.0);
  const std::size_t train_idx = manifest.domain_index(manifest.train_domain);
  std::vector<float> a, b;
  for (std::size_t m = 0; m < m_dim; ++m) {
    a.clear();
    for (std::size_t r : rows_by_domain[train_idx]) a.push_back(data.activations(r, m));
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t dom = 0; dom < rows_by_domain.size(); ++dom) {
      if (dom == train_idx || rows_by_domain[dom].empty()) continue;
      b.clear();
      for (std::size_t r : rows_by_domain[dom]) b.push_back(data.activations(r, m));
      sum += js_divergence(a, b, n_bins);
      ++n;
    }
    s.js_per_concept[m] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  const auto sim = data.simulated();
  std::vector<double> relevance(m_dim, 0.0);
  for (std::size_t r = 0; r < sim.values.rows(); ++r) {
    for (std::size_t m = 0; m < m_dim; ++m) relevance[m] += sim.values(r, m);
  }
  const double rows = std::max<double>(1.0, static_cast<double>(sim.values.rows()));
  const auto spec_idx = world.truth.specific_concepts();
  const auto shared_idx = world.truth.shared_concepts();
  const auto group_mean = [](const std::vector<double>& v, const std::vector<std::size_t>& idx, double scale) {
    double t = 0.0;
    for (std::size_t i : idx) t += v[i];
    return idx.empty() ? 0.0 : t / (static_cast<double>(idx.size()) * scale);
  };
  s.js_specific = group_mean(s.js_per_concept, spec_idx, 1.0);
  s.js_shared = group_mean(s.js_per_concept, shared_idx, 1.0);
  s.relevance_specific = group_mean(relevance, spec_idx, rows);
  s.relevance_shared = group_mean(relevance, shared_idx, rows);
  return s;
}

}  // namespace lance
