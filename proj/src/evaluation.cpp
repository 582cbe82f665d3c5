#include "lance/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lance/error.hpp"

namespace lance {

using nlohmann::json;

std::vector<std::size_t> predict(const Classifier& classifier, const Matrix& activations) {
  const Matrix logits = classifier.logits(activations);
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t y = 1; y < row.size(); ++y) {
      if (row[y] > row[best]) best = y;
    }
    out[i] = best;
  }
  return out;
}

DomainReport evaluate(const Classifier& classifier, const Matrix& activations, const DatasetManifest& manifest) {
  manifest.validate(activations.rows());
  if (manifest.n_classes() != classifier.n_classes()) {
    throw ShapeError("manifest has " + std::to_string(manifest.n_classes()) + " classes, model has " +
                     std::to_string(classifier.n_classes()));
  }
  const auto pred = predict(classifier, activations);
  DomainReport report;
  report.train_domain = manifest.train_domain;
  std::map<std::string, DomainAccuracy> counts;
  for (const auto& item : manifest.items) {
    auto& c = counts[item.domain];
    c.n_items += 1;
    if (pred[item.embedding_row] == item.label) c.n_correct += 1;
  }
  double ood_sum = 0.0;
  for (const auto& dom : manifest.domain_names) {
    auto it = counts.find(dom);
    if (it == counts.end()) {
      report.warnings.push_back("domain '" + dom + "' has no items; excluded");
      continue;
    }
    auto acc = it->second;
    acc.top1_accuracy = static_cast<double>(acc.n_correct) / static_cast<double>(acc.n_items);
    report.per_domain[dom] = acc;
    report.domain_order.push_back(dom);
    if (dom == manifest.train_domain) {
      report.id_accuracy = acc.top1_accuracy;
    } else {
      ood_sum += acc.top1_accuracy;
      report.n_ood_domains += 1;
    }
  }
  if (report.n_ood_domains > 0) report.ood_accuracy = ood_sum / static_cast<double>(report.n_ood_domains);
  return report;
}

AttributionReport top_k_concepts(const Classifier& classifier, std::size_t k) {
  const std::size_t m_dim = classifier.n_concepts();
  if (k < 1 || k > m_dim) {
    throw IndexError("k=" + std::to_string(k) + " outside [1, " + std::to_string(m_dim) + "]");
  }
  const Matrix w = classifier.effective_weights();
  AttributionReport report;
  for (std::size_t y = 0; y < classifier.n_classes(); ++y) {
    std::vector<std::size_t> idx(m_dim);
    for (std::size_t m = 0; m < m_dim; ++m) idx[m] = m;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w(y, a) > w(y, b); });
    ClassAttribution ca;
    ca.class_name = classifier.class_names[y];
    for (std::size_t i = 0; i < k; ++i) ca.concepts.push_back({idx[i], classifier.concept_names[idx[i]], w(y, idx[i])});
    report.per_class.push_back(std::move(ca));
  }
  return report;
}

double js_divergence(std::span<const float> a, std::span<const float> b, std::size_t n_bins) {
  if (a.empty()) throw EmptySet("first sample is empty");
  if (b.empty()) throw EmptySet("second sample is empty");
  if (n_bins < 2) throw ConfigError("n_bins must be ≥ 2");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw InvalidValue("non-finite sample value");
  if (hi <= lo) return 0.0;

  const double width = (hi - lo) / static_cast<double>(n_bins);
  const auto histogram = [&](std::span<const float> s) {
    std::vector<double> h(n_bins, 0.0);
    for (float v : s) {
      auto bin = static_cast<std::size_t>((v - lo) / width);
      if (bin >= n_bins) bin = n_bins - 1;  // right edge closes the last bin
      h[bin] += 1.0;
    }
    double total = 0.0;
    for (auto& x : h) {
      x += kJsSmoothing;
      total += x;
    }
    for (auto& x : h) x /= total;
    return h;
  };
  const auto p = histogram(a);
  const auto q = histogram(b);
  double js = 0.0;
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    js += 0.5 * p[i] * std::log(p[i] / mid) + 0.5 * q[i] * std::log(q[i] / mid);
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

json to_json(const DomainReport& r) {
  json per = json::object();
  for (const auto& dom : r.domain_order) {
    const auto& a = r.per_domain.at(dom);
    per[dom] = {{"n_items", a.n_items}, {"n_correct", a.n_correct}, {"top1_accuracy", a.top1_accuracy}};
  }
  return {{"per_domain", per},
          {"train_domain", r.train_domain},
          {"id_accuracy", r.id_accuracy},
          {"ood_accuracy", r.ood_accuracy},
          {"n_ood_domains", r.n_ood_domains},
          {"warnings", r.warnings}};
}

json to_json(const AttributionReport& r) {
  json out = json::array();
  for (const auto& c : r.per_class) {
    json concepts = json::array();
    for (const auto& rc : c.concepts) concepts.push_back({{"concept", rc.name}, {"index", rc.concept_index}, {"weight", rc.weight}});
    out.push_back({{"class", c.class_name}, {"top_concepts", concepts}});
  }
  return out;
}

std::string to_tsv(const DomainReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "domain\tn_items\tn_correct\ttop1_accuracy\n";
  for (const auto& dom : r.domain_order) {
    const auto& a = r.per_domain.at(dom);
    os << dom << '\t' << a.n_items << '\t' << a.n_correct << '\t' << a.top1_accuracy << '\n';
  }
  os << "ID\t\t\t" << r.id_accuracy << '\n';
  os << "OOD\t\t\t" << r.ood_accuracy << '\n';
  return os.str();
}

std::string to_tsv(const AttributionReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "class\trank\tconcept\tweight\n";
  for (const auto& c : r.per_class) {
    for (std::size_t i = 0; i < c.concepts.size(); ++i) {
      os << c.class_name << '\t' << i + 1 << '\t' << c.concepts[i].name << '\t' << c.concepts[i].weight << '\n';
    }
  }
  return os.str();
}

}  // namespace lance
