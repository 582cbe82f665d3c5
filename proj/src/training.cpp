#include "lance/training.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "lance/embedding_io.hpp"
#include "lance/error.hpp"

namespace lance {

using nlohmann::json;

namespace {

// row-major double buffer
struct Dense {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;
  Dense(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

Dense to_dense(const Matrix& m) {
  Dense d(m.rows(), m.cols());
  const auto src = m.values();
  for (std::size_t i = 0; i < src.size(); ++i) d.v[i] = src[i];
  return d;
}

Matrix to_matrix(const Dense& d) {
  std::vector<float> out(d.v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(d.v[i]);
  return Matrix(d.rows, d.cols, std::move(out));
}

// W_F (N_y x K) times hidden (K x M), or W_F itself
Dense effective_dense(const Classifier& c) {
  if (!c.hidden) return to_dense(c.weights);
  const Matrix& h = *c.hidden;
  Dense e(c.weights.rows(), h.cols());
  for (std::size_t y = 0; y < c.weights.rows(); ++y) {
    for (std::size_t m = 0; m < h.cols(); ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < h.rows(); ++k) acc += static_cast<double>(c.weights(y, k)) * h(k, m);
      e.at(y, m) = acc;
    }
  }
  return e;
}

void check_labels(std::span<const std::size_t> labels, std::size_t n_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) {
      throw IndexError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " out of range for " + std::to_string(n_classes) + " classes");
    }
  }
}

// Pushes a gradient w.r.t. the effective N_y x M map back onto the parameters.
Gradient backprop_effective(const Classifier& c, const Dense& d_eff) {
  Gradient g = Gradient::zeros_like(c);
  if (!c.hidden) {
    g.weights = to_matrix(d_eff);
    return g;
  }
  const Matrix& h = *c.hidden;
  Dense gw(c.weights.rows(), h.rows());
  for (std::size_t y = 0; y < gw.rows; ++y) {
    for (std::size_t k = 0; k < gw.cols; ++k) {
      double acc = 0.0;
      for (std::size_t m = 0; m < h.cols(); ++m) acc += d_eff.at(y, m) * h(k, m);
      gw.at(y, k) = acc;
    }
  }
  Dense gh(h.rows(), h.cols());
  for (std::size_t k = 0; k < gh.rows; ++k) {
    for (std::size_t m = 0; m < gh.cols; ++m) {
      double acc = 0.0;
      for (std::size_t y = 0; y < c.weights.rows(); ++y) acc += static_cast<double>(c.weights(y, k)) * d_eff.at(y, m);
      gh.at(k, m) = acc;
    }
  }
  g.weights = to_matrix(gw);
  g.hidden = to_matrix(gh);
  return g;
}

}  // namespace

// ---- classifier ----

Classifier Classifier::zeros(std::vector<std::string> class_names, std::vector<std::string> concept_names,
                             bool with_bias) {
  Classifier c;
  c.weights = Matrix(class_names.size(), concept_names.size());
  if (with_bias) c.bias = std::vector<float>(class_names.size(), 0.0F);
  c.class_names = std::move(class_names);
  c.concept_names = std::move(concept_names);
  return c;
}

Matrix Classifier::effective_weights() const { return to_matrix(effective_dense(*this)); }

Matrix Classifier::logits(const Matrix& activations) const {
  if (activations.cols() != n_concepts()) {
    throw ShapeError("activations have " + std::to_string(activations.cols()) +
                     " columns, classifier expects " + std::to_string(n_concepts()));
  }
  const Dense e = effective_dense(*this);
  Matrix out(activations.rows(), n_classes());
  parallel_for(activations.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto a = activations.row(i);
      for (std::size_t y = 0; y < e.rows; ++y) {
        double acc = bias ? (*bias)[y] : 0.0;
        for (std::size_t m = 0; m < e.cols; ++m) acc += e.at(y, m) * a[m];
        out(i, y) = static_cast<float>(acc);
      }
    }
  });
  return out;
}

void Classifier::validate() const {
  if (weights.rows() != class_names.size()) {
    throw ShapeError("weights have " + std::to_string(weights.rows()) + " rows but " +
                     std::to_string(class_names.size()) + " class names");
  }
  if (n_concepts() != concept_names.size()) {
    throw ShapeError("classifier spans " + std::to_string(n_concepts()) + " concepts but " +
                     std::to_string(concept_names.size()) + " concept names");
  }
  if (hidden && hidden->rows() != weights.cols()) throw ShapeError("hidden layer width mismatch");
  if (bias && bias->size() != class_names.size()) throw ShapeError("bias length mismatch");
  if (!weights.all_finite() || (hidden && !hidden->all_finite())) throw InvalidValue("non-finite weights");
}

Gradient Gradient::zeros_like(const Classifier& c) {
  Gradient g;
  g.weights = Matrix(c.weights.rows(), c.weights.cols());
  if (c.bias) g.bias = std::vector<float>(c.bias->size(), 0.0F);
  if (c.hidden) g.hidden = Matrix(c.hidden->rows(), c.hidden->cols());
  return g;
}

void Gradient::add_scaled(const Gradient& other, double scale) {
  const auto axpy = [scale](std::span<float> dst, std::span<const float> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<float>(static_cast<double>(dst[i]) + scale * src[i]);
    }
  };
  axpy(weights.values(), other.weights.values());
  if (bias && other.bias) axpy(*bias, *other.bias);
  if (hidden && other.hidden) axpy(hidden->values(), other.hidden->values());
}

// ---- losses ----

LossAndGradient cross_entropy(const Classifier& classifier, const Matrix& activations,
                              std::span<const std::size_t> labels) {
  if (activations.rows() != labels.size()) {
    throw ShapeError(std::to_string(activations.rows()) + " activation rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (activations.cols() != classifier.n_concepts()) {
    throw ShapeError("activations have " + std::to_string(activations.cols()) +
                     " columns, classifier expects " + std::to_string(classifier.n_concepts()));
  }
  check_labels(labels, classifier.n_classes());
  const std::size_t n = activations.rows();
  const std::size_t ny = classifier.n_classes();
  const std::size_t m_dim = classifier.n_concepts();
  LossAndGradient out{0.0, Gradient::zeros_like(classifier)};
  if (n == 0) return out;

  const Dense e = effective_dense(classifier);
  Dense g(n, ny);  // (softmax - onehot) / n
  double loss = 0.0;
  std::vector<double> z(ny);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = activations.row(i);
    for (std::size_t y = 0; y < ny; ++y) {
      double acc = classifier.bias ? (*classifier.bias)[y] : 0.0;
      for (std::size_t m = 0; m < m_dim; ++m) acc += e.at(y, m) * a[m];
      z[y] = acc;
    }
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[labels[i]];
    for (std::size_t y = 0; y < ny; ++y) {
      g.at(i, y) = (std::exp(z[y] - lse) - (y == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  out.loss = loss / static_cast<double>(n);

  Dense d_eff(ny, m_dim);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g.at(i, y);
      const auto a = activations.row(i);
      for (std::size_t m = 0; m < m_dim; ++m) d_eff.at(y, m) += gi * a[m];
    }
  }
  out.grad = backprop_effective(classifier, d_eff);
  if (classifier.bias) {
    for (std::size_t y = 0; y < ny; ++y) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += g.at(i, y);
      (*out.grad.bias)[y] = static_cast<float>(acc);
    }
  }
  return out;
}

std::string to_string(DdoReduction r) {
  switch (r) {
    case DdoReduction::MeanAbsolute: return "mean_abs";
    case DdoReduction::SumAbsolute: return "sum_abs";
    case DdoReduction::L2Norm: return "l2";
  }
  return "mean_abs";
}

DdoReduction ddo_reduction_from_string(const std::string& s) {
  if (s == "mean_abs") return DdoReduction::MeanAbsolute;
  if (s == "sum_abs") return DdoReduction::SumAbsolute;
  if (s == "l2") return DdoReduction::L2Norm;
  throw ConfigError("unknown reduction '" + s + "' (mean_abs|sum_abs|l2)");
}

LossAndGradient ddo_loss(const Classifier& classifier, const SimulatedActivations& sim,
                         DdoReduction reduction) {
  const Matrix& ahat = sim.values;
  if (ahat.rows() > 0 && ahat.cols() != classifier.n_concepts()) {
    throw ShapeError("simulated activations have " + std::to_string(ahat.cols()) +
                     " concepts, classifier has " + std::to_string(classifier.n_concepts()));
  }
  LossAndGradient out{0.0, Gradient::zeros_like(classifier)};
  const std::size_t r_dim = ahat.rows();
  if (r_dim == 0) return out;
  const std::size_t ny = classifier.n_classes();
  const std::size_t m_dim = classifier.n_concepts();
  const Dense e = effective_dense(classifier);

  // v_r = E * a_hat_r; dv = d(loss)/d(v)
  Dense dv(r_dim, ny);
  std::vector<double> row_loss(r_dim, 0.0);
  parallel_for(r_dim, [&](std::size_t begin, std::size_t end) {
    std::vector<double> v(ny);
    for (std::size_t r = begin; r < end; ++r) {
      const auto a = ahat.row(r);
      for (std::size_t y = 0; y < ny; ++y) {
        double acc = 0.0;
        for (std::size_t m = 0; m < m_dim; ++m) acc += e.at(y, m) * a[m];
        v[y] = acc;
      }
      switch (reduction) {
        case DdoReduction::MeanAbsolute:
        case DdoReduction::SumAbsolute: {
          const double scale = reduction == DdoReduction::MeanAbsolute
                                   ? 1.0 / (static_cast<double>(r_dim) * static_cast<double>(ny))
                                   : 1.0 / static_cast<double>(r_dim);
          double s = 0.0;
          for (std::size_t y = 0; y < ny; ++y) {
            s += std::abs(v[y]);
            dv.at(r, y) = v[y] > 0.0 ? scale : (v[y] < 0.0 ? -scale : 0.0);
          }
          row_loss[r] = s * scale;
          break;
        }
        case DdoReduction::L2Norm: {
          double sq = 0.0;
          for (double x : v) sq += x * x;
          const double nrm = std::sqrt(sq);
          row_loss[r] = nrm / static_cast<double>(r_dim);
          if (nrm > 0.0) {
            for (std::size_t y = 0; y < ny; ++y) dv.at(r, y) = v[y] / (nrm * static_cast<double>(r_dim));
          }
          break;
        }
      }
    }
  });
  double loss = 0.0;
  for (double l : row_loss) loss += l;
  out.loss = loss;

  Dense d_eff(ny, m_dim);
  parallel_for(ny, [&](std::size_t begin, std::size_t end) {
    for (std::size_t y = begin; y < end; ++y) {
      for (std::size_t r = 0; r < r_dim; ++r) {
        const double s = dv.at(r, y);
        if (s == 0.0) continue;
        const auto a = ahat.row(r);
        for (std::size_t m = 0; m < m_dim; ++m) d_eff.at(y, m) += s * a[m];
      }
    }
  });
  out.grad = backprop_effective(classifier, d_eff);
  return out;
}

bool ddo_compiled_in() noexcept {
#ifdef LANCE_NO_DDO
  return false;
#else
  return true;
#endif
}

LossBreakdown total_loss(const Classifier& classifier, const Matrix& activations,
                         std::span<const std::size_t> labels, const SimulatedActivations& sim,
                         double lambda, DdoReduction reduction) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be ≥ 0");
  auto ce = cross_entropy(classifier, activations, labels);
  LossBreakdown out;
  out.ce = ce.loss;
  out.total = ce.loss;
  out.grad = std::move(ce.grad);
#ifndef LANCE_NO_DDO
  if (lambda != 0.0) {
    const auto reg = ddo_loss(classifier, sim, reduction);
    out.ddo = reg.loss;
    out.total = ce.loss + lambda * reg.loss;
    out.grad.add_scaled(reg.grad, lambda);
  }
#else
  (void)sim;
  (void)reduction;
#endif
  return out;
}

// ---- config ----

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be ≥ 0");
  if (batch_size < 1) throw ConfigError("batch_size must be ≥ 1");
  if (epochs < 1) throw ConfigError("epochs must be ≥ 1");
  adam.validate();
}

json TrainConfig::to_json() const {
  return {{"lambda", lambda},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", adam.lr},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"epsilon", adam.epsilon},
          {"seed", seed},
          {"shuffle", shuffle},
          {"bias", use_bias},
          {"hidden_units", hidden_units},
          {"reduction", to_string(reduction)}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.lambda = j.value("lambda", c.lambda);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
    c.seed = j.value("seed", c.seed);
    c.shuffle = j.value("shuffle", c.shuffle);
    c.use_bias = j.value("bias", c.use_bias);
    c.hidden_units = j.value("hidden_units", c.hidden_units);
    c.reduction = ddo_reduction_from_string(j.value("reduction", to_string(c.reduction)));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

std::string TrainingLog::to_tsv() const {
  std::ostringstream os;
  os.precision(9);
  os << "epoch\tce\tddo\ttotal\n";
  for (const auto& e : epochs) os << e.epoch << '\t' << e.ce << '\t' << e.ddo << '\t' << e.total << '\n';
  return os.str();
}

// ---- training loop ----

TrainResult train(const Matrix& activations, std::span<const std::size_t> labels,
                  const SimulatedActivations& sim, const TrainConfig& config,
                  std::vector<std::string> class_names, std::vector<std::string> concept_names) {
  config.validate();
  const std::size_t n = activations.rows();
  if (n == 0) throw EmptySet("no training rows");
  if (labels.size() != n) {
    throw ShapeError(std::to_string(n) + " activation rows but " + std::to_string(labels.size()) + " labels");
  }
  if (activations.cols() != concept_names.size()) {
    throw ShapeError("activations have " + std::to_string(activations.cols()) + " columns but " +
                     std::to_string(concept_names.size()) + " concept names");
  }
  check_labels(labels, class_names.size());
  if (!activations.all_finite()) throw InvalidValue("non-finite activations");

  const std::size_t m_dim = concept_names.size();
  TrainResult result;
  Classifier& clf = result.classifier;
  clf = Classifier::zeros(std::move(class_names), std::move(concept_names), config.use_bias);
  if (config.hidden_units > 0) {
    std::mt19937_64 init_rng(derive_seed(config.seed, 1));
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(m_dim)));
    Matrix h(config.hidden_units, m_dim);
    for (auto& v : h.values()) v = static_cast<float>(gauss(init_rng));
    clf.hidden = std::move(h);
    clf.weights = Matrix(clf.class_names.size(), config.hidden_units);
  }

  AdamState w_state(config.adam, clf.weights.rows(), clf.weights.cols());
  AdamState b_state(config.adam, 1, clf.bias ? clf.bias->size() : 0);
  AdamState h_state(config.adam, clf.hidden ? clf.hidden->rows() : 0, clf.hidden ? clf.hidden->cols() : 0);

  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<std::size_t> batch_labels;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng() % (i + 1));
        std::swap(order[i], order[j]);
      }
    }
    double ce_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix batch = activations.select_rows(idx);
      batch_labels.assign(idx.size(), 0);
      for (std::size_t i = 0; i < idx.size(); ++i) batch_labels[i] = labels[idx[i]];

      auto step = total_loss(clf, batch, batch_labels, sim, config.lambda, config.reduction);
      if (!std::isfinite(step.total) || !step.grad.weights.all_finite()) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                              std::to_string(n_batches));
      }
      adam_step(w_state, clf.weights, step.grad.weights);
      if (clf.bias) {
        Matrix b(1, clf.bias->size(), *clf.bias);
        adam_step(b_state, b, Matrix(1, step.grad.bias->size(), *step.grad.bias));
        clf.bias->assign(b.values().begin(), b.values().end());
      }
      if (clf.hidden) adam_step(h_state, *clf.hidden, *step.grad.hidden);
      ce_sum += step.ce;
      ++n_batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.ce = ce_sum / static_cast<double>(n_batches);
#ifndef LANCE_NO_DDO
    if (sim.values.rows() > 0) log.ddo = ddo_loss(clf, sim, config.reduction).loss;
#endif
    log.total = log.ce + config.lambda * log.ddo;
    if (!std::isfinite(log.total) || !clf.weights.all_finite()) {
      throw DivergenceError("non-finite state after epoch " + std::to_string(epoch));
    }
    result.log.epochs.push_back(log);
  }
  return result;
}

// ---- model files ----

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<float>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw FormatError("model field '" + name + "' must be a list of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
  std::vector<float> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) throw FormatError("model field '" + name + "' is ragged");
    for (const auto& v : row) {
      if (!v.is_number()) throw FormatError("model field '" + name + "' has a non-number");
      data.push_back(v.get<float>());
    }
  }
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

json classifier_to_json(const Classifier& c, const json& config) {
  json doc;
  doc["format_version"] = 1;
  doc["class_names"] = c.class_names;
  doc["concept_names"] = c.concept_names;
  doc["weights"] = matrix_to_json(c.weights);
  doc["bias"] = c.bias ? json(*c.bias) : json(nullptr);
  if (c.hidden) doc["hidden_weights"] = matrix_to_json(*c.hidden);
  doc["config"] = config;
  return doc;
}

Classifier classifier_from_json(const json& j) {
  Classifier c;
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw UnsupportedFormat("model format_version " + j.at("format_version").dump());
    }
    c.class_names = j.at("class_names").get<std::vector<std::string>>();
    c.concept_names = j.at("concept_names").get<std::vector<std::string>>();
    c.weights = matrix_from_json(j.at("weights"), "weights");
    if (j.contains("bias") && !j.at("bias").is_null()) c.bias = j.at("bias").get<std::vector<float>>();
    if (j.contains("hidden_weights")) c.hidden = matrix_from_json(j.at("hidden_weights"), "hidden_weights");
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  if (c.weights.rows() == 0 && !c.class_names.empty()) c.weights = Matrix(c.class_names.size(), 0);
  c.validate();
  return c;
}

void save_model(const Classifier& c, const TrainConfig& config, const std::filesystem::path& path) {
  write_file(path, classifier_to_json(c, config.to_json()).dump(1) + "\n");
}

Classifier load_model(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    return classifier_from_json(doc);
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace lance
