#include "lance/domain_shift.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "lance/embedding_io.hpp"
#include "lance/error.hpp"

namespace lance {

using nlohmann::json;

namespace {
constexpr std::string_view kDomainSlot = "{domain}";
constexpr std::string_view kClassSlot = "{class}";
}  // namespace

std::string render_prompt(const std::string& prompt_template, const std::string& domain_descriptor,
                          const std::string& class_name) {
  if (prompt_template.find(kDomainSlot) == std::string::npos) {
    throw TemplateError("template '" + prompt_template + "' lacks {domain}");
  }
  if (prompt_template.find(kClassSlot) == std::string::npos) {
    throw TemplateError("template '" + prompt_template + "' lacks {class}");
  }
  // single left-to-right pass so substituted text is never rescanned
  std::string out;
  std::size_t i = 0;
  while (i < prompt_template.size()) {
    std::string_view rest(prompt_template.data() + i, prompt_template.size() - i);
    if (rest.starts_with(kDomainSlot)) {
      out += domain_descriptor;
      i += kDomainSlot.size();
    } else if (rest.starts_with(kClassSlot)) {
      out += class_name;
      i += kClassSlot.size();
    } else {
      out.push_back(prompt_template[i++]);
    }
  }
  return out;
}

void PromptEmbeddingTensor::validate_and_normalize() {
  if (class_names.empty()) throw ShapeError("prompt tensor has no classes");
  const std::size_t expected = (descriptors.size() + 1) * class_names.size();
  if (embeddings.rows() != expected) {
    throw ShapeError("prompt tensor has " + std::to_string(embeddings.rows()) + " rows, expected (" +
                     std::to_string(descriptors.size()) + "+1)*" + std::to_string(class_names.size()) +
                     " = " + std::to_string(expected));
  }
  auto normalized = l2_normalize_rows(embeddings);
  if (!normalized.zero_rows.empty()) {
    const std::size_t r = normalized.zero_rows.front();
    throw DegenerateRow(r, "prompt row " + std::to_string(r) + " is zero");
  }
  embeddings = std::move(normalized.matrix);
}

PromptEmbeddingTensor PromptEmbeddingTensor::subset(const std::vector<std::size_t>& descriptor_indices) const {
  PromptEmbeddingTensor out;
  out.prompt_template = prompt_template;
  out.train_descriptor = train_descriptor;
  out.class_names = class_names;
  std::vector<std::size_t> rows;
  for (std::size_t p : descriptor_indices) {
    if (p >= n_descriptors()) {
      throw IndexError("descriptor " + std::to_string(p) + " out of range (" +
                       std::to_string(n_descriptors()) + ")");
    }
    out.descriptors.push_back(descriptors[p]);
    for (std::size_t y = 0; y < n_classes(); ++y) rows.push_back(row_of(p, y));
  }
  for (std::size_t y = 0; y < n_classes(); ++y) rows.push_back(row_of(n_descriptors(), y));
  out.embeddings = embeddings.select_rows(rows);
  return out;
}

std::string prompt_sidecar_json(const PromptEmbeddingTensor& prompts) {
  json doc;
  doc["template"] = prompts.prompt_template;
  doc["train_descriptor"] = prompts.train_descriptor;
  doc["descriptors"] = prompts.descriptors;
  doc["class_names"] = prompts.class_names;
  return doc.dump(1) + "\n";
}

void save_prompt_tensor(const PromptEmbeddingTensor& prompts, const std::filesystem::path& array_path,
                        const std::filesystem::path& sidecar_path) {
  write_array_file(prompts.embeddings, array_path);
  write_file(sidecar_path, prompt_sidecar_json(prompts));
}

PromptEmbeddingTensor load_prompt_tensor(const std::filesystem::path& array_path,
                                         const std::filesystem::path& sidecar_path) {
  PromptEmbeddingTensor t;
  json doc;
  try {
    doc = json::parse(read_file(sidecar_path));
    t.prompt_template = doc.at("template").get<std::string>();
    t.train_descriptor = doc.at("train_descriptor").get<std::string>();
    t.descriptors = doc.at("descriptors").get<std::vector<std::string>>();
    t.class_names = doc.at("class_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(sidecar_path.string() + ": " + e.what());
  }
  render_prompt(t.prompt_template, t.train_descriptor, "x");  // template check
  t.embeddings = read_array_file(array_path);
  try {
    t.validate_and_normalize();
  } catch (const ShapeError& e) {
    throw ShapeError(array_path.string() + ": " + e.what());
  }
  return t;
}

DomainShiftTensor compute_domain_shifts(const PromptEmbeddingTensor& prompts) {
  DomainShiftTensor out;
  out.n_descriptors = prompts.n_descriptors();
  out.n_classes = prompts.n_classes();
  const std::size_t d = prompts.embeddings.cols();
  out.shifts = Matrix(out.n_descriptors * out.n_classes, d);
  for (std::size_t p = 0; p < out.n_descriptors; ++p) {
    for (std::size_t y = 0; y < out.n_classes; ++y) {
      const std::size_t r = prompts.row_of(p, y);
      const auto target = prompts.prompt(p, y);
      const auto train = prompts.train_prompt(y);
      auto dst = out.shifts.row(r);
      for (std::size_t k = 0; k < d; ++k) dst[k] = target[k] - train[k];
      if (norm(dst) < kDegenerateShiftNorm) out.degenerate_rows.push_back(r);
    }
  }
  return out;
}

SimulatedActivations simulate_domain_specific_activations(const DomainShiftTensor& shifts,
                                                          const ConceptBank& bank,
                                                          std::size_t memory_cap_bytes) {
  if (shifts.shifts.rows() > 0 && shifts.shifts.cols() != bank.dim()) {
    throw ShapeError("shift dimension " + std::to_string(shifts.shifts.cols()) +
                     " != concept dimension " + std::to_string(bank.dim()));
  }
  const std::size_t bytes = shifts.shifts.rows() * bank.size() * sizeof(float);
  if (bytes > memory_cap_bytes) {
    throw CapacityError("simulated activation table needs " + std::to_string(bytes) +
                        " bytes, cap is " + std::to_string(memory_cap_bytes));
  }
  if (shifts.shifts.rows() == 0) return {Matrix(0, bank.size())};
  return {matmul_transposed(shifts.shifts, bank.embeddings())};
}

std::vector<ConceptScore> domain_relevance_scores(const ConceptBank& bank, std::span<const float> shift_row) {
  if (shift_row.size() != bank.dim()) {
    throw ShapeError("shift dimension " + std::to_string(shift_row.size()) +
                     " != concept dimension " + std::to_string(bank.dim()));
  }
  if (norm(shift_row) == 0.0) throw DegenerateShift("shift vector is zero");
  std::vector<ConceptScore> scores(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    scores[i] = {i, bank.names()[i], dot(bank.embeddings().row(i), shift_row)};
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const ConceptScore& a, const ConceptScore& b) { return a.score > b.score; });
  return scores;
}

std::vector<float> class_domain_gap(const Matrix& src_images, const Matrix& tgt_images) {
  if (src_images.rows() == 0) throw EmptySet("source image set is empty");
  if (tgt_images.rows() == 0) throw EmptySet("target image set is empty");
  if (src_images.cols() != tgt_images.cols()) {
    throw ShapeError("source dimension " + std::to_string(src_images.cols()) + " != target dimension " +
                     std::to_string(tgt_images.cols()));
  }
  const std::size_t d = src_images.cols();
  const auto column_mean = [d](const Matrix& m) {
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      for (std::size_t k = 0; k < d; ++k) mean[k] += row[k];
    }
    for (auto& v : mean) v /= static_cast<double>(m.rows());
    return mean;
  };
  const auto s = column_mean(src_images);
  const auto t = column_mean(tgt_images);
  std::vector<float> gap(d);
  for (std::size_t k = 0; k < d; ++k) gap[k] = static_cast<float>(t[k] - s[k]);
  return gap;
}

}  // namespace lance
