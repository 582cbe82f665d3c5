#include "lance/concept_space.hpp"

#include "lance/error.hpp"

namespace lance {

ConceptBank::ConceptBank(std::vector<std::string> names, const Matrix& embeddings) {
  if (names.size() != embeddings.rows()) {
    throw ShapeError(std::to_string(names.size()) + " concept names but " +
                     std::to_string(embeddings.rows()) + " embedding rows");
  }
  if (names.size() < 2) throw ShapeError("concept bank needs at least 2 concepts");
  auto normalized = l2_normalize_rows(embeddings);
  if (!normalized.zero_rows.empty()) {
    const std::size_t r = normalized.zero_rows.front();
    throw DegenerateRow(r, "concept '" + names[r] + "' has a zero embedding");
  }
  names_ = std::make_shared<const std::vector<std::string>>(std::move(names));
  embeddings_ = std::move(normalized.matrix);
}

ConceptBank build_concept_bank(const TextBank& names, const Matrix& embeddings) {
  return ConceptBank(names.entries, embeddings);
}

ActivationMatrix concept_activations(const Matrix& images, const ConceptBank& bank) {
  return {cosine_similarity(images, bank.embeddings()), bank.shared_names()};
}

}  // namespace lance
