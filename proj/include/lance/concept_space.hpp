#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lance/embedding_io.hpp"
#include "lance/numerics.hpp"

namespace lance {

class ConceptBank {
 public:
  /// Re-normalizes rows. Needs at least two concepts.
  ConceptBank(std::vector<std::string> names, const Matrix& embeddings);

  const std::vector<std::string>& names() const noexcept { return *names_; }
  std::shared_ptr<const std::vector<std::string>> shared_names() const noexcept { return names_; }
  const Matrix& embeddings() const noexcept { return embeddings_; }
  std::size_t size() const noexcept { return names_->size(); }
  std::size_t dim() const noexcept { return embeddings_.cols(); }

 private:
  std::shared_ptr<const std::vector<std::string>> names_;
  Matrix embeddings_;
};

ConceptBank build_concept_bank(const TextBank& names, const Matrix& embeddings);

struct ActivationMatrix {
  Matrix values;
  std::shared_ptr<const std::vector<std::string>> concept_names;
};

/// Raw cosine similarity between each image and each concept, N x M.
ActivationMatrix concept_activations(const Matrix& images, const ConceptBank& bank);

}  // namespace lance
