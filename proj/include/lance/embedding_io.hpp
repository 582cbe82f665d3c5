#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lance/numerics.hpp"

namespace lance {

// NPY v1.0, little-endian float32, C order, 2-D.
Matrix read_array_file(const std::filesystem::path& path);
void write_array_file(const Matrix& m, const std::filesystem::path& path);

// in-memory variants; `source` only labels error messages
Matrix parse_array_bytes(const std::string& bytes, const std::string& source = "<memory>");
std::string encode_array_bytes(const Matrix& m);

struct ManifestItem {
  std::string id;
  std::size_t embedding_row = 0;
  std::size_t label = 0;
  std::string domain;

  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<std::string> domain_names;
  std::string train_domain;
  std::vector<ManifestItem> items;

  std::size_t n_classes() const noexcept { return class_names.size(); }
  std::size_t domain_index(const std::string& name) const;

  /// Throws ManifestError on any broken invariant. Pass the embedding row
  /// count to also range-check embedding_row.
  void validate(std::optional<std::size_t> n_rows = std::nullopt) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& json_text, const std::string& source = "<memory>");
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

struct TextBank {
  std::vector<std::string> entries;
  std::optional<Matrix> embeddings;
  std::size_t duplicates_dropped = 0;

  std::size_t size() const noexcept { return entries.size(); }
};

TextBank load_text_bank(const std::filesystem::path& path);
TextBank parse_text_bank(const std::string& text, const std::string& source = "<memory>");
void write_text_bank(const std::vector<std::string>& entries, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace lance
