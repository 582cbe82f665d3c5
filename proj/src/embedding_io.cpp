#include "lance/embedding_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lance/error.hpp"

namespace lance {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "little-endian host required");

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// ---- array files ----

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreamble = 10;  // magic + version + u16 header length

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// value text for 'key' inside the python dict literal
std::string dict_value(const std::string& header, const std::string& key, const std::string& source) {
  std::size_t pos = header.find("'" + key + "'");
  if (pos == std::string::npos) pos = header.find("\"" + key + "\"");
  if (pos == std::string::npos) throw FormatError(source + ": header missing '" + key + "'");
  pos = header.find(':', pos);
  if (pos == std::string::npos) throw FormatError(source + ": malformed header near '" + key + "'");
  ++pos;
  std::size_t end;
  if (const auto open = header.find_first_not_of(' ', pos); open != std::string::npos && header[open] == '(') {
    end = header.find(')', open);
    if (end == std::string::npos) throw FormatError(source + ": unterminated shape tuple");
    ++end;
  } else {
    end = header.find_first_of(",}", pos);
    if (end == std::string::npos) throw FormatError(source + ": malformed header near '" + key + "'");
  }
  return trim(header.substr(pos, end - pos));
}

std::vector<std::size_t> parse_shape(const std::string& text, const std::string& source) {
  if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
    throw FormatError(source + ": malformed shape " + text);
  }
  std::vector<std::size_t> dims;
  std::stringstream ss(text.substr(1, text.size() - 2));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw FormatError(source + ": malformed shape " + text);
    }
    dims.push_back(std::stoull(tok));
  }
  return dims;
}

}  // namespace

Matrix parse_array_bytes(const std::string& bytes, const std::string& source) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw FormatError(source + ": not an array file");
  }
  if (bytes.size() < kPreamble) throw FormatError(source + ": truncated preamble");
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw UnsupportedFormat(source + ": version " + std::to_string(major) + "." +
                            std::to_string(minor));
  }
  const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < kPreamble + header_len) {
    throw FormatError(source + ": truncated header: expected " + std::to_string(header_len) +
                      " bytes, got " + std::to_string(bytes.size() - kPreamble));
  }
  const std::string header = bytes.substr(kPreamble, header_len);
  if (header.find('{') == std::string::npos || header.find('}') == std::string::npos) {
    throw FormatError(source + ": header is not a dict");
  }

  std::string descr = dict_value(header, "descr", source);
  if (descr.size() >= 2 && (descr.front() == '\'' || descr.front() == '"')) {
    descr = descr.substr(1, descr.size() - 2);
  }
  if (descr != "<f4") throw UnsupportedFormat(source + ": descr " + descr);

  const std::string fortran = dict_value(header, "fortran_order", source);
  if (fortran == "True") throw UnsupportedFormat(source + ": fortran_order True");
  if (fortran != "False") throw FormatError(source + ": bad fortran_order " + fortran);

  const auto dims = parse_shape(dict_value(header, "shape", source), source);
  if (dims.size() != 2) {
    throw UnsupportedFormat(source + ": shape rank " + std::to_string(dims.size()) + " (need 2)");
  }
  const std::size_t rows = dims[0];
  const std::size_t cols = dims[1];
  const std::size_t expected = rows * cols * sizeof(float);
  const std::size_t actual = bytes.size() - kPreamble - header_len;
  if (actual < expected) {
    throw FormatError(source + ": truncated payload: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(actual));
  }
  std::vector<float> data(rows * cols);
  if (expected > 0) std::memcpy(data.data(), bytes.data() + kPreamble + header_len, expected);
  return Matrix(rows, cols, std::move(data));
}

std::string encode_array_bytes(const Matrix& m) {
  if (!m.all_finite()) throw InvalidValue("refusing to write non-finite matrix");
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                     std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "), }";
  std::size_t total = kPreamble + dict.size() + 1;
  const std::size_t padded = (total + 63) / 64 * 64;
  dict.append(padded - total, ' ');
  dict.push_back('\n');
  const std::size_t header_len = dict.size();

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header_len & 0xff));
  out.push_back(static_cast<char>((header_len >> 8) & 0xff));
  out += dict;
  const auto values = m.values();
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
  return out;
}

Matrix read_array_file(const std::filesystem::path& path) {
  return parse_array_bytes(read_file(path), path.string());
}

void write_array_file(const Matrix& m, const std::filesystem::path& path) {
  write_file(path, encode_array_bytes(m));
}

// ---- manifests ----

std::size_t DatasetManifest::domain_index(const std::string& name) const {
  const auto it = std::find(domain_names.begin(), domain_names.end(), name);
  if (it == domain_names.end()) throw ManifestError("unknown domain '" + name + "'");
  return static_cast<std::size_t>(it - domain_names.begin());
}

void DatasetManifest::validate(std::optional<std::size_t> n_rows) const {
  if (class_names.empty()) throw ManifestError("class_names is empty");
  if (domain_names.empty()) throw ManifestError("domain_names is empty");
  if (std::set<std::string>(domain_names.begin(), domain_names.end()).size() != domain_names.size()) {
    throw ManifestError("domain_names has duplicates");
  }
  if (std::find(domain_names.begin(), domain_names.end(), train_domain) == domain_names.end()) {
    throw ManifestError("train_domain '" + train_domain + "' not in domain_names");
  }
  std::set<std::size_t> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    const std::string where = "items[" + std::to_string(i) + "]";
    if (it.label >= class_names.size()) {
      throw ManifestError(where + ": label out of range (" +
                          std::to_string(it.label) + " >= " + std::to_string(class_names.size()) + ")");
    }
    if (std::find(domain_names.begin(), domain_names.end(), it.domain) == domain_names.end()) {
      throw ManifestError(where + ".domain '" + it.domain + "' not in domain_names");
    }
    if (!rows.insert(it.embedding_row).second) {
      throw ManifestError(where + ".embedding_row duplicate " + std::to_string(it.embedding_row));
    }
    if (n_rows && it.embedding_row >= *n_rows) {
      throw ManifestError(where + ".embedding_row " + std::to_string(it.embedding_row) +
                          " beyond " + std::to_string(*n_rows) + " embedding rows");
    }
  }
}

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ManifestError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

std::vector<std::string> string_list(const json& j, const std::string& name) {
  if (!j.is_array()) throw ManifestError("field '" + name + "' must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ManifestError("field '" + name + "' must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::size_t index_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ManifestError(where + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ManifestError(source + ": invalid JSON: " + e.what());
  }
  DatasetManifest m;
  try {
    m.class_names = string_list(field(doc, "class_names", source), "class_names");
    m.domain_names = string_list(field(doc, "domain_names", source), "domain_names");
    const json& td = field(doc, "train_domain", source);
    if (!td.is_string()) throw ManifestError("field 'train_domain' must be a string");
    m.train_domain = td.get<std::string>();
    const json& items = field(doc, "items", source);
    if (!items.is_array()) throw ManifestError("field 'items' must be a list");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string where = "items[" + std::to_string(i) + "]";
      const json& it = items[i];
      ManifestItem item;
      const json& id = field(it, "id", where);
      const json& dom = field(it, "domain", where);
      if (!id.is_string()) throw ManifestError(where + ": field 'id' must be a string");
      if (!dom.is_string()) throw ManifestError(where + ": field 'domain' must be a string");
      item.id = id.get<std::string>();
      item.domain = dom.get<std::string>();
      item.embedding_row = index_field(it, "embedding_row", where);
      item.label = index_field(it, "label", where);
      m.items.push_back(std::move(item));
    }
    m.validate();
  } catch (const ManifestError& e) {
    if (source == "<memory>") throw;
    const std::string msg = e.what();
    const std::string prefix = "ManifestError: ";
    throw ManifestError(source + ": " + (msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.string());
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json doc;
  doc["class_names"] = manifest.class_names;
  doc["domain_names"] = manifest.domain_names;
  doc["train_domain"] = manifest.train_domain;
  doc["items"] = json::array();
  for (const auto& it : manifest.items) {
    doc["items"].push_back(
        {{"id", it.id}, {"embedding_row", it.embedding_row}, {"label", it.label}, {"domain", it.domain}});
  }
  return doc.dump(1) + "\n";
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file(path, manifest_to_json(manifest));
}

// ---- text banks ----

TextBank parse_text_bank(const std::string& text, const std::string& source) {
  TextBank bank;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string entry = trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    if (!seen.insert(entry).second) {
      ++bank.duplicates_dropped;
      continue;
    }
    bank.entries.push_back(entry);
  }
  if (bank.entries.empty()) throw EmptyBank(source + ": no entries");
  return bank;
}

TextBank load_text_bank(const std::filesystem::path& path) {
  return parse_text_bank(read_file(path), path.string());
}

void write_text_bank(const std::vector<std::string>& entries, const std::filesystem::path& path) {
  std::string out;
  for (const auto& e : entries) out += e + "\n";
  write_file(path, out);
}

}  // namespace lance
