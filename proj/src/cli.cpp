#include "lance/cli.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lance/ablation.hpp"
#include "lance/error.hpp"
#include "lance/synthetic.hpp"

namespace lance {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "lance 0.1.0";

json preset_values(const std::string& name) {
  if (name == "paper-defaults") return {{"lambda", 1.0}, {"expected_descriptors", 200}};
  if (name == "synthetic") return {{"lr", 0.03}, {"epochs", 500}, {"batch_size", 64}};
  throw ConfigError("unknown preset '" + name + "' (paper-defaults|synthetic)");
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return "--" + s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// Parameters resolve as: defaults < preset < config file < explicit flags.
class Params {
 public:
  explicit Params(CLI::App* app) : app_(app) {
    app_->add_option("--preset", preset_, "named parameter preset (paper-defaults|synthetic)");
    app_->add_option("--config", config_file_, "JSON file of parameters; flags override it");
  }

  void option(const std::string& key, json def, const std::string& help) {
    auto raw = std::make_shared<std::string>();
    CLI::Option* opt = app_->add_option(flag_name(key), *raw, help);
    if (!def.is_null()) opt->default_str(def.is_string() ? def.get<std::string>() : def.dump());
    entries_.push_back({key, std::move(def), opt, raw, nullptr});
  }

  // boolean; a default-true key is exposed as --no-<key>
  void flag(const std::string& key, bool def, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    const std::string name = def ? "--no-" + flag_name(key).substr(2) : flag_name(key);
    CLI::Option* opt = app_->add_flag(name, *value, help);
    entries_.push_back({key, json(def), opt, nullptr, value});
  }

  json resolve() const {
    json out = json::object();
    for (const auto& e : entries_) out[e.key] = e.def;
    if (!preset_.empty()) merge(out, preset_values(preset_), "preset " + preset_, true);
    if (!config_file_.empty()) {
      json file;
      try {
        file = json::parse(read_file(config_file_));
      } catch (const json::parse_error& e) {
        throw ConfigError(config_file_ + ": " + e.what());
      } catch (const IoError& e) {
        throw ConfigError(e.what());
      }
      if (!file.is_object()) throw ConfigError(config_file_ + ": expected a JSON object");
      merge(out, file, config_file_, false);
    }
    for (const auto& e : entries_) {
      if (e.opt->count() == 0) continue;
      if (e.flag) {
        out[e.key] = e.def.get<bool>() ? !*e.flag : *e.flag;
      } else {
        out[e.key] = convert(e.key, e.def, *e.raw);
      }
    }
    if (!preset_.empty()) out["preset"] = preset_;
    if (!config_file_.empty()) out["config_file"] = config_file_;
    return out;
  }

 private:
  struct Entry {
    std::string key;
    json def;
    CLI::Option* opt;
    std::shared_ptr<std::string> raw;
    std::shared_ptr<bool> flag;
  };

  const Entry* find(const std::string& key) const {
    for (const auto& e : entries_) {
      if (e.key == key) return &e;
    }
    return nullptr;
  }

  void merge(json& out, const json& src, const std::string& where, bool skip_unknown) const {
    for (const auto& [key, value] : src.items()) {
      const Entry* e = find(key);
      if (!e) {
        if (key == "preset" || key == "config_file" || key == "command" || key == "tool" || key == "threads" ||
            skip_unknown) {
          continue;
        }
        throw ConfigError(where + ": unknown parameter '" + key + "'");
      }
      if (value.is_string() && !e->def.is_string() && !e->def.is_null()) {
        out[key] = convert(key, e->def, value.get<std::string>());
      } else {
        out[key] = value;
      }
    }
  }

  static json convert(const std::string& key, const json& def, const std::string& raw) {
    try {
      std::size_t used = 0;
      if (def.is_number_unsigned() || def.is_number_integer()) {
        if (!raw.empty() && raw.front() == '-') throw std::invalid_argument("negative");
        const auto v = std::stoull(raw, &used);
        if (used != raw.size()) throw std::invalid_argument("trailing");
        return v;
      }
      if (def.is_number_float()) {
        const double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument("trailing");
        return v;
      }
      if (def.is_boolean()) {
        if (raw == "true" || raw == "1") return true;
        if (raw == "false" || raw == "0") return false;
        throw std::invalid_argument("bool");
      }
    } catch (const std::exception&) {
      throw ConfigError(flag_name(key) + ": invalid value '" + raw + "'");
    }
    return raw;
  }

  CLI::App* app_;
  std::string preset_;
  std::string config_file_;
  std::vector<Entry> entries_;
};

// ---- shared parameter groups ----

void add_data_params(Params& p) {
  p.option("data", nullptr, "dataset directory with the standard file names");
  p.option("images", nullptr, "image embedding array (overrides --data)");
  p.option("manifest", nullptr, "dataset manifest JSON (overrides --data)");
  p.option("concepts", nullptr, "concept text bank (overrides --data)");
  p.option("concept_embeddings", nullptr, "concept embedding array (overrides --data)");
  p.option("prompts", nullptr, "prompt embedding array (overrides --data)");
  p.option("prompt_sidecar", nullptr, "prompt sidecar JSON (overrides --data)");
}

void add_train_params(Params& p) {
  p.option("lambda", 1.0, "weight of the orthogonality regularizer");
  p.option("epochs", 100, "training epochs");
  p.option("batch_size", 64, "mini-batch size");
  p.option("lr", 1e-3, "Adam learning rate");
  p.option("beta1", 0.9, "Adam beta1");
  p.option("beta2", 0.999, "Adam beta2");
  p.option("epsilon", 1e-8, "Adam epsilon");
  p.option("seed", nullptr, "run seed (required)");
  p.flag("shuffle", true, "disable per-epoch shuffling");
  p.flag("bias", false, "learn a per-class bias");
  p.option("hidden_units", 0, "width of an optional linear hidden layer (0 = none)");
  p.option("reduction", "mean_abs", "regularizer reduction: mean_abs|sum_abs|l2");
  p.option("max_simulated_mb", 1024, "memory cap for the simulated activation table");
  p.option("descriptors", nullptr, "text bank restricting which prompt descriptors are used");
  p.option("expected_descriptors", 0, "warn when the descriptor count differs (0 = off)");
}

void add_output_params(Params& p, bool with_format) {
  p.option("out", nullptr, "output directory (required)");
  if (with_format) p.option("format", "json", "report format: json|tsv");
}

std::optional<std::string> opt_string(const json& p, const char* key) {
  if (!p.contains(key) || p.at(key).is_null()) return std::nullopt;
  return p.at(key).get<std::string>();
}

std::string required_string(const json& p, const char* key) {
  auto v = opt_string(p, key);
  if (!v || v->empty()) throw ConfigError(flag_name(key) + " is required");
  return *v;
}

std::uint64_t required_seed(const json& p) {
  if (!p.contains("seed") || p.at("seed").is_null()) throw ConfigError("--seed is required");
  const json& s = p.at("seed");
  if (s.is_string()) {
    const std::string raw = s.get<std::string>();
    std::size_t used = 0;
    try {
      if (raw.empty() || raw.front() == '-') throw std::invalid_argument("sign");
      const auto v = std::stoull(raw, &used);
      if (used == raw.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("--seed must be a non-negative integer");
  }
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
    throw ConfigError("--seed must be a non-negative integer");
  }
  return s.get<std::uint64_t>();
}

DatasetPaths resolve_paths(json& p) {
  DatasetPaths paths;
  if (auto dir = opt_string(p, "data")) paths = DatasetPaths::in_directory(*dir);
  const auto pick = [&](const char* key, fs::path& target) {
    if (auto v = opt_string(p, key)) target = *v;
    if (target.empty()) throw ConfigError(flag_name(key) + " or --data is required");
    p[key] = target.string();
  };
  pick("images", paths.images);
  pick("manifest", paths.manifest);
  pick("concepts", paths.concepts);
  pick("concept_embeddings", paths.concept_embeddings);
  pick("prompts", paths.prompts);
  pick("prompt_sidecar", paths.prompt_sidecar);
  return paths;
}

TrainConfig train_config_from(const json& p) {
  TrainConfig c;
  try {
    c.lambda = p.at("lambda").get<double>();
    c.epochs = p.at("epochs").get<std::size_t>();
    c.batch_size = p.at("batch_size").get<std::size_t>();
    c.adam.lr = p.at("lr").get<double>();
    c.adam.beta1 = p.at("beta1").get<double>();
    c.adam.beta2 = p.at("beta2").get<double>();
    c.adam.epsilon = p.at("epsilon").get<double>();
    c.shuffle = p.at("shuffle").get<bool>();
    c.use_bias = p.at("bias").get<bool>();
    c.hidden_units = p.at("hidden_units").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad parameter type: ") + e.what());
  }
  c.reduction = ddo_reduction_from_string(p.at("reduction").get<std::string>());
  c.seed = required_seed(p);
  c.validate();
  return c;
}

fs::path prepare_out(const json& p) {
  const fs::path out = required_string(p, "out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

void write_resolved(const fs::path& out, const std::string& command, json params) {
  params["command"] = command;
  params["tool"] = kToolVersion;
  params["threads"] = thread_count();
  write_file(out / "resolved_config.json", params.dump(1) + "\n");
}

std::string format_of(const json& p) {
  const std::string f = p.at("format").get<std::string>();
  if (f != "json" && f != "tsv") throw ConfigError("--format must be json or tsv");
  return f;
}

void emit(const fs::path& out, const std::string& stem, const std::string& format, const json& as_json,
          const std::string& as_tsv) {
  const std::string body = format == "json" ? as_json.dump(1) + "\n" : as_tsv;
  write_file(out / (stem + "." + format), body);
  std::cout << body;
}

std::size_t memory_cap(const json& p) { return p.at("max_simulated_mb").get<std::size_t>() << 20; }

std::optional<std::vector<std::size_t>> descriptor_selection(const json& p, const ExperimentData& data) {
  const auto file = opt_string(p, "descriptors");
  if (!file) return std::nullopt;
  const TextBank wanted = load_text_bank(*file);
  const auto& names = data.prompts->descriptors;
  std::vector<std::size_t> idx;
  for (const auto& w : wanted.entries) {
    const auto it = std::find(names.begin(), names.end(), w);
    if (it == names.end()) throw IndexError(*file + ": descriptor '" + w + "' not in the prompt tensor");
    idx.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return idx;
}

void warn_descriptor_count(const json& p, std::size_t n) {
  const auto expected = p.at("expected_descriptors").get<std::size_t>();
  if (expected != 0 && expected != n) {
    std::cerr << "warning: using " << n << " descriptors, preset expects " << expected << "\n";
  }
}

// ---- commands ----

int cmd_train(json p) {
  const TrainConfig cfg = train_config_from(p);
  const DatasetPaths paths = resolve_paths(p);
  const fs::path out = prepare_out(p);
  const ExperimentData data = load_experiment(paths, cfg.lambda > 0.0);
  if (data.train_rows.empty()) throw EmptySet("no items in train domain '" + data.manifest.train_domain + "'");
  SimulatedActivations sim{Matrix(0, data.bank.size())};
  if (data.prompts) {
    const auto selection = descriptor_selection(p, data);
    sim = data.simulated(selection, memory_cap(p));
    warn_descriptor_count(p, selection ? selection->size() : data.n_descriptors());
  }
  const auto result = train(data.train_activations(), data.train_labels, sim, cfg, data.manifest.class_names,
                            data.bank.names());
  save_model(result.classifier, cfg, out / "model.json");
  write_file(out / "training_log.tsv", result.log.to_tsv());
  write_resolved(out, "train", p);
  const auto& last = result.log.epochs.back();
  std::cout << "epochs\t" << result.log.epochs.size() << "\nce\t" << last.ce << "\nddo\t" << last.ddo << "\ntotal\t"
            << last.total << "\n";
  return kExitOk;
}

int cmd_eval(json p) {
  const std::string model_path = required_string(p, "model");
  const DatasetPaths paths = resolve_paths(p);
  const std::string format = format_of(p);
  const fs::path out = prepare_out(p);
  const Classifier model = load_model(model_path);
  const ExperimentData data = load_experiment(paths, false);
  if (model.n_concepts() != data.bank.size()) {
    throw ShapeError("model has " + std::to_string(model.n_concepts()) + " concepts, concept bank has " +
                     std::to_string(data.bank.size()));
  }
  if (model.n_classes() != data.manifest.n_classes()) {
    throw ShapeError("model has " + std::to_string(model.n_classes()) + " classes, manifest has " +
                     std::to_string(data.manifest.n_classes()));
  }
  const DomainReport report = evaluate(model, data.activations, data.manifest);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  json as_json = {{"domain_report", to_json(report)}};
  std::string as_tsv = to_tsv(report);
  const auto k = p.at("top_k").get<std::size_t>();
  if (k > 0) {
    const auto attribution = top_k_concepts(model, k);
    as_json["attribution"] = to_json(attribution);
    as_tsv += "\n" + to_tsv(attribution);
  }
  emit(out, "report", format, as_json, as_tsv);
  write_resolved(out, "eval", p);
  return kExitOk;
}

std::vector<std::size_t> rows_in(const DatasetManifest& m, const std::string& domain,
                                 std::optional<std::size_t> cls = std::nullopt) {
  m.domain_index(domain);
  std::vector<std::size_t> rows;
  for (const auto& it : m.items) {
    if (it.domain == domain && (!cls || it.label == *cls)) rows.push_back(it.embedding_row);
  }
  return rows;
}

std::size_t class_index(const DatasetManifest& m, const std::string& name) {
  const auto it = std::find(m.class_names.begin(), m.class_names.end(), name);
  if (it == m.class_names.end()) throw IndexError("unknown class '" + name + "'");
  return static_cast<std::size_t>(it - m.class_names.begin());
}

int cmd_analyze_js(json p) {
  const DatasetPaths paths = resolve_paths(p);
  const std::string format = format_of(p);
  const fs::path out = prepare_out(p);
  const ExperimentData data = load_experiment(paths, false);
  const auto& m = data.manifest;
  const std::string dom_a = opt_string(p, "domain_a").value_or(m.train_domain);
  std::vector<std::string> targets;
  if (auto b = opt_string(p, "domain_b")) {
    targets.push_back(*b);
  } else {
    for (const auto& d : m.domain_names) {
      if (d != dom_a) targets.push_back(d);
    }
  }
  const auto bins = p.at("bins").get<std::size_t>();
  const auto rows_a = rows_in(m, dom_a);
  json table = json::array();
  std::ostringstream tsv;
  tsv.precision(9);
  tsv << "concept\tdomain_a\tdomain_b\tjs\n";
  std::vector<float> a, b;
  for (const auto& dom_b : targets) {
    const auto rows_b = rows_in(m, dom_b);
    for (std::size_t c = 0; c < data.bank.size(); ++c) {
      a.clear();
      b.clear();
      for (auto r : rows_a) a.push_back(data.activations(r, c));
      for (auto r : rows_b) b.push_back(data.activations(r, c));
      if (a.empty()) throw EmptySet("domain '" + dom_a + "' has no items");
      if (b.empty()) throw EmptySet("domain '" + dom_b + "' has no items");
      const double js = js_divergence(a, b, bins);
      table.push_back({{"concept", data.bank.names()[c]}, {"domain_a", dom_a}, {"domain_b", dom_b}, {"js", js}});
      tsv << data.bank.names()[c] << '\t' << dom_a << '\t' << dom_b << '\t' << js << '\n';
    }
  }
  emit(out, "js", format, {{"recipe", kJsRecipe}, {"n_bins", bins}, {"table", table}}, tsv.str());
  write_resolved(out, "analyze js", p);
  return kExitOk;
}

std::vector<float> mean_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  std::vector<double> acc(m.cols(), 0.0);
  for (auto r : rows) {
    for (std::size_t k = 0; k < m.cols(); ++k) acc[k] += m(r, k);
  }
  std::vector<float> out(m.cols());
  for (std::size_t k = 0; k < m.cols(); ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(rows.size()));
  return out;
}

int cmd_analyze_relevance(json p) {
  const DatasetPaths paths = resolve_paths(p);
  const std::string format = format_of(p);
  const fs::path out = prepare_out(p);
  const std::string source = p.at("source").get<std::string>();
  const bool text = source == "text";
  if (!text && source != "image-gap" && source != "gap-file") {
    throw ConfigError("--source must be text, image-gap or gap-file");
  }
  const ExperimentData data = load_experiment(paths, text);
  const auto& m = data.manifest;
  const auto cls_name = opt_string(p, "class");
  const std::optional<std::size_t> cls = cls_name ? std::optional(class_index(m, *cls_name)) : std::nullopt;

  std::vector<float> shift;
  if (text) {
    const auto& prompts = *data.prompts;
    const DomainShiftTensor shifts = compute_domain_shifts(prompts);
    std::optional<std::size_t> desc;
    if (auto dn = opt_string(p, "descriptor")) {
      const auto it = std::find(prompts.descriptors.begin(), prompts.descriptors.end(), *dn);
      if (it == prompts.descriptors.end()) throw IndexError("unknown descriptor '" + *dn + "'");
      desc = static_cast<std::size_t>(it - prompts.descriptors.begin());
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < prompts.n_descriptors(); ++i) {
      for (std::size_t y = 0; y < prompts.n_classes(); ++y) {
        if ((!desc || *desc == i) && (!cls || *cls == y)) rows.push_back(prompts.row_of(i, y));
      }
    }
    if (rows.empty()) throw EmptySet("no descriptor rows to score");
    shift = mean_rows(shifts.shifts, rows);
  } else if (source == "image-gap") {
    const std::string src = opt_string(p, "source_domain").value_or(m.train_domain);
    std::vector<std::string> targets;
    if (auto t = opt_string(p, "target_domain")) {
      targets.push_back(*t);
    } else {
      for (const auto& d : m.domain_names) {
        if (d != src) targets.push_back(d);
      }
    }
    std::vector<std::size_t> classes;
    if (cls) {
      classes.push_back(*cls);
    } else {
      for (std::size_t y = 0; y < m.n_classes(); ++y) classes.push_back(y);
    }
    const Matrix images = read_array_file(paths.images);
    std::vector<double> acc(images.cols(), 0.0);
    std::size_t n = 0;
    for (const auto& tgt : targets) {
      for (auto y : classes) {
        const auto g = class_domain_gap(images.select_rows(rows_in(m, src, y)), images.select_rows(rows_in(m, tgt, y)));
        for (std::size_t k = 0; k < g.size(); ++k) acc[k] += g[k];
        ++n;
      }
    }
    if (n == 0) throw EmptySet("no target domain to compare against");
    shift.resize(acc.size());
    for (std::size_t k = 0; k < acc.size(); ++k) shift[k] = static_cast<float>(acc[k] / static_cast<double>(n));
  } else {
    const std::string gap_path = required_string(p, "gap_file");
    const Matrix gaps = read_array_file(gap_path);
    if (gaps.rows() == 0) throw EmptySet(gap_path + ": no gap rows");
    std::vector<std::size_t> rows;
    if (cls) {
      if (*cls >= gaps.rows()) throw IndexError(gap_path + ": no row for class " + *cls_name);
      rows.push_back(*cls);
    } else {
      for (std::size_t r = 0; r < gaps.rows(); ++r) rows.push_back(r);
    }
    shift = mean_rows(gaps, rows);
  }

  auto scores = domain_relevance_scores(data.bank, shift);
  const auto top = p.at("top").get<std::size_t>();
  if (top > 0 && top < scores.size()) scores.resize(top);
  json table = json::array();
  std::ostringstream tsv;
  tsv.precision(9);
  tsv << "rank\tconcept\tindex\tscore\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    table.push_back({{"rank", i + 1}, {"concept", scores[i].name}, {"index", scores[i].concept_index}, {"score", scores[i].score}});
    tsv << i + 1 << '\t' << scores[i].name << '\t' << scores[i].concept_index << '\t' << scores[i].score << '\n';
  }
  emit(out, "relevance", format, {{"source", source}, {"ranking", table}}, tsv.str());
  write_resolved(out, "analyze relevance", p);
  return kExitOk;
}

int cmd_analyze_gap(json p) {
  p["prompts"] = p["prompts"].is_null() ? json("") : p["prompts"];
  p["prompt_sidecar"] = p["prompt_sidecar"].is_null() ? json("") : p["prompt_sidecar"];
  DatasetManifest m;
  fs::path images_path;
  if (auto dir = opt_string(p, "data")) {
    images_path = fs::path(*dir) / dataset_files::kImages;
    m = load_manifest(fs::path(*dir) / dataset_files::kManifest);
  }
  if (auto v = opt_string(p, "images")) images_path = *v;
  if (auto v = opt_string(p, "manifest")) m = load_manifest(*v);
  if (images_path.empty() || m.class_names.empty()) throw ConfigError("--data or --images/--manifest is required");
  p["images"] = images_path.string();
  const fs::path out = prepare_out(p);
  const Matrix images = read_array_file(images_path);
  m.validate(images.rows());
  const std::string src = opt_string(p, "source_domain").value_or(m.train_domain);
  const std::string tgt = required_string(p, "target_domain");
  Matrix gaps(m.n_classes(), images.cols());
  for (std::size_t y = 0; y < m.n_classes(); ++y) {
    const auto s = rows_in(m, src, y);
    const auto t = rows_in(m, tgt, y);
    if (s.empty()) throw EmptySet("class '" + m.class_names[y] + "' has no items in source domain '" + src + "'");
    if (t.empty()) throw EmptySet("class '" + m.class_names[y] + "' has no items in target domain '" + tgt + "'");
    const auto g = class_domain_gap(images.select_rows(s), images.select_rows(t));
    std::copy(g.begin(), g.end(), gaps.row(y).begin());
  }
  write_array_file(gaps, out / "gap.npy");
  write_file(out / "gap.json",
             json{{"class_names", m.class_names}, {"source_domain", src}, {"target_domain", tgt}}.dump(1) + "\n");
  write_resolved(out, "analyze gap", p);
  std::cout << "wrote " << (out / "gap.npy").string() << " (" << gaps.rows() << " x " << gaps.cols() << ")\n";
  return kExitOk;
}

SyntheticSpec synth_spec_from(const json& p) {
  SyntheticSpec s;
  try {
    s.d = p.at("d").get<std::size_t>();
    s.n_classes = p.at("n_classes").get<std::size_t>();
    s.n_shared_concepts = p.at("n_shared").get<std::size_t>();
    s.n_specific_concepts = p.at("n_specific").get<std::size_t>();
    const json& doms = p.at("domains");
    s.domains = doms.is_array() ? doms.get<std::vector<std::string>>() : split_list(doms.get<std::string>());
    s.samples_per_class_per_domain = p.at("samples").get<std::size_t>();
    s.noise_sigma = p.at("noise_sigma").get<double>();
    s.style_strength = p.at("style_strength").get<double>();
    s.text_style_strength = p.at("text_style_strength").get<double>();
    s.hot_classes_per_domain = p.at("hot_classes").get<std::size_t>();
    s.relevant_descriptors_per_domain = p.at("relevant_descriptors").get<std::size_t>();
    s.irrelevant_descriptors = p.at("irrelevant_descriptors").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad parameter type: ") + e.what());
  }
  s.seed = required_seed(p);
  return s;
}

int cmd_synth(json p) {
  const SyntheticSpec spec = synth_spec_from(p);
  const std::string format = format_of(p);
  const double lambda = p.at("lambda").get<double>();
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be ≥ 0");
  const fs::path out = prepare_out(p);
  const SyntheticWorld world = generate(spec);
  write_world(world, out);
  write_resolved(out, "synth", p);
  std::cout << "wrote synthetic dataset to " << out.string() << " (" << world.images.rows() << " images, "
            << world.bank.size() << " concepts, " << world.prompts.n_descriptors() << " descriptors)\n";
  if (p.at("verify").get<bool>()) {
    const auto effect = verify_ddo_effect(world, synthetic_train_config(0.0), synthetic_train_config(lambda));
    std::ostringstream tsv;
    tsv.precision(6);
    tsv << "metric\tbaseline\tddo\n"
        << "id\t" << effect.baseline.id_accuracy << '\t' << effect.ddo.id_accuracy << '\n'
        << "ood\t" << effect.baseline.ood_accuracy << '\t' << effect.ddo.ood_accuracy << '\n'
        << "specific_weight_mass\t" << effect.specific_mass_baseline << '\t' << effect.specific_mass_ddo << '\n'
        << "classes_with_specific_in_top5\t" << effect.classes_with_specific_in_top5_baseline << '\t'
        << effect.classes_with_specific_in_top5_ddo << '\n'
        << "delta_id\t" << effect.delta_id << '\n'
        << "delta_ood\t" << effect.delta_ood << '\n';
    emit(out, "effect", format, effect.to_json(), tsv.str());
  }
  return kExitOk;
}

std::vector<std::size_t> parse_grid(const json& g, std::size_t n_p) {
  std::vector<std::string> tokens;
  if (g.is_array()) {
    for (const auto& v : g) tokens.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  } else {
    tokens = split_list(g.get<std::string>());
  }
  std::vector<std::size_t> grid;
  for (const auto& t : tokens) {
    if (t == "all") {
      grid.push_back(n_p);
      continue;
    }
    try {
      std::size_t used = 0;
      if (!t.empty() && t.front() == '-') throw std::invalid_argument("negative");
      grid.push_back(std::stoull(t, &used));
      if (used != t.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("--grid: bad entry '" + t + "'");
    }
  }
  if (grid.empty()) throw ConfigError("--grid is empty");
  return grid;
}

int cmd_ablate_count(json p) {
  const TrainConfig cfg = train_config_from(p);
  const DatasetPaths paths = resolve_paths(p);
  const std::string format = format_of(p);
  const ExperimentData data = load_experiment(paths, true);
  const auto grid = parse_grid(p.at("grid"), data.n_descriptors());
  for (auto g : grid) {
    if (g > data.n_descriptors()) {
      throw ConfigError("grid point " + std::to_string(g) + " exceeds the " + std::to_string(data.n_descriptors()) +
                        " available descriptors");
    }
  }
  const fs::path out = prepare_out(p);
  const auto sweep = sweep_descriptor_counts(data, grid, p.at("repeats").get<std::size_t>(), cfg, cfg.seed);
  emit(out, "count_sweep", format, sweep.to_json(), sweep.to_tsv());
  write_resolved(out, "ablate count", p);
  return kExitOk;
}

int cmd_ablate_subset(json p) {
  const TrainConfig cfg = train_config_from(p);
  const DatasetPaths paths = resolve_paths(p);
  const std::string format = format_of(p);
  const std::string kw_path = required_string(p, "exclude_keywords");
  const fs::path out = prepare_out(p);
  const ExperimentData data = load_experiment(paths, true);
  const TextBank keywords = load_text_bank(kw_path);
  const auto kept = descriptors_without_keywords(data.prompts->descriptors, keywords.entries);
  std::cerr << "keeping " << kept.size() << " of " << data.n_descriptors() << " descriptors\n";
  const auto cmp = compare_descriptor_subset(data, kept, cfg);
  emit(out, "subset_comparison", format, cmp.to_json(data.prompts->descriptors), cmp.to_tsv());
  write_resolved(out, "ablate subset", p);
  return kExitOk;
}

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Numeric: return kExitNumeric;
  }
  return kExitData;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Concept-bottleneck classifiers on precomputed embeddings, with a domain-shift orthogonality regularizer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "cap on worker threads (default: LANCE_THREADS or all cores)");

  // every Params must outlive parsing
  std::vector<std::unique_ptr<Params>> all;
  std::vector<std::pair<CLI::App*, std::function<int(json)>>> handlers;
  const auto command = [&](CLI::App* parent, const std::string& name, const std::string& help,
                           const std::function<void(Params&)>& setup, std::function<int(json)> run) {
    CLI::App* sub = parent->add_subcommand(name, help);
    all.push_back(std::make_unique<Params>(sub));
    setup(*all.back());
    handlers.emplace_back(sub, std::move(run));
    return sub;
  };

  command(&app, "train", "train a classifier", [](Params& p) {
    add_data_params(p);
    add_train_params(p);
    add_output_params(p, false);
  }, cmd_train);

  command(&app, "eval", "evaluate a model per domain", [](Params& p) {
    add_data_params(p);
    p.option("model", nullptr, "model JSON (required)");
    p.option("top_k", 0, "also report the top-k concepts per class");
    add_output_params(p, true);
  }, cmd_eval);

  CLI::App* analyze = app.add_subcommand("analyze", "domain-shift analyses");
  analyze->require_subcommand(1);
  command(analyze, "js", "per-concept JS divergence between domains", [](Params& p) {
    add_data_params(p);
    p.option("domain_a", nullptr, "reference domain (default: train domain)");
    p.option("domain_b", nullptr, "compared domain (default: every other domain)");
    p.option("bins", static_cast<std::size_t>(kDefaultJsBins), "histogram bins");
    add_output_params(p, true);
  }, cmd_analyze_js);
  command(analyze, "relevance", "rank concepts by alignment with a domain shift", [](Params& p) {
    add_data_params(p);
    p.option("source", "text", "shift source: text|image-gap|gap-file");
    p.option("gap_file", nullptr, "gap array written by 'analyze gap'");
    p.option("class", nullptr, "restrict to one class");
    p.option("descriptor", nullptr, "restrict to one descriptor (text source)");
    p.option("source_domain", nullptr, "image-gap source domain (default: train domain)");
    p.option("target_domain", nullptr, "image-gap target domain (default: all others)");
    p.option("top", 0, "keep only the top entries (0 = all)");
    add_output_params(p, true);
  }, cmd_analyze_relevance);
  command(analyze, "gap", "write per-class image-mean domain gaps", [](Params& p) {
    add_data_params(p);
    p.option("source_domain", nullptr, "source domain (default: train domain)");
    p.option("target_domain", nullptr, "target domain (required)");
    add_output_params(p, false);
  }, cmd_analyze_gap);

  command(&app, "synth", "write a synthetic dataset", [](Params& p) {
    const SyntheticSpec s;
    p.option("seed", nullptr, "generator seed (required)");
    p.option("d", s.d, "embedding dimension");
    p.option("n_classes", s.n_classes, "classes");
    p.option("n_shared", s.n_shared_concepts, "domain-shared concepts");
    p.option("n_specific", s.n_specific_concepts, "domain-specific concepts");
    p.option("domains", "photo,sketch,clipart", "comma-separated domains, first = train");
    p.option("samples", s.samples_per_class_per_domain, "samples per class per domain");
    p.option("noise_sigma", s.noise_sigma, "image noise");
    p.option("style_strength", s.style_strength, "image style strength");
    p.option("text_style_strength", s.text_style_strength, "prompt style strength");
    p.option("hot_classes", s.hot_classes_per_domain, "classes whose specific concepts each domain style hits");
    p.option("relevant_descriptors", s.relevant_descriptors_per_domain, "relevant descriptors per unseen domain");
    p.option("irrelevant_descriptors", s.irrelevant_descriptors, "irrelevant descriptors");
    p.flag("verify", false, "also train baseline and regularized models and report the effect");
    p.option("lambda", 1.0, "regularizer weight for --verify");
    add_output_params(p, true);
  }, cmd_synth);

  CLI::App* ablate = app.add_subcommand("ablate", "descriptor ablations");
  ablate->require_subcommand(1);
  command(ablate, "count", "sweep the number of descriptors", [](Params& p) {
    add_data_params(p);
    add_train_params(p);
    p.option("grid", "1,2,5,10,all", "descriptor counts ('all' = every descriptor)");
    p.option("repeats", kDefaultAblationRepeats, "random subsets per count");
    add_output_params(p, true);
  }, cmd_ablate_count);
  command(ablate, "subset", "compare a keyword-filtered descriptor set with the full set", [](Params& p) {
    add_data_params(p);
    add_train_params(p);
    p.option("exclude_keywords", nullptr, "text bank of keywords; matching descriptors are dropped (required)");
    add_output_params(p, true);
  }, cmd_ablate_subset);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    for (std::size_t i = 0; i < handlers.size(); ++i) {
      if (handlers[i].first->parsed()) return handlers[i].second(all[i]->resolve());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"lance"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace lance
