// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// `acceptance --seeds N` widens the seed range of the synthetic criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "lance/ablation.hpp"
#include "lance/cli.hpp"
#include "lance/error.hpp"
#include "lance/synthetic.hpp"

using namespace lance;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// runs the library CLI with stdout/stderr discarded
int quiet_cli(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto* out = std::cout.rdbuf(sink.rdbuf());
  auto* err = std::cerr.rdbuf(sink.rdbuf());
  const int rc = run_cli(args);
  std::cout.rdbuf(out);
  std::cerr.rdbuf(err);
  return rc;
}

int shell(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

// ---------------------------------------------------------------------------
// double-precision oracle of the objective, written independently of the library

struct Shadow {
  std::size_t ny = 0, m = 0, k = 0;  // k = hidden width, 0 for none
  bool has_bias = false;
  std::vector<double> w, b, h;        // w: ny x (k ? k : m), h: k x m

  std::size_t size() const { return w.size() + b.size() + h.size(); }
  double& at(std::size_t i) {
    if (i < w.size()) return w[i];
    i -= w.size();
    if (i < b.size()) return b[i];
    return h[i - b.size()];
  }
  double eff(std::size_t y, std::size_t j) const {
    if (k == 0) return w[y * m + j];
    double s = 0.0;
    for (std::size_t t = 0; t < k; ++t) s += w[y * k + t] * h[t * m + j];
    return s;
  }
};

double oracle_ce(const Shadow& s, const Matrix& a, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::vector<double> z(s.ny);
    for (std::size_t y = 0; y < s.ny; ++y) {
      z[y] = s.has_bias ? s.b[y] : 0.0;
      for (std::size_t j = 0; j < s.m; ++j) z[y] += s.eff(y, j) * a(i, j);
    }
    long double se = 0.0L;
    for (double v : z) se += std::exp(static_cast<long double>(v));
    total += static_cast<double>(std::log(se)) - z[labels[i]];
  }
  return total / static_cast<double>(a.rows());
}

// every (descriptor, class) row and every output class, mean of |.|
double oracle_ddo(const Shadow& s, const Matrix& ahat) {
  double total = 0.0;
  for (std::size_t r = 0; r < ahat.rows(); ++r) {
    for (std::size_t c = 0; c < s.ny; ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < s.m; ++j) v += s.eff(c, j) * ahat(r, j);
      total += std::abs(v);
    }
  }
  return ahat.rows() == 0 ? 0.0 : total / (static_cast<double>(ahat.rows()) * static_cast<double>(s.ny));
}

Shadow shadow_of(const Classifier& c) {
  Shadow s;
  s.ny = c.n_classes();
  s.m = c.n_concepts();
  s.k = c.hidden ? c.hidden->rows() : 0;
  s.has_bias = c.bias.has_value();
  for (float v : c.weights.values()) s.w.push_back(v);
  if (c.bias) {
    for (float v : *c.bias) s.b.push_back(v);
  }
  if (c.hidden) {
    for (float v : c.hidden->values()) s.h.push_back(v);
  }
  return s;
}

std::vector<double> flatten(const Gradient& g) {
  std::vector<double> out;
  for (float v : g.weights.values()) out.push_back(v);
  if (g.bias) {
    for (float v : *g.bias) out.push_back(v);
  }
  if (g.hidden) {
    for (float v : g.hidden->values()) out.push_back(v);
  }
  return out;
}

std::vector<double> central_difference(Shadow s, const std::function<double(const Shadow&)>& f, double h) {
  std::vector<double> g(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double orig = s.at(i);
    s.at(i) = orig + h;
    const double up = f(s);
    s.at(i) = orig - h;
    const double down = f(s);
    s.at(i) = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    scale = std::max({scale, a[i] * a[i], b[i] * b[i]});
  }
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
  return std::sqrt(diff) / denom;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.values()) v = static_cast<float>(u(rng));
  return m;
}

struct Instance {
  Classifier clf;
  Matrix acts;
  std::vector<std::size_t> labels;
  SimulatedActivations sim;
};

// no |W a_hat| entry within reach of the finite-difference step
bool away_from_kinks(const Instance& in, double margin) {
  const Matrix e = in.clf.effective_weights();
  for (std::size_t r = 0; r < in.sim.values.rows(); ++r) {
    for (std::size_t c = 0; c < e.rows(); ++c) {
      double v = 0.0;
      for (std::size_t j = 0; j < e.cols(); ++j) v += static_cast<double>(e(c, j)) * in.sim.values(r, j);
      if (std::abs(v) < margin) return false;
    }
  }
  return true;
}

Instance random_instance(std::mt19937_64& rng, int variant) {
  std::uniform_int_distribution<std::size_t> classes(2, 5), concepts(2, 10), batch(1, 8), descs(1, 3);
  for (;;) {
    Instance in;
    const std::size_t ny = classes(rng), m = concepts(rng), n = batch(rng), np = descs(rng);
    std::vector<std::string> cn, mn;
    for (std::size_t y = 0; y < ny; ++y) cn.push_back("c" + std::to_string(y));
    for (std::size_t j = 0; j < m; ++j) mn.push_back("k" + std::to_string(j));
    in.clf = Classifier::zeros(cn, mn, variant == 1);
    if (variant == 2) {
      in.clf.hidden = random_matrix(rng, 3, m, -1.0, 1.0);
      in.clf.weights = random_matrix(rng, ny, 3, -1.0, 1.0);
    } else {
      in.clf.weights = random_matrix(rng, ny, m, -1.0, 1.0);
    }
    if (in.clf.bias) {
      for (auto& b : *in.clf.bias) b = static_cast<float>(std::uniform_real_distribution<double>(-1, 1)(rng));
    }
    in.acts = random_matrix(rng, n, m, -1.0, 1.0);
    std::uniform_int_distribution<std::size_t> lab(0, ny - 1);
    for (std::size_t i = 0; i < n; ++i) in.labels.push_back(lab(rng));
    in.sim.values = random_matrix(rng, np * ny, m, -0.5, 0.5);
    if (away_from_kinks(in, 1e-2)) return in;
  }
}

// ---------------------------------------------------------------------------

void gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  const int n_instances = 24;
  const double h = 1e-3;
  double worst = 0.0;
  int bad = 0;
  for (int i = 0; i < n_instances; ++i) {
    const Instance in = random_instance(rng, i % 3);
    const double lambda = 0.5 + (i % 4) * 0.5;
    const Shadow s = shadow_of(in.clf);
    const auto ce_fd = central_difference(s, [&](const Shadow& x) { return oracle_ce(x, in.acts, in.labels); }, h);
    const auto ddo_fd = central_difference(s, [&](const Shadow& x) { return oracle_ddo(x, in.sim.values); }, h);
    std::vector<double> tot_fd(ce_fd.size());
    for (std::size_t j = 0; j < tot_fd.size(); ++j) tot_fd[j] = ce_fd[j] + lambda * ddo_fd[j];

    const auto ce = cross_entropy(in.clf, in.acts, in.labels);
    const auto ddo = ddo_loss(in.clf, in.sim);
    const auto tot = total_loss(in.clf, in.acts, in.labels, in.sim, lambda);
    const double errs[] = {relative_error(flatten(ce.grad), ce_fd), relative_error(flatten(ddo.grad), ddo_fd),
                           relative_error(flatten(tot.grad), tot_fd)};
    const double value_err = std::abs(ce.loss - oracle_ce(s, in.acts, in.labels)) +
                             std::abs(ddo.loss - oracle_ddo(s, in.sim.values));
    for (double e : errs) worst = std::max(worst, e);
    if (errs[0] > 1e-4 || errs[1] > 1e-4 || errs[2] > 1e-4 || value_err > 1e-6) ++bad;
  }
  const double secs = seconds_since(t0);
  report(bad == 0 && secs < 10.0, "gradient_correctness",
         std::to_string(n_instances) + " instances, worst relative error " + fmt("%.2e", worst) + ", " +
             fmt("%.2f", secs) + " s");
}

void baseline_recovery(const fs::path& work) {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto world = generate(spec);
    const auto data = world.experiment();
    const auto cfg = synthetic_train_config(0.0, seed);
    const auto with = train(data.train_activations(), data.train_labels, data.simulated(), cfg,
                            data.manifest.class_names, data.bank.names());
    const auto without = train(data.train_activations(), data.train_labels, SimulatedActivations{Matrix(0, data.bank.size())},
                               cfg, data.manifest.class_names, data.bank.names());
    const auto& a = with.classifier.weights.values();
    const auto& b = without.classifier.weights.values();
    const bool same_inproc = a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;

    // separately built binary with the regularizer compiled out
    const fs::path dir = work / ("recovery_" + std::to_string(seed));
    write_world(world, dir / "data");
    const std::string common = " train --data " + (dir / "data").string() + " --lambda 0 --preset synthetic --seed " +
                               std::to_string(seed);
    const int rc1 = shell(std::string(LANCE_CLI_PATH) + common + " --out " + (dir / "with").string());
    const int rc2 = shell(std::string(LANCE_NODDO_CLI_PATH) + common + " --out " + (dir / "without").string());
    bool same_build = false;
    if (rc1 == 0 && rc2 == 0) {
      const json m1 = json::parse(read_file(dir / "with" / "model.json"));
      const json m2 = json::parse(read_file(dir / "without" / "model.json"));
      same_build = m1.at("weights") == m2.at("weights") && m1.at("bias") == m2.at("bias");
    }
    ok = ok && same_inproc && same_build;
    detail += "seed " + std::to_string(seed) + (same_inproc && same_build ? " identical; " : " DIFFERS; ");
  }
  report(ok, "baseline_recovery", detail + "in-process and regularizer-free build");
}

void orthogonality_identity() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 6 + trial % 5, ny = 2 + trial % 4, rows = 1 + trial % (m - 2);
    const Matrix ahat = random_matrix(rng, rows, m, -1.0, 1.0);
    // orthonormal basis of the row space of a_hat, then project random rows off it
    std::vector<std::vector<double>> basis;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> v(ahat.row(r).begin(), ahat.row(r).end());
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) {
          double d = 0.0;
          for (std::size_t j = 0; j < m; ++j) d += v[j] * b[j];
          for (std::size_t j = 0; j < m; ++j) v[j] -= d * b[j];
        }
      }
      double n = 0.0;
      for (double x : v) n += x * x;
      n = std::sqrt(n);
      if (n < 1e-9) continue;
      for (double& x : v) x /= n;
      basis.push_back(v);
    }
    std::vector<std::string> cn(ny, "c"), mn(m, "k");
    for (std::size_t y = 0; y < ny; ++y) cn[y] += std::to_string(y);
    for (std::size_t j = 0; j < m; ++j) mn[j] += std::to_string(j);
    Classifier clf = Classifier::zeros(cn, mn);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t y = 0; y < ny; ++y) {
      std::vector<double> v(m);
      for (double& x : v) x = g(rng);
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) {
          double d = 0.0;
          for (std::size_t j = 0; j < m; ++j) d += v[j] * b[j];
          for (std::size_t j = 0; j < m; ++j) v[j] -= d * b[j];
        }
      }
      for (std::size_t j = 0; j < m; ++j) clf.weights(y, j) = static_cast<float>(v[j]);
    }
    worst = std::max(worst, ddo_loss(clf, SimulatedActivations{ahat}).loss);
  }
  report(worst <= 1e-7, "orthogonality_identity", "20 constructions, max loss " + fmt("%.2e", worst));
}

void homogeneity() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Instance in = random_instance(rng, 0);
    const double base = ddo_loss(in.clf, in.sim).loss;
    for (double k : {-2.0, 0.5, 3.0}) {
      Classifier scaled = in.clf;
      for (auto& v : scaled.weights.values()) v = static_cast<float>(k * v);
      const double got = ddo_loss(scaled, in.sim).loss;
      worst = std::max(worst, std::abs(got - std::abs(k) * base));
    }
  }
  report(worst <= 1e-5, "homogeneity", "k in {-2, 0.5, 3} over 20 instances, max deviation " + fmt("%.2e", worst));
}

void synthetic_criteria(const std::vector<std::uint64_t>& seeds, const fs::path& work) {
  double sum_dood = 0.0, sum_did = 0.0, slowest = 0.0;
  bool erasure_ok = true, js_ok = true;
  std::string erasure_detail, js_detail, effect_detail;
  std::vector<double> rhos;
  int ir_ok = 0;
  std::string ir_detail;

  for (std::uint64_t seed : seeds) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto world = generate(spec);
    const auto effect = verify_ddo_effect(world, synthetic_train_config(0.0), synthetic_train_config(1.0));
    slowest = std::max(slowest, seconds_since(t0));
    sum_dood += effect.delta_ood;
    sum_did += effect.delta_id;
    effect_detail += fmt("%+.3f", effect.delta_ood) + "/" + fmt("%+.3f", effect.delta_id) + " ";

    const double ratio = effect.specific_mass_ddo / effect.specific_mass_baseline;
    const bool e_ok = ratio < 0.5 && effect.classes_with_specific_in_top5_ddo == 0 &&
                      effect.classes_with_specific_in_top5_baseline >= 1;
    erasure_ok = erasure_ok && e_ok;
    erasure_detail += "ratio " + fmt("%.3f", ratio) + " top5 " +
                      std::to_string(effect.classes_with_specific_in_top5_baseline) + "->" +
                      std::to_string(effect.classes_with_specific_in_top5_ddo) + "; ";

    const auto stats = specificity_stats(world);
    js_ok = js_ok && stats.js_specific > stats.js_shared;
    js_detail += fmt("%.3f", stats.js_specific) + ">" + fmt("%.3f", stats.js_shared) + " ";

    const auto data = world.experiment();
    const auto sweep = sweep_descriptor_counts(data, {1, 2, 5, 10, data.n_descriptors()}, kDefaultAblationRepeats,
                                               synthetic_train_config(1.0), seed);
    rhos.push_back(sweep.spearman_count_vs_ood);

    // relevance split through the CLI's subset mode on files
    const fs::path dir = work / ("split_" + std::to_string(seed));
    write_world(world, dir / "data");
    std::string keywords;
    for (std::size_t d = 1; d < spec.domains.size(); ++d) keywords += spec.domains[d] + "\n";
    write_file(dir / "relevant_keywords.txt", keywords);
    const int rc = quiet_cli({"ablate", "subset", "--data", (dir / "data").string(), "--exclude-keywords",
                              (dir / "relevant_keywords.txt").string(), "--preset", "synthetic", "--seed", "0",
                              "--out", (dir / "out").string()});
    if (rc == 0) {
      const json cmp = json::parse(read_file(dir / "out" / "subset_comparison.json"));
      const double full = cmp.at("delta_ood_full").get<double>();
      const double ir = cmp.at("delta_ood_subset").get<double>();
      if (ir > 0.0 && ir < full) ++ir_ok;
      ir_detail += fmt("%.3f", ir) + "<" + fmt("%.3f", full) + " ";
    } else {
      ir_detail += "exit " + std::to_string(rc) + " ";
    }
  }
  const double n = static_cast<double>(seeds.size());
  const double mean_dood = sum_dood / n, mean_did = sum_did / n;
  report(mean_dood >= 0.03 && mean_did >= -0.01 && slowest < 60.0, "synthetic_ddo_effect",
         "mean dOOD " + fmt("%+.4f", mean_dood) + ", mean dID " + fmt("%+.4f", mean_did) + " (per seed dOOD/dID: " +
             effect_detail + "), slowest seed " + fmt("%.2f", slowest) + " s");
  report(erasure_ok, "concept_erasure_attribution", erasure_detail);
  report(js_ok, "js_ordering", "specific>shared per seed: " + js_detail);
  bool rho_ok = true;
  std::string rho_detail;
  for (double r : rhos) {
    rho_ok = rho_ok && r >= 0.8;
    rho_detail += fmt("%.2f", r) + " ";
  }
  report(rho_ok, "descriptor_count_monotonicity", "spearman per seed over {1,2,5,10,all}: " + rho_detail);
  const int need = static_cast<int>(std::ceil(0.8 * n));
  report(ir_ok >= need, "relevance_split",
         std::to_string(ir_ok) + "/" + std::to_string(seeds.size()) + " seeds with 0 < dOOD(IR) < dOOD(full): " +
             ir_detail);
}

template <class E>
bool rejects_with(const std::string& bytes) {
  try {
    parse_array_bytes(bytes);
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

std::string with_header(const std::string& dict, char major = 1, const std::string& payload = "") {
  std::string h = dict;
  const std::size_t total = 10 + h.size() + 1;
  h.append((total + 63) / 64 * 64 - total, ' ');
  h.push_back('\n');
  std::string out("\x93NUMPY", 6);
  out.push_back(major);
  out.push_back('\0');
  out.push_back(static_cast<char>(h.size() & 0xff));
  out.push_back(static_cast<char>(h.size() >> 8));
  return out + h + payload;
}

void format_round_trip(const fs::path& work) {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::size_t> dim(0, 40);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  int exact = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t r = i == 0 ? 0 : dim(rng), c = 1 + dim(rng);
    Matrix m(r, c);
    for (auto& v : m.values()) {
      v = static_cast<float>(u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10));
    }
    const fs::path p = work / "rt.npy";
    write_array_file(m, p);
    const Matrix back = read_array_file(p);
    const std::string raw = read_file(p);
    const bool aligned = (raw.size() - m.size() * 4) % 64 == 0;
    if (aligned && back.rows() == r && back.cols() == c &&
        std::memcmp(back.values().data(), m.values().data(), m.size() * sizeof(float)) == 0) {
      ++exact;
    }
  }
  const std::string good_dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }";
  const std::string payload(16, '\0');
  std::string bad_magic = with_header(good_dict, 1, payload);
  bad_magic[5] = 'X';
  const std::string header_only = with_header(good_dict, 1, "");
  struct Case {
    const char* name;
    bool rejected;
  };
  const Case cases[] = {
      {"magic", rejects_with<FormatError>(bad_magic)},
      {"empty", rejects_with<FormatError>(std::string())},
      {"version", rejects_with<UnsupportedFormat>(with_header(good_dict, 2, payload))},
      {"dtype f8", rejects_with<UnsupportedFormat>(with_header("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }", 1, payload))},
      {"big-endian", rejects_with<UnsupportedFormat>(with_header("{'descr': '>f4', 'fortran_order': False, 'shape': (2, 2), }", 1, payload))},
      {"fortran", rejects_with<UnsupportedFormat>(with_header("{'descr': '<f4', 'fortran_order': True, 'shape': (2, 2), }", 1, payload))},
      {"rank 3", rejects_with<UnsupportedFormat>(with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2, 1), }", 1, payload))},
      {"truncated payload", rejects_with<FormatError>(with_header(good_dict, 1, payload.substr(0, 9)))},
      {"truncated header", rejects_with<FormatError>(header_only.substr(0, 30))},
      {"missing shape", rejects_with<FormatError>(with_header("{'descr': '<f4', 'fortran_order': False, }", 1, payload))},
  };
  int rejected = 0;
  std::string missed;
  for (const auto& c : cases) {
    if (c.rejected) {
      ++rejected;
    } else {
      missed += std::string(" ") + c.name;
    }
  }
  const int n_cases = static_cast<int>(std::size(cases));
  report(exact == 100 && rejected == n_cases, "format_round_trip",
         std::to_string(exact) + "/100 bit-exact round trips, " + std::to_string(rejected) + "/" +
             std::to_string(n_cases) + " malformed files rejected with the right error" +
             (missed.empty() ? "" : " (missed:" + missed + ")"));
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), read_file(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

void determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  const std::string bin = std::string("LANCE_THREADS=1 ") + LANCE_CLI_PATH;
  const std::string data = (dir / "data").string();
  const auto run = [&]() {
    fs::remove_all(dir);
    int rc = shell(bin + " synth --seed 5 --out " + data);
    rc |= shell(bin + " train --data " + data + " --preset synthetic --seed 5 --out " + (dir / "train").string());
    rc |= shell(bin + " eval --data " + data + " --model " + (dir / "train" / "model.json").string() +
                " --top-k 5 --out " + (dir / "eval").string());
    return std::make_pair(rc, snapshot(dir));
  };
  const auto first = run();
  const auto second = run();
  const bool ok = first.first == 0 && second.first == 0 && first.second == second.second && !first.second.empty();
  report(ok, "determinism",
         "synth/train/eval twice with LANCE_THREADS=1: " + std::to_string(first.second.size()) + " files " +
             (first.second == second.second ? "byte-identical" : "DIFFER") +
             (first.first == 0 && second.first == 0 ? "" : " (nonzero exit)"));
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n_seeds = 5;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--seeds") n_seeds = std::stoul(argv[i + 1]);
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < n_seeds; ++s) seeds.push_back(s);

  const fs::path work = fs::temp_directory_path() / ("lance_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  try {
    gradient_correctness();
    baseline_recovery(work);
    orthogonality_identity();
    homogeneity();
    synthetic_criteria(seeds, work);
    format_round_trip(work);
    determinism(work);
  } catch (const std::exception& e) {
    report(false, "suite", std::string("uncaught exception: ") + e.what());
  }
  fs::remove_all(work);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
