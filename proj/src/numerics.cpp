#include "lance/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "lance/error.hpp"

namespace lance {

namespace {

std::size_t env_threads() {
  if (const char* env = std::getenv("LANCE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 0;
}

std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> value{env_threads()};
  return value;
}

// below this many rows the fork/join costs more than it saves
constexpr std::size_t kMinRowsPerThread = 64;

void check_finite(const Matrix& m, const char* what) {
  if (!m.all_finite()) throw InvalidValue(std::string(what) + " contains non-finite values");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<float>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<float> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged row list");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) {
      throw IndexError("row " + std::to_string(indices[i]) + " out of range for " +
                       std::to_string(rows_) + " rows");
    }
    std::copy_n(data_.data() + indices[i] * cols_, cols_, out.data_.data() + i * cols_);
  }
  return out;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void set_thread_count(std::size_t threads) { thread_setting().store(threads); }

std::size_t thread_count() {
  const std::size_t t = thread_setting().load();
  if (t != 0) return t;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), n / kMinRowsPerThread);
  if (workers <= 1) {
    if (n > 0) body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
  // splitmix64 finalizer over (seed, counter)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

NormalizedRows l2_normalize_rows(const Matrix& m) {
  check_finite(m, "matrix");
  NormalizedRows out{m, {}};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm(m.row(r));
    if (n == 0.0) {
      out.zero_rows.push_back(r);
      continue;
    }
    auto row = out.matrix.row(r);
    for (auto& v : row) v = static_cast<float>(v / n);
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("inner dimensions differ: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.rows());
  parallel_for(a.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ai = a.row(i);
      for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = static_cast<float>(dot(ai, b.row(j)));
    }
  });
  return out;
}

Matrix cosine_similarity(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("dimension mismatch: " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  }
  check_finite(a, "left operand");
  check_finite(b, "right operand");
  std::vector<double> na(a.rows()), nb(b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    na[i] = norm(a.row(i));
    if (na[i] == 0.0) throw DegenerateRow(i, "zero row " + std::to_string(i) + " in left operand");
  }
  for (std::size_t j = 0; j < b.rows(); ++j) {
    nb[j] = norm(b.row(j));
    if (nb[j] == 0.0) throw DegenerateRow(j, "zero row " + std::to_string(j) + " in right operand");
  }
  Matrix out(a.rows(), b.rows());
  parallel_for(a.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto ai = a.row(i);
      for (std::size_t j = 0; j < b.rows(); ++j) {
        const double c = dot(ai, b.row(j)) / (na[i] * nb[j]);
        out(i, j) = static_cast<float>(std::clamp(c, -1.0, 1.0));
      }
    }
  });
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  check_finite(logits, "logits");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    if (row.empty()) continue;
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (float v : row) sum += std::exp(static_cast<double>(v) - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t c = 0; c < row.size(); ++c) out(r, c) = static_cast<float>(row[c] - lse);
  }
  return out;
}

void AdamConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

AdamState::AdamState(const AdamConfig& cfg, std::size_t rows, std::size_t cols)
    : config(cfg), first_moment(rows, cols), second_moment(rows, cols) {
  config.validate();
}

void adam_step(AdamState& state, Matrix& param, const Matrix& grad) {
  const auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols();
  };
  if (!same(param, grad) || !same(param, state.first_moment) || !same(param, state.second_moment)) {
    throw ShapeError("adam: parameter, gradient and moment shapes differ");
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  auto p = param.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double update = c.lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.epsilon);
    p[i] = static_cast<float>(p[i] - update);
  }
}

}  // namespace lance
