#pragma once

// Dense row-major matrices and the handful of primitives the rest of the
// toolkit is built on. Storage is float; every dot product and reduction
// accumulates in double and rounds once at the end. Reductions run in
// sequential in-row order, and parallel work is partitioned by output row,
// so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace lance {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0F);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<float>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }

  /// Rows picked by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Caps internal parallelism. 0 means "use hardware concurrency".
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Runs body(begin, end) over disjoint chunks of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Independent, reproducible sub-seed for stream `counter` of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) noexcept;

double dot(std::span<const float> a, std::span<const float> b);
double norm(std::span<const float> a);

struct NormalizedRows {
  Matrix matrix;
  std::vector<std::size_t> zero_rows;
};

/// Scales each nonzero row to unit length. Zero rows pass through and are
/// listed in zero_rows. Throws InvalidValue on non-finite input.
NormalizedRows l2_normalize_rows(const Matrix& m);

/// Pairwise cosine similarity, shape a.rows() x b.rows().
Matrix cosine_similarity(const Matrix& a, const Matrix& b);

/// a * b^T with double accumulation.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);

Matrix log_softmax_rows(const Matrix& logits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  Matrix first_moment;
  Matrix second_moment;

  AdamState() = default;
  AdamState(const AdamConfig& cfg, std::size_t rows, std::size_t cols);
};

/// One bias-corrected Adam update, applied to param in place.
void adam_step(AdamState& state, Matrix& param, const Matrix& grad);

}  // namespace lance
