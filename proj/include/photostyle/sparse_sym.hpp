#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "photostyle/error.hpp"

namespace photostyle {

template <typename Real>
struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  Real value;
};

/// Square symmetric matrix in compressed-row form. Both triangles are stored
/// so that a matvec is a single pass over the rows.
template <typename Real = double>
class SparseSym {
 public:
  SparseSym() = default;

  /// Sorts by (row, col) and sums duplicates. The sort is stable, so
  /// duplicates are summed in insertion order and the result does not depend
  /// on anything but the triplet sequence.
  static SparseSym from_triplets(std::size_t n, std::vector<Triplet<Real>> triplets) {
    std::stable_sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseSym m;
    m.n_ = n;
    m.row_offsets_.assign(n + 1, 0);
    m.col_indices_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
      const auto& t = triplets[k];
      if (t.row >= n || t.col >= n) {
        throw Error(ErrorCode::out_of_range, "triplet index outside matrix dimension");
      }
      Real sum = t.value;
      std::size_t next = k + 1;
      while (next < triplets.size() && triplets[next].row == t.row && triplets[next].col == t.col) {
        sum += triplets[next].value;
        ++next;
      }
      m.col_indices_.push_back(t.col);
      m.values_.push_back(sum);
      ++m.row_offsets_[t.row + 1];
      k = next;
    }
    for (std::size_t i = 0; i < n; ++i) m.row_offsets_[i + 1] += m.row_offsets_[i];
    return m;
  }

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  [[nodiscard]] std::span<const std::uint32_t> col_indices() const noexcept { return col_indices_; }
  [[nodiscard]] std::span<const Real> values() const noexcept { return values_; }

  [[nodiscard]] std::size_t row_nnz(std::size_t i) const {
    return row_offsets_[i + 1] - row_offsets_[i];
  }

  /// Entry (i, j), zero when not stored.
  [[nodiscard]] Real at(std::size_t i, std::size_t j) const {
    const auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(j));
    if (it == end || *it != j) return Real(0);
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }

  /// out = M * x
  void multiply(std::span<const Real> x, std::span<Real> out) const {
    check_length(x.size());
    check_length(out.size());
    for (std::size_t i = 0; i < n_; ++i) {
      Real sum = 0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        sum += values_[k] * x[col_indices_[k]];
      }
      out[i] = sum;
    }
  }

  /// xᵀ M x
  [[nodiscard]] Real quadratic_form(std::span<const Real> x) const {
    check_length(x.size());
    Real total = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      Real sum = 0;
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        sum += values_[k] * x[col_indices_[k]];
      }
      total += x[i] * sum;
    }
    return total;
  }

  [[nodiscard]] Real row_sum(std::size_t i) const {
    Real sum = 0;
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) sum += values_[k];
    return sum;
  }

  /// Largest |M(i,j) - M(j,i)|; a structurally missing mirror counts its full value.
  [[nodiscard]] Real max_asymmetry() const {
    Real worst = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        worst = std::max(worst, std::abs(values_[k] - at(col_indices_[k], i)));
      }
    }
    return worst;
  }

  [[nodiscard]] bool structurally_symmetric() const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const std::size_t j = col_indices_[k];
        const auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[j]);
        const auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[j + 1]);
        if (!std::binary_search(begin, end, static_cast<std::uint32_t>(i))) return false;
      }
    }
    return true;
  }

  /// Debug dump: "n nnz" header then "row col value" lines, row-major sorted,
  /// 17 significant digits.
  void write_triplets(std::ostream& out) const {
    out << n_ << ' ' << nnz() << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        out << i << ' ' << col_indices_[k] << ' ' << static_cast<double>(values_[k]) << '\n';
      }
    }
  }

  void write_triplets(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
    write_triplets(out);
  }

 private:
  void check_length(std::size_t len) const {
    if (len != n_) {
      throw Error(ErrorCode::dimension_mismatch, "vector length " + std::to_string(len) +
                                                     " != matrix dimension " + std::to_string(n_));
    }
  }

  std::size_t n_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::uint32_t> col_indices_;
  std::vector<Real> values_;
};

}  // namespace photostyle
