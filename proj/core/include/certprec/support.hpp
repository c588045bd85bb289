#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "certprec/linalg.hpp"

namespace certprec {

/// Unordered index pair, normalized so that i < j.
struct Pair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;

  friend auto operator<=>(const Pair&, const Pair&) = default;
};

Pair make_pair_sorted(std::size_t a, std::size_t b);

/// Number of strictly upper-triangular pairs, p(p-1)/2.
constexpr std::size_t pair_count(std::size_t p) noexcept { return p * (p - 1) / 2; }

/// Lexicographic index of (i, j), i < j, among all pairs of a p x p matrix.
constexpr std::size_t pair_index(std::size_t i, std::size_t j, std::size_t p) noexcept {
  return i * p - i * (i + 1) / 2 + (j - i - 1);
}

/// Inverse of pair_index; table-based for repeated use.
class PairTable {
 public:
  explicit PairTable(std::size_t p);
  std::size_t dim() const noexcept { return p_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  const Pair& operator[](std::size_t idx) const noexcept { return pairs_[idx]; }
  std::size_t index(const Pair& e) const noexcept { return pair_index(e.i, e.j, p_); }

 private:
  std::size_t p_;
  std::vector<Pair> pairs_;
};

/// Binary support matrix Z: an explicit set of strictly upper-triangular pairs
/// plus an implicit unit diagonal.
class Support {
 public:
  Support() = default;
  explicit Support(std::size_t dim) : dim_(dim) {}
  /// Pairs are normalized (i < j), sorted and de-duplicated. Throws on
  /// out-of-range or diagonal entries.
  Support(std::size_t dim, std::vector<Pair> pairs);

  static Support full(std::size_t dim);
  static Support from_indices(std::size_t dim, std::span<const std::size_t> pair_indices);
  /// Off-diagonal entries with |value| > threshold.
  static Support from_matrix(const SymmetricMatrix& m, double threshold = 1e-10);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const std::vector<Pair>& pairs() const noexcept { return pairs_; }

  bool contains(std::size_t i, std::size_t j) const;
  std::vector<std::size_t> indices() const;
  /// Graph degree of every node, d_i = sum_{j != i} Z_ij.
  std::vector<std::size_t> degrees() const;

  friend bool operator==(const Support&, const Support&) = default;
  friend auto operator<=>(const Support& a, const Support& b) {
    if (auto c = a.dim_ <=> b.dim_; c != 0) return c;
    return a.pairs_ <=> b.pairs_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<Pair> pairs_;
};

}  // namespace certprec
