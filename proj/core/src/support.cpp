#include "certprec/support.hpp"

#include <algorithm>
#include <cmath>

#include "certprec/error.hpp"

namespace certprec {

Pair make_pair_sorted(std::size_t a, std::size_t b) {
  if (a == b) fail(ErrorKind::kInvalidInput, "pair on the diagonal: " + std::to_string(a));
  if (a > b) std::swap(a, b);
  return Pair{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
}

PairTable::PairTable(std::size_t p) : p_(p) {
  pairs_.reserve(pair_count(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      pairs_.push_back(Pair{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    }
  }
}

Support::Support(std::size_t dim, std::vector<Pair> pairs) : dim_(dim), pairs_(std::move(pairs)) {
  for (Pair& e : pairs_) {
    if (e.i == e.j) fail(ErrorKind::kInvalidInput, "support pair on the diagonal");
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.j >= dim_) {
      fail(ErrorKind::kInvalidInput, "support pair (" + std::to_string(e.i) + "," +
                                         std::to_string(e.j) + ") out of range for p=" +
                                         std::to_string(dim_));
    }
  }
  std::sort(pairs_.begin(), pairs_.end());
  pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
}

Support Support::full(std::size_t dim) {
  PairTable table(dim);
  std::vector<Pair> pairs;
  pairs.reserve(table.size());
  for (std::size_t k = 0; k < table.size(); ++k) pairs.push_back(table[k]);
  return Support(dim, std::move(pairs));
}

Support Support::from_indices(std::size_t dim, std::span<const std::size_t> pair_indices) {
  PairTable table(dim);
  std::vector<Pair> pairs;
  pairs.reserve(pair_indices.size());
  for (std::size_t idx : pair_indices) {
    if (idx >= table.size()) fail(ErrorKind::kInvalidInput, "pair index out of range");
    pairs.push_back(table[idx]);
  }
  return Support(dim, std::move(pairs));
}

Support Support::from_matrix(const SymmetricMatrix& m, double threshold) {
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (std::size_t j = i + 1; j < m.dim(); ++j) {
      if (std::abs(m(i, j)) > threshold) {
        pairs.push_back(Pair{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
      }
    }
  }
  return Support(m.dim(), std::move(pairs));
}

bool Support::contains(std::size_t i, std::size_t j) const {
  if (i == j) return i < dim_;
  const Pair e = make_pair_sorted(i, j);
  return std::binary_search(pairs_.begin(), pairs_.end(), e);
}

std::vector<std::size_t> Support::indices() const {
  std::vector<std::size_t> out;
  out.reserve(pairs_.size());
  for (const Pair& e : pairs_) out.push_back(pair_index(e.i, e.j, dim_));
  return out;
}

std::vector<std::size_t> Support::degrees() const {
  std::vector<std::size_t> deg(dim_, 0);
  for (const Pair& e : pairs_) {
    ++deg[e.i];
    ++deg[e.j];
  }
  return deg;
}

}  // namespace certprec
