#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cat/label_map.hpp"

namespace cat {

/// Integer co-occurrence counts between the class positions of two paired map
/// lists. Row = position in the first list's class set, column = position in
/// the second's. Pixels that are ignore in either map are skipped.
class CountMatrix {
 public:
  CountMatrix() = default;
  CountMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), counts_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint64_t& operator()(std::size_t r, std::size_t c) { return counts_[r * cols_ + c]; }
  std::uint64_t operator()(std::size_t r, std::size_t c) const {
    return counts_[r * cols_ + c];
  }
  std::uint64_t row_sum(std::size_t r) const;
  std::uint64_t total() const;

  CountMatrix& operator+=(const CountMatrix& other);
  bool operator==(const CountMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Throws Error(dimension) on an empty list, list length mismatch, differing
/// class sets within a list, or differing dimensions within a pair. Images are
/// counted in parallel and summed as integers, so the result is independent
/// of order and thread count.
CountMatrix count_cooccurrences(const std::vector<LabelMap>& rows_maps,
                                const std::vector<LabelMap>& cols_maps);

}  // namespace cat
