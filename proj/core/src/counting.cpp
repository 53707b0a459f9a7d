#include "cat/counting.hpp"

#include <numeric>
#include <string>

#include "cat/error.hpp"
#include "cat/parallel.hpp"

namespace cat {

std::uint64_t CountMatrix::row_sum(std::size_t r) const {
  std::uint64_t s = 0;
  for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c);
  return s;
}

std::uint64_t CountMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

CountMatrix& CountMatrix::operator+=(const CountMatrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) {
    fail(ErrorKind::dimension, "count matrix shapes differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

CountMatrix count_cooccurrences(const std::vector<LabelMap>& rows_maps,
                                const std::vector<LabelMap>& cols_maps) {
  if (rows_maps.empty()) fail(ErrorKind::dimension, "no label maps to count");
  if (rows_maps.size() != cols_maps.size()) {
    fail(ErrorKind::dimension, "paired map lists differ in length (" +
                                   std::to_string(rows_maps.size()) + " vs " +
                                   std::to_string(cols_maps.size()) + ")");
  }
  const auto& row_classes = rows_maps.front().class_set();
  const auto& col_classes = cols_maps.front().class_set();
  for (std::size_t m = 0; m < rows_maps.size(); ++m) {
    if (!same_classes(rows_maps[m].class_set(), row_classes) ||
        !same_classes(cols_maps[m].class_set(), col_classes)) {
      fail(ErrorKind::dimension, "map pair " + std::to_string(m) + " uses a different class set");
    }
    if (rows_maps[m].width() != cols_maps[m].width() ||
        rows_maps[m].height() != cols_maps[m].height()) {
      fail(ErrorKind::dimension,
           "map pair " + std::to_string(m) + " differs in size: " +
               std::to_string(rows_maps[m].width()) + "x" + std::to_string(rows_maps[m].height()) +
               " vs " + std::to_string(cols_maps[m].width()) + "x" +
               std::to_string(cols_maps[m].height()));
    }
  }

  const std::size_t n_rows = row_classes->size();
  const std::size_t n_cols = col_classes->size();
  std::vector<CountMatrix> per_image(rows_maps.size(), CountMatrix(n_rows, n_cols));
  parallel_for(rows_maps.size(), [&](std::size_t m) {
    const auto a = rows_maps[m].positions();
    const auto b = cols_maps[m].positions();
    auto& counts = per_image[m];
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == kIgnorePosition || b[i] == kIgnorePosition) continue;
      ++counts(static_cast<std::size_t>(a[i]), static_cast<std::size_t>(b[i]));
    }
  });
  CountMatrix total(n_rows, n_cols);
  for (const auto& counts : per_image) total += counts;
  return total;
}

}  // namespace cat
