#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mffssim/error.hpp"
#include "mffssim/image.hpp"

namespace mffssim {

/// Per-patch choice of the sharpest source. Stored as the selected source
/// index per grid cell, which is the one-hot row m_i. with a single 1.
class FocusMap {
 public:
  FocusMap(std::size_t rows, std::size_t cols, std::size_t sources,
           std::vector<std::uint32_t> selection)
      : rows_(rows), cols_(cols), sources_(sources), selection_(std::move(selection)) {
    if (sources_ == 0) throw std::invalid_argument("focus map needs at least one source");
    if (selection_.size() != rows_ * cols_) {
      throw ShapeError("focus map has " + std::to_string(selection_.size()) + " entries for a " +
                       std::to_string(rows_) + "x" + std::to_string(cols_) + " grid");
    }
    for (auto k : selection_) {
      if (k >= sources_) {
        throw std::invalid_argument("focus map selects source " + std::to_string(k) + " of " +
                                    std::to_string(sources_));
      }
    }
  }

  static FocusMap uniform(const PatchGrid& grid, std::size_t sources, std::uint32_t source = 0) {
    return FocusMap(grid.rows(), grid.cols(), sources,
                    std::vector<std::uint32_t>(grid.patch_count(), source));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t source_count() const noexcept { return sources_; }
  std::size_t patch_count() const noexcept { return selection_.size(); }

  std::uint32_t selected(std::size_t patch) const { return selection_.at(patch); }
  std::uint32_t selected(std::size_t row, std::size_t col) const {
    return selection_.at(row * cols_ + col);
  }

  void select(std::size_t patch, std::uint32_t source) {
    if (source >= sources_) throw std::invalid_argument("source index out of range");
    selection_.at(patch) = source;
  }

  std::span<const std::uint32_t> selection() const noexcept { return selection_; }

  /// One-hot weights m_i. for patch i.
  std::vector<double> weights(std::size_t patch) const {
    std::vector<double> w(sources_, 0.0);
    w[selected(patch)] = 1.0;
    return w;
  }

  void require_matches(const PatchGrid& grid) const {
    if (grid.rows() != rows_ || grid.cols() != cols_) {
      throw ShapeError("focus map is " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                       " but the patch grid is " + std::to_string(grid.rows()) + "x" +
                       std::to_string(grid.cols()));
    }
  }

  friend bool operator==(const FocusMap&, const FocusMap&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::size_t sources_;
  std::vector<std::uint32_t> selection_;
};

/// Index of the single 1 in a one-hot weight row; throws otherwise.
inline std::uint32_t one_hot_index(std::span<const double> weights) {
  std::size_t hot = weights.size();
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] == 1.0) {
      if (hot != weights.size()) throw std::invalid_argument("weights select more than one source");
      hot = k;
    } else if (weights[k] != 0.0) {
      throw std::invalid_argument("weights must be 0 or 1");
    }
  }
  if (hot == weights.size()) throw std::invalid_argument("weights select no source");
  return static_cast<std::uint32_t>(hot);
}

}  // namespace mffssim
