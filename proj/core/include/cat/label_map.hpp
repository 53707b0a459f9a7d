#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cat/class_set.hpp"

namespace cat {

/// Position value stored for ignore-index pixels.
inline constexpr std::int32_t kIgnorePosition = -1;

/// Width x height grid of raw class indices over a ClassSet. Construction
/// validates every pixel and caches the per-pixel class position, which is
/// what the counting kernels consume.
class LabelMap {
 public:
  LabelMap(ClassSetPtr classes, std::size_t width, std::size_t height,
           std::vector<std::int32_t> values);

  /// Builds a map from class positions rather than raw indices.
  static LabelMap from_positions(ClassSetPtr classes, std::size_t width,
                                 std::size_t height,
                                 std::span<const std::int32_t> positions);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return values_.size(); }
  const ClassSetPtr& class_set() const noexcept { return classes_; }

  std::span<const std::int32_t> values() const noexcept { return values_; }
  std::span<const std::int32_t> positions() const noexcept { return positions_; }

  std::int32_t at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }

  bool operator==(const LabelMap& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           values_ == other.values_ && same_classes(classes_, other.classes_);
  }

 private:
  ClassSetPtr classes_;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::int32_t> values_;
  std::vector<std::int32_t> positions_;
};

/// Decodes a binary PGM (P5). Samples are one byte when maxval < 256, else two
/// bytes big-endian. Out-of-class pixels are reported with their (x,y).
LabelMap decode_pgm(std::string_view bytes, ClassSetPtr classes);
LabelMap load_label_map(const std::filesystem::path& path, ClassSetPtr classes);

/// Canonical encoding: "P5\n<w> <h>\n<maxval>\n" with maxval 255 when every
/// value fits in a byte and 65535 otherwise.
std::string encode_pgm(const LabelMap& map);
void save_label_map(const std::filesystem::path& path, const LabelMap& map);

/// Pixel counts per class position; ignore pixels are not counted.
std::vector<std::uint64_t> class_histogram(const LabelMap& map);

/// Output (x,y) takes input (floor(x*W/new_w), floor(y*H/new_h)).
LabelMap resize_nearest(const LabelMap& map, std::size_t new_width,
                        std::size_t new_height);

}  // namespace cat
