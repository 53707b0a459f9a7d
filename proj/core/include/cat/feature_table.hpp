#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cat/matrix.hpp"

namespace cat {

/// N items x D features. Stored as float32 on disk and widened to double.
class FeatureTable {
 public:
  FeatureTable() = default;
  /// Throws on id/row count mismatch, duplicate ids or non-finite entries.
  FeatureTable(std::vector<std::string> item_ids, Matrix rows);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& rows() const noexcept { return rows_; }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }

 private:
  std::vector<std::string> ids_;
  Matrix rows_;
};

/// Per-patch features for one image, laid out grid_h x grid_w x dim.
struct PatchFeatureGrid {
  std::string image_id;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t patch_size = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> patch(std::size_t gy, std::size_t gx) const {
    return {data.data() + (gy * grid_w + gx) * dim, dim};
  }
  void validate() const;
};

// CATF: "CATF", u32 version=1, u32 N, u32 D, N*D float32, all little-endian.
std::string encode_catf(const Matrix& rows);
Matrix decode_catf(std::string_view bytes);

std::filesystem::path ids_sidecar_path(const std::filesystem::path& catf_path);

/// Writes the CATF payload and its `<file>.ids.json` sidecar.
void save_feature_table(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable load_feature_table(const std::filesystem::path& path);

// CATP: "CATP", u32 version=1, u32 grid_h, u32 grid_w, u32 patch_size, u32 D,
// then grid_h*grid_w*D float32.
std::string encode_catp(const PatchFeatureGrid& grid);
PatchFeatureGrid decode_catp(std::string_view bytes, std::string image_id);
void save_patch_grid(const std::filesystem::path& path, const PatchFeatureGrid& grid);
/// image_id is the file stem.
PatchFeatureGrid load_patch_grid(const std::filesystem::path& path);

}  // namespace cat
