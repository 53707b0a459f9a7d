#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cat/affinity.hpp"
#include "cat/label_map.hpp"

namespace cat {

/// Per-pixel distribution over source classes, pixel-major
/// (data[(y*width + x)*channels + c]). Ignore pixels hold all zeros and are
/// marked in `ignore`.
struct SoftLabelField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> ignore;

  std::span<const double> pixel(std::size_t x, std::size_t y) const {
    return {data.data() + (y * width + x) * channels, channels};
  }
};

/// Pixel of target class k receives row k of `a`.
SoftLabelField apply_soft(const AffinityMatrix& a, const LabelMap& target_map);

/// Relabels each pixel with the source class of its one-hot row. Ignore
/// pixels become the source set's ignore index, which must then exist.
LabelMap apply_hard(const AffinityMatrix& a, const LabelMap& target_map);

/// Per-pixel argmax of a soft field back to a source label map.
LabelMap collapse_argmax(const SoftLabelField& field, ClassSetPtr source_classes);

/// CATF (N = width*height, D = channels) + ids sidecar + `<file>.meta.json`.
void save_soft_field(const std::filesystem::path& path, const SoftLabelField& field,
                     const AffinityMatrix& a);

enum class WeightLayout { row_major_TxS, col_major_SxT };
std::string_view to_string(WeightLayout layout);
WeightLayout parse_weight_layout(std::string_view text);

/// Writes the matrix as a CATF weight (row_major_TxS: N=C_T, D=C_S;
/// col_major_SxT: the transpose) with ids sidecar and `<file>.meta.json`
/// carrying the affinity file's metadata.
void export_layer_weights(const AffinityMatrix& a, WeightLayout layout,
                          const std::filesystem::path& path);

/// Inverse of export_layer_weights; values are float32-rounded.
AffinityMatrix import_layer_weights(const std::filesystem::path& path,
                                    ClassSetPtr source_classes, ClassSetPtr target_classes);

std::filesystem::path meta_sidecar_path(const std::filesystem::path& catf_path);

}  // namespace cat
