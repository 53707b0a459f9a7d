#include "cat/transfer.hpp"

#include <string>

#include "cat/error.hpp"
#include "cat/fileio.hpp"
#include "cat/parallel.hpp"
#include "cat/version.hpp"
#include "json.hpp"

namespace cat {

namespace fs = std::filesystem;

namespace {

void require_target_match(const AffinityMatrix& a, const LabelMap& map) {
  if (!same_classes(a.target_classes, map.class_set())) {
    fail(ErrorKind::dimension, "label map class set '" + map.class_set()->name() +
                                   "' does not match affinity target classes '" +
                                   a.target_classes->name() + "'");
  }
}

nlohmann::ordered_json affinity_meta(const AffinityMatrix& a) {
  nlohmann::ordered_json meta;
  meta["target_classes"] = a.target_classes->name();
  meta["source_classes"] = a.source_classes->name();
  meta["target_classes_hash"] = a.target_classes->content_hash();
  meta["source_classes_hash"] = a.source_classes->content_hash();
  meta["mode"] = std::string(to_string(a.mode));
  meta["method"] = a.method;
  meta["normalized"] = a.normalized;
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  for (const auto& [k, flag] : a.flags) flags[a.target_classes->name_at(k)] = flag;
  meta["flags"] = flags;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [path, hash] : a.inputs) inputs[path] = hash;
  meta["inputs"] = inputs;
  meta["tool_version"] = kVersion;
  return meta;
}

}  // namespace

fs::path meta_sidecar_path(const fs::path& catf_path) {
  fs::path p = catf_path;
  p += ".meta.json";
  return p;
}

SoftLabelField apply_soft(const AffinityMatrix& a, const LabelMap& target_map) {
  require_target_match(a, target_map);
  SoftLabelField field;
  field.width = target_map.width();
  field.height = target_map.height();
  field.channels = a.rows.cols();
  field.data.assign(target_map.pixel_count() * field.channels, 0.0);
  field.ignore.assign(target_map.pixel_count(), 0);
  const auto positions = target_map.positions();
  parallel_for(field.height, [&](std::size_t y) {
    for (std::size_t x = 0; x < field.width; ++x) {
      const std::size_t i = y * field.width + x;
      if (positions[i] == kIgnorePosition) {
        field.ignore[i] = 1;
        continue;
      }
      const auto row = a.rows.row(static_cast<std::size_t>(positions[i]));
      std::copy(row.begin(), row.end(), field.data.begin() + static_cast<std::ptrdiff_t>(i * field.channels));
    }
  });
  return field;
}

LabelMap apply_hard(const AffinityMatrix& a, const LabelMap& target_map) {
  if (a.mode != AffinityMode::hard) {
    fail(ErrorKind::domain, "apply_hard needs a hard affinity matrix (got " +
                                std::string(to_string(a.mode)) + ")");
  }
  require_target_match(a, target_map);
  std::vector<std::int32_t> mapping(a.rows.rows());
  for (std::size_t k = 0; k < a.rows.rows(); ++k) {
    mapping[k] = static_cast<std::int32_t>(row_argmax(a.rows.row(k)));
  }
  const auto positions = target_map.positions();
  std::vector<std::int32_t> out(positions.size());
  bool has_ignore = false;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] == kIgnorePosition) {
      has_ignore = true;
      out[i] = kIgnorePosition;
    } else {
      out[i] = mapping[static_cast<std::size_t>(positions[i])];
    }
  }
  if (has_ignore && !a.source_classes->ignore_index()) {
    fail(ErrorKind::domain, "map has ignore pixels but source class set '" +
                                a.source_classes->name() + "' defines no ignore_index");
  }
  return LabelMap::from_positions(a.source_classes, target_map.width(), target_map.height(), out);
}

LabelMap collapse_argmax(const SoftLabelField& field, ClassSetPtr source_classes) {
  if (field.channels != source_classes->size()) {
    fail(ErrorKind::dimension, "soft field channels do not match the source class count");
  }
  std::vector<std::int32_t> positions(field.width * field.height);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (field.ignore[i]) {
      positions[i] = kIgnorePosition;
      continue;
    }
    std::span<const double> px(field.data.data() + i * field.channels, field.channels);
    positions[i] = static_cast<std::int32_t>(row_argmax(px));
  }
  return LabelMap::from_positions(std::move(source_classes), field.width, field.height, positions);
}

void save_soft_field(const fs::path& path, const SoftLabelField& field, const AffinityMatrix& a) {
  const std::size_t n = field.width * field.height;
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  save_feature_table(path, FeatureTable(std::move(ids), Matrix(n, field.channels, field.data)));
  auto meta = affinity_meta(a);
  meta["kind"] = "soft_label_field";
  meta["width"] = field.width;
  meta["height"] = field.height;
  meta["channels"] = field.channels;
  std::size_t ignored = 0;
  for (auto f : field.ignore) ignored += f;
  meta["ignore_pixels"] = ignored;
  meta["ignore_encoding"] = "all_zero";
  write_file_atomic(meta_sidecar_path(path), meta.dump(2) + "\n");
}

std::string_view to_string(WeightLayout layout) {
  return layout == WeightLayout::row_major_TxS ? "row_major_TxS" : "col_major_SxT";
}

WeightLayout parse_weight_layout(std::string_view text) {
  if (text == "row_major_TxS") return WeightLayout::row_major_TxS;
  if (text == "col_major_SxT") return WeightLayout::col_major_SxT;
  fail(ErrorKind::parse, "unknown weight layout \"" + std::string(text) +
                             "\" (expected row_major_TxS or col_major_SxT)");
}

void export_layer_weights(const AffinityMatrix& a, WeightLayout layout, const fs::path& path) {
  a.validate();
  if (!a.normalized) fail(ErrorKind::domain, "only normalized affinity matrices can be exported");
  const bool row_major = layout == WeightLayout::row_major_TxS;
  const ClassSet& row_classes = row_major ? *a.target_classes : *a.source_classes;
  std::vector<std::string> ids;
  for (const auto& entry : row_classes.classes()) ids.push_back(entry.name);
  save_feature_table(path, FeatureTable(std::move(ids), row_major ? a.rows : a.rows.transposed()));
  auto meta = affinity_meta(a);
  meta["kind"] = "affinity_weights";
  meta["layout"] = std::string(to_string(layout));
  meta["shape"] = {row_major ? a.rows.rows() : a.rows.cols(),
                   row_major ? a.rows.cols() : a.rows.rows()};
  write_file_atomic(meta_sidecar_path(path), meta.dump(2) + "\n");
}

AffinityMatrix import_layer_weights(const fs::path& path, ClassSetPtr source_classes,
                                    ClassSetPtr target_classes) {
  const FeatureTable table = load_feature_table(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(meta_sidecar_path(path)));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, meta_sidecar_path(path).string() + ": " + e.what());
  }
  AffinityMatrix a;
  a.source_classes = std::move(source_classes);
  a.target_classes = std::move(target_classes);
  try {
    if (meta.at("target_classes_hash").get<std::string>() != a.target_classes->content_hash() ||
        meta.at("source_classes_hash").get<std::string>() != a.source_classes->content_hash()) {
      fail(ErrorKind::dimension, path.string() + ": class sets do not match the exported weights");
    }
    const auto layout = parse_weight_layout(meta.at("layout").get<std::string>());
    a.rows = layout == WeightLayout::row_major_TxS ? table.rows() : table.rows().transposed();
    a.mode = parse_affinity_mode(meta.at("mode").get<std::string>());
    a.method = meta.at("method").get<std::string>();
    for (const auto& [name, flag] : meta.at("flags").items()) {
      if (auto pos = a.target_classes->position_of_name(name)) a.flags[*pos] = flag.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, meta_sidecar_path(path).string() + ": " + e.what());
  }
  // float32 storage perturbs row sums by ~1e-7; renormalize in double.
  a = normalize_rows(a, ZeroRowPolicy::keep_flagged);
  a.validate();
  return a;
}

}  // namespace cat
