#include "cat/feature_table.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <set>

#include "cat/error.hpp"
#include "cat/fileio.hpp"
#include "json.hpp"

namespace cat {

namespace fs = std::filesystem;

FeatureTable::FeatureTable(std::vector<std::string> item_ids, Matrix rows)
    : ids_(std::move(item_ids)), rows_(std::move(rows)) {
  if (ids_.size() != rows_.rows()) {
    fail(ErrorKind::invariant, "feature table has " + std::to_string(ids_.size()) +
                                   " ids for " + std::to_string(rows_.rows()) + " rows");
  }
  std::set<std::string_view> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) fail(ErrorKind::invariant, "duplicate item id \"" + id + "\"");
  }
  for (std::size_t i = 0; i < rows_.rows(); ++i) {
    for (double v : rows_.row(i)) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::numeric, "non-finite feature in row " + std::to_string(i) + " (\"" +
                                     ids_[i] + "\")");
      }
    }
  }
}

void PatchFeatureGrid::validate() const {
  if (grid_h == 0 || grid_w == 0 || patch_size == 0 || dim == 0) {
    fail(ErrorKind::invariant, "patch grid '" + image_id + "' has a zero extent");
  }
  if (data.size() != grid_h * grid_w * dim) {
    fail(ErrorKind::invariant, "patch grid '" + image_id + "' payload length mismatch");
  }
  for (double v : data) {
    if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite patch feature in '" + image_id + "'");
  }
}

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian targets are not supported");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, double value) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) fail(ErrorKind::domain, std::string(what) + " exceeds u32 range");
  return static_cast<std::uint32_t>(v);
}

class LeReader {
 public:
  LeReader(std::string_view bytes, const char* format) : bytes_(bytes), format_(format) {}

  void magic(std::string_view expected) {
    if (bytes_.substr(0, 4) != expected) {
      fail(ErrorKind::parse, std::string(format_) + ": bad magic");
    }
    pos_ = 4;
  }

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) fail(ErrorKind::parse, std::string(format_) + ": truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::vector<double> floats(std::uint64_t count) {
    const std::uint64_t need = count * 4;
    const std::uint64_t have = bytes_.size() - pos_;
    if (have < need) {
      fail(ErrorKind::parse, std::string(format_) + ": payload truncated (" +
                                 std::to_string(have) + " bytes, expected " +
                                 std::to_string(need) + ")");
    }
    if (have > need) {
      fail(ErrorKind::parse, std::string(format_) + ": " + std::to_string(have - need) +
                                 " trailing bytes after payload");
    }
    std::vector<double> out(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const float f = std::bit_cast<float>(u32());
      if (!std::isfinite(f)) {
        fail(ErrorKind::numeric, std::string(format_) + ": non-finite value at element " +
                                     std::to_string(i));
      }
      out[i] = f;
    }
    return out;
  }

 private:
  std::string_view bytes_;
  const char* format_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_catf(const Matrix& rows) {
  std::string out = "CATF";
  out.reserve(16 + rows.data().size() * 4);
  put_u32(out, 1);
  put_u32(out, checked_u32(rows.rows(), "N"));
  put_u32(out, checked_u32(rows.cols(), "D"));
  for (double v : rows.data()) put_f32(out, v);
  return out;
}

Matrix decode_catf(std::string_view bytes) {
  LeReader reader(bytes, "CATF");
  reader.magic("CATF");
  const auto version = reader.u32();
  if (version != 1) fail(ErrorKind::parse, "CATF: unsupported version " + std::to_string(version));
  const std::uint64_t n = reader.u32();
  const std::uint64_t d = reader.u32();
  return Matrix(n, d, reader.floats(n * d));
}

fs::path ids_sidecar_path(const fs::path& catf_path) {
  fs::path p = catf_path;
  p += ".ids.json";
  return p;
}

void save_feature_table(const fs::path& path, const FeatureTable& table) {
  nlohmann::ordered_json ids = {{"items", table.ids()}};
  write_file_atomic(path, encode_catf(table.rows()));
  write_file_atomic(ids_sidecar_path(path), ids.dump() + "\n");
}

FeatureTable load_feature_table(const fs::path& path) {
  Matrix rows;
  try {
    rows = decode_catf(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
  const auto sidecar = ids_sidecar_path(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(sidecar));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, sidecar.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("items") || !j["items"].is_array()) {
    fail(ErrorKind::parse, sidecar.string() + ": expected {\"items\": [str, ...]}");
  }
  std::vector<std::string> ids;
  for (const auto& item : j["items"]) {
    if (!item.is_string()) fail(ErrorKind::parse, sidecar.string() + ": item ids must be strings");
    ids.push_back(item.get<std::string>());
  }
  return FeatureTable(std::move(ids), std::move(rows));
}

std::string encode_catp(const PatchFeatureGrid& grid) {
  grid.validate();
  std::string out = "CATP";
  out.reserve(24 + grid.data.size() * 4);
  put_u32(out, 1);
  put_u32(out, checked_u32(grid.grid_h, "grid_h"));
  put_u32(out, checked_u32(grid.grid_w, "grid_w"));
  put_u32(out, checked_u32(grid.patch_size, "patch_size"));
  put_u32(out, checked_u32(grid.dim, "D"));
  for (double v : grid.data) put_f32(out, v);
  return out;
}

PatchFeatureGrid decode_catp(std::string_view bytes, std::string image_id) {
  LeReader reader(bytes, "CATP");
  reader.magic("CATP");
  const auto version = reader.u32();
  if (version != 1) fail(ErrorKind::parse, "CATP: unsupported version " + std::to_string(version));
  PatchFeatureGrid grid;
  grid.image_id = std::move(image_id);
  grid.grid_h = reader.u32();
  grid.grid_w = reader.u32();
  grid.patch_size = reader.u32();
  grid.dim = reader.u32();
  grid.data = reader.floats(static_cast<std::uint64_t>(grid.grid_h) * grid.grid_w * grid.dim);
  grid.validate();
  return grid;
}

void save_patch_grid(const fs::path& path, const PatchFeatureGrid& grid) {
  write_file_atomic(path, encode_catp(grid));
}

PatchFeatureGrid load_patch_grid(const fs::path& path) {
  try {
    return decode_catp(read_file(path), path.stem().string());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace cat
