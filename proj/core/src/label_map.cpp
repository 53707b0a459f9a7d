#include "cat/label_map.hpp"

#include <cctype>
#include <string>

#include "cat/error.hpp"
#include "cat/fileio.hpp"

namespace cat {

LabelMap::LabelMap(ClassSetPtr classes, std::size_t width, std::size_t height,
                   std::vector<std::int32_t> values)
    : classes_(std::move(classes)), width_(width), height_(height), values_(std::move(values)) {
  if (!classes_) fail(ErrorKind::invariant, "label map requires a class set");
  if (width_ == 0 || height_ == 0) fail(ErrorKind::invariant, "label map has zero extent");
  if (values_.size() != width_ * height_) {
    fail(ErrorKind::invariant, "label map data length " + std::to_string(values_.size()) +
                                   " != " + std::to_string(width_) + "x" +
                                   std::to_string(height_));
  }
  positions_.resize(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto v = values_[i];
    if (auto pos = classes_->position_of_index(v)) {
      positions_[i] = static_cast<std::int32_t>(*pos);
    } else if (classes_->is_ignore(v)) {
      positions_[i] = kIgnorePosition;
    } else {
      fail(ErrorKind::invariant, "pixel (" + std::to_string(i % width_) + "," +
                                     std::to_string(i / width_) + ") has value " +
                                     std::to_string(v) + " outside class set '" +
                                     classes_->name() + "'");
    }
  }
}

LabelMap LabelMap::from_positions(ClassSetPtr classes, std::size_t width, std::size_t height,
                                  std::span<const std::int32_t> positions) {
  std::vector<std::int32_t> values(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto pos = positions[i];
    if (pos == kIgnorePosition) {
      if (!classes->ignore_index()) {
        fail(ErrorKind::invariant, "class set '" + classes->name() + "' has no ignore index");
      }
      values[i] = *classes->ignore_index();
    } else {
      values[i] = classes->index_at(static_cast<std::size_t>(pos));
    }
  }
  return LabelMap(std::move(classes), width, height, std::move(values));
}

namespace {

class PgmReader {
 public:
  explicit PgmReader(std::string_view bytes) : bytes_(bytes) {}

  void expect_magic() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '5') {
      fail(ErrorKind::parse, "not a binary PGM (missing P5 magic)");
    }
    pos_ = 2;
  }

  // Header integer preceded by whitespace and '#' comments.
  std::uint64_t header_int(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      fail(ErrorKind::parse, std::string("PGM header: expected ") + what);
    }
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::uint64_t>(bytes_[pos_] - '0');
      if (value > (1u << 30)) fail(ErrorKind::parse, std::string("PGM header: ") + what + " too large");
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates the header from the raster.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail(ErrorKind::parse, "PGM header: missing whitespace after maxval");
    }
    ++pos_;
  }

  std::string_view rest() const { return bytes_.substr(pos_); }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

LabelMap decode_pgm(std::string_view bytes, ClassSetPtr classes) {
  PgmReader reader(bytes);
  reader.expect_magic();
  const auto width = reader.header_int("width");
  const auto height = reader.header_int("height");
  const auto maxval = reader.header_int("maxval");
  if (width == 0 || height == 0) fail(ErrorKind::parse, "PGM has zero width or height");
  if (maxval == 0 || maxval > 65535) {
    fail(ErrorKind::parse, "PGM maxval must be in [1, 65535], got " + std::to_string(maxval));
  }
  reader.end_header();
  const std::size_t sample_bytes = maxval < 256 ? 1 : 2;
  const std::size_t count = width * height;
  const auto raster = reader.rest();
  if (raster.size() < count * sample_bytes) {
    fail(ErrorKind::parse, "PGM raster truncated: " + std::to_string(raster.size()) +
                               " bytes, expected " + std::to_string(count * sample_bytes));
  }
  std::vector<std::int32_t> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v;
    if (sample_bytes == 1) {
      v = static_cast<unsigned char>(raster[i]);
    } else {
      v = (static_cast<std::uint32_t>(static_cast<unsigned char>(raster[2 * i])) << 8) |
          static_cast<unsigned char>(raster[2 * i + 1]);
    }
    if (v > maxval) {
      fail(ErrorKind::parse, "PGM sample " + std::to_string(v) + " at (" +
                                 std::to_string(i % width) + "," + std::to_string(i / width) +
                                 ") exceeds maxval " + std::to_string(maxval));
    }
    values[i] = static_cast<std::int32_t>(v);
  }
  return LabelMap(std::move(classes), width, height, std::move(values));
}

LabelMap load_label_map(const std::filesystem::path& path, ClassSetPtr classes) {
  try {
    return decode_pgm(read_file(path), std::move(classes));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const LabelMap& map) {
  std::int32_t max_value = 0;
  for (auto v : map.values()) {
    if (v < 0 || v > 65535) {
      fail(ErrorKind::domain, "value " + std::to_string(v) + " cannot be stored in a PGM");
    }
    max_value = std::max(max_value, v);
  }
  const bool wide = max_value > 255;
  std::string out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) +
                    "\n" + (wide ? "65535" : "255") + "\n";
  const std::size_t header = out.size();
  out.resize(header + map.pixel_count() * (wide ? 2 : 1));
  std::size_t at = header;
  for (auto v : map.values()) {
    if (wide) {
      out[at++] = static_cast<char>((v >> 8) & 0xFF);
    }
    out[at++] = static_cast<char>(v & 0xFF);
  }
  return out;
}

void save_label_map(const std::filesystem::path& path, const LabelMap& map) {
  write_file_atomic(path, encode_pgm(map));
}

std::vector<std::uint64_t> class_histogram(const LabelMap& map) {
  std::vector<std::uint64_t> counts(map.class_set()->size(), 0);
  for (auto pos : map.positions()) {
    if (pos != kIgnorePosition) ++counts[static_cast<std::size_t>(pos)];
  }
  return counts;
}

LabelMap resize_nearest(const LabelMap& map, std::size_t new_width, std::size_t new_height) {
  if (new_width == 0 || new_height == 0) {
    fail(ErrorKind::domain, "resize target must be at least 1x1");
  }
  const std::size_t w = map.width();
  const std::size_t h = map.height();
  std::vector<std::int32_t> out(new_width * new_height);
  const auto in = map.values();
  for (std::size_t y = 0; y < new_height; ++y) {
    const std::size_t sy = y * h / new_height;
    for (std::size_t x = 0; x < new_width; ++x) {
      out[y * new_width + x] = in[sy * w + x * w / new_width];
    }
  }
  return LabelMap(map.class_set(), new_width, new_height, std::move(out));
}

}  // namespace cat
