#include "manifest.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include "cat/fileio.hpp"
#include "json.hpp"

namespace cat::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) {
    part = trim(part);
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s.front() == '-') {
    throw UsageError("not a non-negative integer: \"" + s + "\"");
  }
  return v;
}

}  // namespace

PipelineManifest load_manifest(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw UsageError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError("manifest " + path.string() + " must be a JSON object");

  const fs::path base = path.parent_path();
  PipelineManifest m;
  const std::map<std::string, std::optional<fs::path>*> paths = {
      {"source_classes", &m.source_classes},
      {"target_classes", &m.target_classes},
      {"gt_dir", &m.gt_dir},
      {"pred_dir", &m.pred_dir},
      {"source_maps_dir", &m.source_maps_dir},
      {"source_patches_dir", &m.source_patches_dir},
      {"target_maps_dir", &m.target_maps_dir},
      {"target_patches_dir", &m.target_patches_dir},
      {"source_embeddings", &m.source_embeddings},
      {"target_embeddings", &m.target_embeddings},
      {"confusion", &m.confusion},
      {"prototype", &m.prototype},
      {"text", &m.text},
      {"out", &m.out},
  };
  for (const auto& [key, value] : j.items()) {
    try {
      if (auto it = paths.find(key); it != paths.end()) {
        const fs::path p = value.get<std::string>();
        *it->second = p.is_absolute() ? p : base / p;
      } else if (key == "fallback_fid") {
        m.fallback_fid = value.get<std::map<std::string, double>>();
      } else if (key == "fallback_order") {
        m.fallback_order = value.get<std::vector<std::string>>();
      } else if (key == "zero_row_policy") {
        m.zero_row_policy = value.get<std::string>();
      } else if (key == "binarize") {
        m.binarize = value.get<bool>();
      } else {
        throw UsageError("manifest " + path.string() + ": unknown key \"" + key + "\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("manifest " + path.string() + ": bad value for \"" + key + "\": " + e.what());
    }
  }
  return m;
}

const fs::path& require_path(const std::optional<fs::path>& path, const std::string& what) {
  if (!path) throw UsageError("missing required input: " + what);
  std::error_code ec;
  if (!fs::is_regular_file(*path, ec)) {
    throw UsageError(what + " not found: " + path->string());
  }
  return *path;
}

const fs::path& require_dir(const std::optional<fs::path>& path, const std::string& what) {
  if (!path) throw UsageError("missing required input: " + what);
  std::error_code ec;
  if (!fs::is_directory(*path, ec)) throw UsageError(what + " is not a directory: " + path->string());
  return *path;
}

std::map<std::string, double> parse_score_list(const std::string& text) {
  std::map<std::string, double> scores;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("expected name=value, got \"" + item + "\"");
    const std::string name = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty() || !std::isfinite(v)) {
      throw UsageError("not a finite number: \"" + value + "\"");
    }
    if (!scores.emplace(name, v).second) throw UsageError("score for " + name + " given twice");
  }
  return scores;
}

std::vector<std::string> parse_name_list(const std::string& text) { return split(text, ','); }

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split(text, ',')) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(parse_u64(item));
      continue;
    }
    const auto lo = parse_u64(trim(item.substr(0, dash)));
    const auto hi = parse_u64(trim(item.substr(dash + 1)));
    if (hi < lo || hi - lo > 1000000) throw UsageError("bad seed range \"" + item + "\"");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

}  // namespace cat::cli
