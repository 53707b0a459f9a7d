#include <cmath>
#include <cstdio>
#include <string>

#include "cat/affinity.hpp"
#include "cat/error.hpp"
#include "cat/fileio.hpp"
#include "cat/version.hpp"
#include "json.hpp"

namespace cat {

namespace {

std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_class_set(const nlohmann::ordered_json& j, const char* name_key, const char* hash_key,
                     const ClassSet& classes) {
  if (!j.contains(name_key) || !j[name_key].is_string()) {
    fail(ErrorKind::parse, std::string("affinity file needs a string \"") + name_key + "\"");
  }
  if (j[name_key].get<std::string>() != classes.name()) {
    fail(ErrorKind::dimension, std::string("affinity file ") + name_key + " is \"" +
                                   j[name_key].get<std::string>() + "\", expected \"" +
                                   classes.name() + "\"");
  }
  if (j.contains(hash_key) && j[hash_key].get<std::string>() != classes.content_hash()) {
    fail(ErrorKind::dimension, std::string("affinity file ") + hash_key +
                                   " does not match class set \"" + classes.name() + "\"");
  }
}

}  // namespace

std::string encode_affinity_json(const AffinityMatrix& a) {
  a.validate();
  std::string out = "{\n";
  auto field = [&](std::string_view key, const std::string& value) {
    out += "  " + json_string(key) + ": " + value + ",\n";
  };
  field("target_classes", json_string(a.target_classes->name()));
  field("source_classes", json_string(a.source_classes->name()));
  field("target_classes_hash", json_string(a.target_classes->content_hash()));
  field("source_classes_hash", json_string(a.source_classes->content_hash()));
  field("mode", json_string(to_string(a.mode)));
  field("method", json_string(a.method));
  field("normalized", a.normalized ? "true" : "false");
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  for (const auto& [k, flag] : a.flags) flags[a.target_classes->name_at(k)] = flag;
  field("flags", flags.dump());
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [path, hash] : a.inputs) inputs[path] = hash;
  field("inputs", inputs.dump());
  field("tool_version", json_string(kVersion));
  out += "  \"rows\": [";
  for (std::size_t k = 0; k < a.rows.rows(); ++k) {
    out += k == 0 ? "\n    [" : ",\n    [";
    const auto row = a.rows.row(k);
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (l) out += ", ";
      out += format_double(row[l]);
    }
    out += "]";
  }
  out += "\n  ]\n}\n";
  return out;
}

AffinityMatrix decode_affinity_json(std::string_view text, ClassSetPtr source_classes,
                                    ClassSetPtr target_classes) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, std::string("affinity file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::parse, "affinity file must be a JSON object");
  check_class_set(j, "target_classes", "target_classes_hash", *target_classes);
  check_class_set(j, "source_classes", "source_classes_hash", *source_classes);

  AffinityMatrix a;
  a.target_classes = std::move(target_classes);
  a.source_classes = std::move(source_classes);
  try {
    a.mode = parse_affinity_mode(j.at("mode").get<std::string>());
    a.method = j.at("method").get<std::string>();
    a.normalized = j.at("normalized").get<bool>();
    const auto& rows = j.at("rows");
    if (!rows.is_array() || rows.size() != a.target_classes->size()) {
      fail(ErrorKind::dimension, "affinity file has " + std::to_string(rows.size()) +
                                     " rows, expected " +
                                     std::to_string(a.target_classes->size()));
    }
    a.rows = Matrix(a.target_classes->size(), a.source_classes->size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (!rows[k].is_array() || rows[k].size() != a.source_classes->size()) {
        fail(ErrorKind::dimension, "affinity row " + std::to_string(k) + " has the wrong length");
      }
      for (std::size_t l = 0; l < rows[k].size(); ++l) a.rows(k, l) = rows[k][l].get<double>();
    }
    if (j.contains("flags")) {
      for (const auto& [name, flag] : j["flags"].items()) {
        const auto pos = a.target_classes->position_of_name(name);
        if (!pos) fail(ErrorKind::parse, "flag for unknown target class \"" + name + "\"");
        a.flags[*pos] = flag.get<std::string>();
      }
    }
    if (j.contains("inputs")) {
      for (const auto& [path, hash] : j["inputs"].items()) {
        a.inputs.emplace_back(path, hash.get<std::string>());
      }
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    fail(ErrorKind::parse, std::string("affinity file: ") + e.what());
  }
  a.validate();
  return a;
}

void save_affinity(const std::filesystem::path& path, const AffinityMatrix& a) {
  write_file_atomic(path, encode_affinity_json(a));
}

AffinityMatrix load_affinity(const std::filesystem::path& path, ClassSetPtr source_classes,
                             ClassSetPtr target_classes) {
  try {
    return decode_affinity_json(read_file(path), std::move(source_classes),
                                std::move(target_classes));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace cat
