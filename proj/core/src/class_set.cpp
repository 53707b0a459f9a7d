#include "cat/class_set.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "cat/error.hpp"
#include "cat/fileio.hpp"
#include "json.hpp"

namespace cat {

namespace {

constexpr int kMaxClassIndex = 1 << 20;

}  // namespace

std::string normalize_class_name(std::string_view name) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t begin = 0;
  std::size_t end = name.size();
  while (begin < end && is_space(static_cast<unsigned char>(name[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(name[end - 1]))) --end;
  std::string out(name.substr(begin, end - begin));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

ClassSet::ClassSet(std::string name, std::vector<ClassEntry> classes,
                   std::optional<int> ignore_index)
    : name_(std::move(name)), classes_(std::move(classes)), ignore_index_(ignore_index) {
  if (classes_.empty()) fail(ErrorKind::invariant, "class set '" + name_ + "' is empty");
  int max_index = 0;
  std::set<std::string> names;
  for (const auto& entry : classes_) {
    if (entry.index < 0 || entry.index > kMaxClassIndex) {
      fail(ErrorKind::invariant, "class index out of range: " + std::to_string(entry.index) +
                                     " (" + entry.name + ")");
    }
    if (!names.insert(normalize_class_name(entry.name)).second) {
      fail(ErrorKind::invariant, "duplicate class name: \"" + entry.name + "\"");
    }
    max_index = std::max(max_index, entry.index);
  }
  position_lut_.assign(static_cast<std::size_t>(max_index) + 1, -1);
  for (std::size_t pos = 0; pos < classes_.size(); ++pos) {
    auto& slot = position_lut_[static_cast<std::size_t>(classes_[pos].index)];
    if (slot != -1) {
      fail(ErrorKind::invariant, "duplicate class index " +
                                     std::to_string(classes_[pos].index) + " (\"" +
                                     classes_[pos].name + "\")");
    }
    slot = static_cast<std::int32_t>(pos);
  }
  if (ignore_index_ && position_of_index(*ignore_index_)) {
    fail(ErrorKind::invariant,
         "ignore_index " + std::to_string(*ignore_index_) + " collides with a class index");
  }
}

std::optional<std::size_t> ClassSet::position_of_index(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= position_lut_.size()) return std::nullopt;
  const auto pos = position_lut_[static_cast<std::size_t>(index)];
  if (pos < 0) return std::nullopt;
  return static_cast<std::size_t>(pos);
}

std::optional<std::size_t> ClassSet::position_of_name(std::string_view name) const {
  const std::string wanted = normalize_class_name(name);
  for (std::size_t pos = 0; pos < classes_.size(); ++pos) {
    if (normalize_class_name(classes_[pos].name) == wanted) return pos;
  }
  return std::nullopt;
}

std::string ClassSet::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name_;
  j["ignore_index"] = ignore_index_ ? nlohmann::ordered_json(*ignore_index_)
                                    : nlohmann::ordered_json(nullptr);
  auto& list = j["classes"] = nlohmann::ordered_json::array();
  for (const auto& entry : classes_) {
    list.push_back({{"index", entry.index}, {"name", entry.name}});
  }
  return j.dump();
}

std::string ClassSet::content_hash() const { return sha256_hex(to_json()); }

ClassSetPtr parse_class_set(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, std::string("class-set manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::parse, "class-set manifest must be a JSON object");
  if (!j.contains("name") || !j["name"].is_string()) {
    fail(ErrorKind::parse, "class-set manifest needs a string \"name\"");
  }
  std::optional<int> ignore;
  if (j.contains("ignore_index") && !j["ignore_index"].is_null()) {
    if (!j["ignore_index"].is_number_integer()) {
      fail(ErrorKind::parse, "\"ignore_index\" must be an integer or null");
    }
    ignore = j["ignore_index"].get<int>();
  }
  if (!j.contains("classes") || !j["classes"].is_array()) {
    fail(ErrorKind::parse, "class-set manifest needs a \"classes\" array");
  }
  std::vector<ClassEntry> classes;
  for (std::size_t i = 0; i < j["classes"].size(); ++i) {
    const auto& item = j["classes"][i];
    if (!item.is_object() || !item.contains("index") || !item["index"].is_number_integer() ||
        !item.contains("name") || !item["name"].is_string()) {
      fail(ErrorKind::parse, "classes[" + std::to_string(i) +
                                 "] must be {\"index\": int, \"name\": str}: " + item.dump());
    }
    classes.push_back({item["index"].get<int>(), item["name"].get<std::string>()});
  }
  return std::make_shared<const ClassSet>(j["name"].get<std::string>(), std::move(classes),
                                          ignore);
}

ClassSetPtr load_class_set(const std::filesystem::path& path) {
  return parse_class_set(read_file(path));
}

void save_class_set(const std::filesystem::path& path, const ClassSet& classes) {
  write_file_atomic(path, classes.to_json() + "\n");
}

bool same_classes(const ClassSetPtr& a, const ClassSetPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

}  // namespace cat
