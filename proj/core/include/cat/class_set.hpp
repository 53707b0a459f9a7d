#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cat {

struct ClassEntry {
  int index = 0;
  std::string name;

  bool operator==(const ClassEntry&) const = default;
};

/// Ordered label space. Matrices over a class set are indexed by *position*
/// in this ordering, never by the raw class index, so gaps in the index range
/// are allowed.
class ClassSet {
 public:
  /// Throws Error(invariant) on duplicate indices, duplicate names (compared
  /// case-folded and trimmed), an empty class list, negative indices, or an
  /// ignore index that collides with a class.
  ClassSet(std::string name, std::vector<ClassEntry> classes,
           std::optional<int> ignore_index = std::nullopt);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<ClassEntry>& classes() const noexcept { return classes_; }
  std::optional<int> ignore_index() const noexcept { return ignore_index_; }

  int index_at(std::size_t position) const { return classes_.at(position).index; }
  const std::string& name_at(std::size_t position) const {
    return classes_.at(position).name;
  }

  std::optional<std::size_t> position_of_index(int index) const;
  std::optional<std::size_t> position_of_name(std::string_view name) const;
  bool is_ignore(int value) const noexcept {
    return ignore_index_.has_value() && *ignore_index_ == value;
  }

  /// Compact manifest JSON with a fixed key order; the basis of content_hash.
  std::string to_json() const;
  /// SHA-256 of to_json().
  std::string content_hash() const;

  bool operator==(const ClassSet& other) const {
    return name_ == other.name_ && classes_ == other.classes_ &&
           ignore_index_ == other.ignore_index_;
  }

 private:
  std::string name_;
  std::vector<ClassEntry> classes_;
  std::optional<int> ignore_index_;
  std::vector<std::int32_t> position_lut_;  // raw index -> position, -1 if absent
};

using ClassSetPtr = std::shared_ptr<const ClassSet>;

/// Trimmed, ASCII-lowercased form used for name comparisons.
std::string normalize_class_name(std::string_view name);

ClassSetPtr parse_class_set(std::string_view json_text);
ClassSetPtr load_class_set(const std::filesystem::path& path);
void save_class_set(const std::filesystem::path& path, const ClassSet& classes);

bool same_classes(const ClassSetPtr& a, const ClassSetPtr& b);

}  // namespace cat
