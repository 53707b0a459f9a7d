#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cat::cli {

/// Bad invocation: unknown option, unresolvable path, malformed manifest.
/// Reported with exit code 2, before any computation starts.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional JSON file bundling the inputs of the affinity pipeline. Relative
/// paths resolve against the manifest's directory; command-line flags take
/// precedence over manifest entries.
struct PipelineManifest {
  std::optional<std::filesystem::path> source_classes;
  std::optional<std::filesystem::path> target_classes;
  std::optional<std::filesystem::path> gt_dir;
  std::optional<std::filesystem::path> pred_dir;
  std::optional<std::filesystem::path> source_maps_dir;
  std::optional<std::filesystem::path> source_patches_dir;
  std::optional<std::filesystem::path> target_maps_dir;
  std::optional<std::filesystem::path> target_patches_dir;
  std::optional<std::filesystem::path> source_embeddings;
  std::optional<std::filesystem::path> target_embeddings;
  std::optional<std::filesystem::path> confusion;
  std::optional<std::filesystem::path> prototype;
  std::optional<std::filesystem::path> text;
  std::optional<std::map<std::string, double>> fallback_fid;
  std::optional<std::vector<std::string>> fallback_order;
  std::optional<std::string> zero_row_policy;
  std::optional<bool> binarize;
  std::optional<std::filesystem::path> out;
};

PipelineManifest load_manifest(const std::filesystem::path& path);

/// Throws UsageError naming `what` when the path is unset or does not exist.
const std::filesystem::path& require_path(const std::optional<std::filesystem::path>& path,
                                          const std::string& what);
const std::filesystem::path& require_dir(const std::optional<std::filesystem::path>& path,
                                         const std::string& what);

/// "confusion=48.7,prototype=49.5,text=51.6"
std::map<std::string, double> parse_score_list(const std::string& text);
std::vector<std::string> parse_name_list(const std::string& text);
/// "0,1,2" or ranges "0-19", mixed freely.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace cat::cli
