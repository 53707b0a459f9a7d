#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cat/class_set.hpp"
#include "cat/feature_table.hpp"
#include "cat/label_map.hpp"
#include "cat/matrix.hpp"

namespace cat {

enum class AffinityMode { soft, hard };

/// What happens to a row with no positive mass during normalization.
enum class ZeroRowPolicy {
  uniform,       // 1/C_S everywhere, flagged "zero_row"
  error,         // Error(numeric) naming the target class
  keep_flagged,  // left at zero, flagged "zero_row"
};

std::string_view to_string(AffinityMode mode);
std::string_view to_string(ZeroRowPolicy policy);
AffinityMode parse_affinity_mode(std::string_view text);
ZeroRowPolicy parse_zero_row_policy(std::string_view text);

/// Target x source class affinity. Row k is the mixture over source classes
/// that represents target class k, i.e. the weight of the linear layer that
/// maps a target one-hot map into the source label space.
struct AffinityMatrix {
  ClassSetPtr target_classes;
  ClassSetPtr source_classes;
  Matrix rows;  // C_T x C_S
  AffinityMode mode = AffinityMode::soft;
  std::string method;  // confusion | prototype | text | combined | manual | ...
  bool normalized = false;
  std::map<std::size_t, std::string> flags;  // target position -> flag
  /// Input content hashes recorded by whoever produced the matrix.
  std::vector<std::pair<std::string, std::string>> inputs;

  /// Checks shape against the class sets, plus the normalized and hard-mode
  /// invariants when they are claimed.
  void validate() const;
};

inline constexpr double kRowSumTolerance = 1e-9;

/// Column of the largest entry of `row`; ties go to the lowest column.
std::size_t row_argmax(std::span<const double> row);

AffinityMatrix normalize_rows(const AffinityMatrix& a,
                              ZeroRowPolicy policy = ZeroRowPolicy::uniform);

/// Row-normalized confusion between target ground truth and source-class
/// predictions on the same images.
AffinityMatrix confusion_affinity(const std::vector<LabelMap>& target_gt,
                                  const std::vector<LabelMap>& predicted_source,
                                  ZeroRowPolicy policy = ZeroRowPolicy::uniform);

/// One prototype per class, in class-position order. `empty` lists positions
/// whose total pixel weight was zero; their rows are zero vectors.
struct PrototypeSet {
  FeatureTable table;
  std::vector<std::size_t> empty;
};

/// Pixel-count weighted mean of patch features per class. Grids are matched
/// to maps by position in the lists; a grid must cover its map, overshooting
/// by less than one patch (pixels outside the image carry no weight).
PrototypeSet prototype_from_patches(const std::vector<PatchFeatureGrid>& grids,
                                    const std::vector<LabelMap>& maps);

/// Cosine affinity between per-class vectors. Rows of both tables follow the
/// class-position order of their class set. Negative cosines are clamped to
/// zero and zero-norm vectors contribute zero before row normalization.
AffinityMatrix prototype_affinity(const FeatureTable& source_protos,
                                  const FeatureTable& target_protos,
                                  ClassSetPtr source_classes, ClassSetPtr target_classes,
                                  ZeroRowPolicy policy = ZeroRowPolicy::uniform);

/// Same computation as prototype_affinity over class-name embeddings. Table
/// rows are matched to classes by item id (normalized class name), so the
/// tables may be in any order.
AffinityMatrix text_affinity(const FeatureTable& source_names,
                             const FeatureTable& target_names,
                             ClassSetPtr source_classes, ClassSetPtr target_classes,
                             ZeroRowPolicy policy = ZeroRowPolicy::uniform);

/// One-hot rows at the argmax (lowest column on ties).
AffinityMatrix binarize_hard(const AffinityMatrix& a);

enum class AffinityMethod { confusion = 0, prototype = 1, text = 2 };
std::string_view to_string(AffinityMethod method);
AffinityMethod parse_affinity_method(std::string_view text);

/// Tie-break for majority voting: either per-method training-free FID
/// (lower is better) or an explicit best-first priority order.
class FallbackRanking {
 public:
  static FallbackRanking from_scores(const std::map<std::string, double>& fid_by_method);
  static FallbackRanking from_order(const std::vector<std::string>& best_first);

  /// Method to trust when all three estimators disagree.
  AffinityMethod best() const { return order_.front(); }
  const std::vector<AffinityMethod>& order() const { return order_; }
  const std::optional<std::map<std::string, double>>& scores() const { return scores_; }

 private:
  std::vector<AffinityMethod> order_;
  std::optional<std::map<std::string, double>> scores_;
};

/// Per target class: the source class picked by at least two estimators'
/// argmaxes, else the argmax of the fallback-best estimator. Rows decided by
/// the fallback are flagged "vote_fallback".
AffinityMatrix combine_majority(const AffinityMatrix& confusion,
                                const AffinityMatrix& prototype,
                                const AffinityMatrix& text,
                                const FallbackRanking& fallback);

/// JSON affinity file; floats written with 17 significant digits.
std::string encode_affinity_json(const AffinityMatrix& a);
AffinityMatrix decode_affinity_json(std::string_view text, ClassSetPtr source_classes,
                                    ClassSetPtr target_classes);
void save_affinity(const std::filesystem::path& path, const AffinityMatrix& a);
AffinityMatrix load_affinity(const std::filesystem::path& path, ClassSetPtr source_classes,
                             ClassSetPtr target_classes);

}  // namespace cat
