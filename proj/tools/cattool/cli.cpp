#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "cat/affinity.hpp"
#include "cat/error.hpp"
#include "cat/fileio.hpp"
#include "cat/metrics.hpp"
#include "cat/parallel.hpp"
#include "cat/sampling.hpp"
#include "cat/text_embedding.hpp"
#include "cat/toylab.hpp"
#include "cat/transfer.hpp"
#include "cat/version.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace cat::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kRngHelp =
    "Randomness: every seeded step uses std::mt19937_64 (sequence fixed by the C++ "
    "standard) seeded with --seed. Uniform reals are (x >> 11) * 2^-53, bounded "
    "integers use rejection sampling, normals use Box-Muller, so runs reproduce "
    "across platforms. There is no ambient entropy.";

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

struct Context {
  std::ostream& out;
  std::ostream& err;
  LogLevel level = LogLevel::warn;
  std::uint64_t seed = 0;
  std::string command;
  std::vector<std::string> args;

  void log(LogLevel at, const std::string& message) const {
    if (at > level) return;
    static constexpr const char* kNames[] = {"error", "warn", "info", "debug"};
    err << "[" << kNames[static_cast<int>(at)] << "] " << message << "\n";
  }
};

// Wraps input-loading failures (class sets, affinity files named on the
// command line) as usage errors.
template <typename F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::vector<std::pair<std::string, std::string>> hash_inputs(const std::vector<fs::path>& files) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : files) out.emplace_back(f.string(), sha256_file(f));
  return out;
}

ordered_json inputs_json(const std::vector<std::pair<std::string, std::string>>& inputs) {
  ordered_json j = ordered_json::object();
  for (const auto& [path, hash] : inputs) j[path] = hash;
  return j;
}

void write_run_log(const Context& ctx, const fs::path& output,
                   const std::vector<std::pair<std::string, std::string>>& inputs) {
  ordered_json log;
  log["tool_version"] = kVersion;
  log["command"] = ctx.command;
  log["args"] = ctx.args;
  log["seed"] = ctx.seed;
  log["inputs"] = inputs_json(inputs);
  log["output"] = output.string();
  log["output_sha256"] = sha256_file(output);
  fs::path path = output;
  path += ".log.json";
  write_file_atomic(path, log.dump(2) + "\n");
}

void emit_report(const Context& ctx, const std::optional<fs::path>& out_path,
                 const std::string& text) {
  if (out_path) {
    write_file_atomic(*out_path, text);
  } else {
    ctx.out << text;
  }
}

ClassSetPtr load_classes(const std::optional<fs::path>& path, const std::string& what) {
  const auto& p = require_path(path, what);
  return as_usage([&] { return load_class_set(p); });
}

std::vector<fs::path> pgm_files(const fs::path& dir, const std::string& what) {
  auto files = list_files(dir, ".pgm");
  if (files.empty()) throw UsageError(what + " contains no .pgm label maps: " + dir.string());
  return files;
}

// For each file in `primary`, the file of the same stem and `extension` in `dir`.
std::vector<fs::path> paired_files(const std::vector<fs::path>& primary, const fs::path& dir,
                                   const std::string& extension, const std::string& what) {
  std::vector<fs::path> out;
  for (const auto& p : primary) {
    fs::path candidate = dir / p.stem();
    candidate += extension;
    std::error_code ec;
    if (!fs::is_regular_file(candidate, ec)) {
      throw UsageError(what + " has no counterpart for " + p.filename().string() + " (expected " +
                       candidate.string() + ")");
    }
    out.push_back(candidate);
  }
  return out;
}

std::vector<LabelMap> load_maps(const std::vector<fs::path>& files, const ClassSetPtr& classes) {
  std::vector<LabelMap> maps;
  maps.reserve(files.size());
  for (const auto& f : files) maps.push_back(load_label_map(f, classes));
  return maps;
}

template <typename T>
std::optional<T> pick(const std::optional<T>& flag, const std::optional<T>& from_manifest) {
  return flag ? flag : from_manifest;
}

// ---------------------------------------------------------------- affinity

struct AffinityOptions {
  std::optional<fs::path> manifest;
  std::optional<fs::path> src, tgt, out;
  std::optional<fs::path> gt, pred;
  std::optional<fs::path> src_maps, src_patches, tgt_maps, tgt_patches;
  std::optional<fs::path> src_emb, tgt_emb;
  bool test_embedder = false;
  std::optional<fs::path> confusion, prototype, text;
  std::optional<std::string> fallback_fid, fallback_order;
  std::optional<std::string> zero_row_policy;
  bool binarize = false;
  bool resize_pred = false;
};

struct ResolvedAffinity {
  PipelineManifest m;
  ZeroRowPolicy policy = ZeroRowPolicy::uniform;
  bool binarize = false;
};

ResolvedAffinity resolve(const AffinityOptions& o) {
  ResolvedAffinity r;
  if (o.manifest) r.m = load_manifest(*o.manifest);
  auto& m = r.m;
  m.source_classes = pick(o.src, m.source_classes);
  m.target_classes = pick(o.tgt, m.target_classes);
  m.out = pick(o.out, m.out);
  m.gt_dir = pick(o.gt, m.gt_dir);
  m.pred_dir = pick(o.pred, m.pred_dir);
  m.source_maps_dir = pick(o.src_maps, m.source_maps_dir);
  m.source_patches_dir = pick(o.src_patches, m.source_patches_dir);
  m.target_maps_dir = pick(o.tgt_maps, m.target_maps_dir);
  m.target_patches_dir = pick(o.tgt_patches, m.target_patches_dir);
  m.source_embeddings = pick(o.src_emb, m.source_embeddings);
  m.target_embeddings = pick(o.tgt_emb, m.target_embeddings);
  m.confusion = pick(o.confusion, m.confusion);
  m.prototype = pick(o.prototype, m.prototype);
  m.text = pick(o.text, m.text);
  if (o.fallback_fid) m.fallback_fid = parse_score_list(*o.fallback_fid);
  if (o.fallback_order) m.fallback_order = parse_name_list(*o.fallback_order);
  if (o.zero_row_policy) m.zero_row_policy = *o.zero_row_policy;
  if (m.zero_row_policy) {
    r.policy = as_usage([&] { return parse_zero_row_policy(*m.zero_row_policy); });
  }
  r.binarize = o.binarize || m.binarize.value_or(false);
  if (!m.out) throw UsageError("missing required output path (--out)");
  return r;
}

int finish_affinity(const Context& ctx, AffinityMatrix a, const ResolvedAffinity& r,
                    std::vector<std::pair<std::string, std::string>> inputs) {
  if (r.binarize) a = binarize_hard(a);
  a.inputs = std::move(inputs);
  save_affinity(*r.m.out, a);
  write_run_log(ctx, *r.m.out, a.inputs);
  ctx.log(LogLevel::info, "wrote " + r.m.out->string());
  for (const auto& [k, flag] : a.flags) {
    ctx.log(LogLevel::warn, "target class \"" + a.target_classes->name_at(k) + "\": " + flag);
  }
  return kExitOk;
}

int cmd_affinity_confusion(const Context& ctx, const AffinityOptions& o) {
  const auto r = resolve(o);
  const auto src = load_classes(r.m.source_classes, "source class set");
  const auto tgt = load_classes(r.m.target_classes, "target class set");
  const auto gt_files = pgm_files(require_dir(r.m.gt_dir, "ground-truth directory"), "--gt");
  const auto pred_files =
      paired_files(gt_files, require_dir(r.m.pred_dir, "prediction directory"), ".pgm", "--pred");

  const auto gt = load_maps(gt_files, tgt);
  auto pred = load_maps(pred_files, src);
  if (o.resize_pred) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i].width() != gt[i].width() || pred[i].height() != gt[i].height()) {
        ctx.log(LogLevel::info, "resizing " + pred_files[i].string() + " to ground-truth size");
        pred[i] = resize_nearest(pred[i], gt[i].width(), gt[i].height());
      }
    }
  }
  std::vector<fs::path> inputs = {*r.m.source_classes, *r.m.target_classes};
  inputs.insert(inputs.end(), gt_files.begin(), gt_files.end());
  inputs.insert(inputs.end(), pred_files.begin(), pred_files.end());
  return finish_affinity(ctx, confusion_affinity(gt, pred, r.policy), r, hash_inputs(inputs));
}

int cmd_affinity_prototype(const Context& ctx, const AffinityOptions& o) {
  const auto r = resolve(o);
  const auto src = load_classes(r.m.source_classes, "source class set");
  const auto tgt = load_classes(r.m.target_classes, "target class set");
  const auto src_map_files = pgm_files(require_dir(r.m.source_maps_dir, "source map directory"),
                                       "--src-maps");
  const auto src_patch_files = paired_files(
      src_map_files, require_dir(r.m.source_patches_dir, "source patch directory"), ".catp",
      "--src-patches");
  const auto tgt_map_files = pgm_files(require_dir(r.m.target_maps_dir, "target map directory"),
                                       "--tgt-maps");
  const auto tgt_patch_files = paired_files(
      tgt_map_files, require_dir(r.m.target_patches_dir, "target patch directory"), ".catp",
      "--tgt-patches");

  auto load_grids = [](const std::vector<fs::path>& files) {
    std::vector<PatchFeatureGrid> grids;
    for (const auto& f : files) grids.push_back(load_patch_grid(f));
    return grids;
  };
  const auto src_protos = prototype_from_patches(load_grids(src_patch_files), load_maps(src_map_files, src));
  const auto tgt_protos = prototype_from_patches(load_grids(tgt_patch_files), load_maps(tgt_map_files, tgt));
  for (auto c : src_protos.empty) ctx.log(LogLevel::warn, "source class \"" + src->name_at(c) + "\" has no pixels");
  for (auto c : tgt_protos.empty) ctx.log(LogLevel::warn, "target class \"" + tgt->name_at(c) + "\" has no pixels");

  std::vector<fs::path> inputs = {*r.m.source_classes, *r.m.target_classes};
  for (const auto* list : {&src_map_files, &src_patch_files, &tgt_map_files, &tgt_patch_files}) {
    inputs.insert(inputs.end(), list->begin(), list->end());
  }
  return finish_affinity(ctx, prototype_affinity(src_protos.table, tgt_protos.table, src, tgt, r.policy),
                         r, hash_inputs(inputs));
}

int cmd_affinity_text(const Context& ctx, const AffinityOptions& o) {
  const auto r = resolve(o);
  const auto src = load_classes(r.m.source_classes, "source class set");
  const auto tgt = load_classes(r.m.target_classes, "target class set");
  std::vector<fs::path> inputs = {*r.m.source_classes, *r.m.target_classes};
  FeatureTable src_emb;
  FeatureTable tgt_emb;
  if (o.test_embedder) {
    ctx.log(LogLevel::warn, "using the trigram test embedder (not CLIP)");
    src_emb = trigram_embed_classes(*src);
    tgt_emb = trigram_embed_classes(*tgt);
  } else {
    const auto& sp = require_path(r.m.source_embeddings, "source name embeddings (--src-emb)");
    const auto& tp = require_path(r.m.target_embeddings, "target name embeddings (--tgt-emb)");
    src_emb = load_feature_table(sp);
    tgt_emb = load_feature_table(tp);
    inputs.push_back(sp);
    inputs.push_back(tp);
  }
  return finish_affinity(ctx, text_affinity(src_emb, tgt_emb, src, tgt, r.policy), r,
                         hash_inputs(inputs));
}

int cmd_affinity_combine(const Context& ctx, const AffinityOptions& o) {
  const auto r = resolve(o);
  const auto src = load_classes(r.m.source_classes, "source class set");
  const auto tgt = load_classes(r.m.target_classes, "target class set");
  const auto& conf_path = require_path(r.m.confusion, "confusion affinity (--confusion)");
  const auto& proto_path = require_path(r.m.prototype, "prototype affinity (--prototype)");
  const auto& text_path = require_path(r.m.text, "text affinity (--text)");
  if (r.m.fallback_fid.has_value() == r.m.fallback_order.has_value()) {
    throw UsageError("give exactly one of --fallback-fid or --fallback-order");
  }
  const auto fallback = as_usage([&] {
    return r.m.fallback_fid ? FallbackRanking::from_scores(*r.m.fallback_fid)
                            : FallbackRanking::from_order(*r.m.fallback_order);
  });
  const auto conf = as_usage([&] { return load_affinity(conf_path, src, tgt); });
  const auto proto = as_usage([&] { return load_affinity(proto_path, src, tgt); });
  const auto text = as_usage([&] { return load_affinity(text_path, src, tgt); });
  ctx.log(LogLevel::info, "fallback method: " + std::string(to_string(fallback.best())));
  return finish_affinity(ctx, combine_majority(conf, proto, text, fallback), r,
                         hash_inputs({*r.m.source_classes, *r.m.target_classes, conf_path,
                                      proto_path, text_path}));
}

// ------------------------------------------------------------------- apply

struct ApplyOptions {
  std::optional<fs::path> affinity, maps, src, tgt, out;
  std::string mode = "soft";
};

int cmd_apply(const Context& ctx, const ApplyOptions& o) {
  const auto src = load_classes(o.src, "source class set");
  const auto tgt = load_classes(o.tgt, "target class set");
  const auto& affinity_path = require_path(o.affinity, "affinity file (--affinity)");
  const auto mode = as_usage([&] { return parse_affinity_mode(o.mode); });
  const auto files = pgm_files(require_dir(o.maps, "map directory (--maps)"), "--maps");
  if (!o.out) throw UsageError("missing required output directory (--out)");
  const auto a = as_usage([&] { return load_affinity(affinity_path, src, tgt); });

  std::vector<fs::path> inputs = {*o.src, *o.tgt, affinity_path};
  inputs.insert(inputs.end(), files.begin(), files.end());
  const auto hashes = hash_inputs(inputs);

  // Everything is computed before the first write.
  std::vector<LabelMap> hard_out;
  std::vector<SoftLabelField> soft_out;
  for (const auto& f : files) {
    const auto map = load_label_map(f, tgt);
    if (mode == AffinityMode::hard) {
      hard_out.push_back(apply_hard(a, map));
    } else {
      soft_out.push_back(apply_soft(a, map));
    }
  }
  fs::create_directories(*o.out);
  std::vector<std::string> written;
  for (std::size_t i = 0; i < files.size(); ++i) {
    fs::path target = *o.out / files[i].stem();
    if (mode == AffinityMode::hard) {
      target += ".pgm";
      save_label_map(target, hard_out[i]);
    } else {
      target += ".catf";
      AffinityMatrix with_inputs = a;
      with_inputs.inputs = {hashes[2], {files[i].string(), hashes[3 + i].second}};
      save_soft_field(target, soft_out[i], with_inputs);
    }
    written.push_back(target.filename().string());
  }
  ordered_json summary;
  summary["tool_version"] = kVersion;
  summary["mode"] = std::string(to_string(mode));
  summary["inputs"] = inputs_json(hashes);
  summary["outputs"] = written;
  write_file_atomic(*o.out / "apply.json", summary.dump(2) + "\n");
  ctx.log(LogLevel::info, "wrote " + std::to_string(written.size()) + " outputs to " + o.out->string());
  return kExitOk;
}

// ------------------------------------------------------------------ sample

struct SampleOptions {
  std::optional<fs::path> pool, classes, out;
  std::size_t k = 0;
  double epsilon = kDefaultKlEpsilon;
  bool reverse_kl = false;
};

int cmd_sample(const Context& ctx, const SampleOptions& o) {
  const auto classes = load_classes(o.classes, "class set (--classes)");
  const auto files = pgm_files(require_dir(o.pool, "pool directory (--pool)"), "--pool");
  if (o.k == 0 || o.k > files.size()) {
    throw UsageError("--k must be in [1, " + std::to_string(files.size()) + "]");
  }
  if (!(o.epsilon > 0.0)) throw UsageError("--epsilon must be > 0");
  std::vector<PoolImage> pool;
  for (const auto& f : files) pool.push_back({f.stem().string(), load_label_map(f, classes)});
  const auto direction =
      o.reverse_kl ? KlDirection::empirical_to_uniform : KlDirection::uniform_to_empirical;
  const auto selection = greedy_select(pool, o.k, ctx.seed, o.epsilon, direction);

  std::vector<fs::path> inputs = {*o.classes};
  inputs.insert(inputs.end(), files.begin(), files.end());
  ordered_json j;
  j["seed"] = selection.seed;
  j["epsilon"] = selection.epsilon;
  j["selected"] = selection.selected_ids;
  j["kl_trace"] = selection.per_step_kl;
  j["kl_direction"] = o.reverse_kl ? "empirical_to_uniform" : "uniform_to_empirical";
  j["rng"] = "mt19937_64";
  j["tool_version"] = kVersion;
  j["inputs"] = inputs_json(hash_inputs(inputs));
  emit_report(ctx, o.out, j.dump(2) + "\n");
  return kExitOk;
}

// ----------------------------------------------------------------- metrics

struct MetricOptions {
  std::optional<fs::path> a, b, gt, pred, classes, out;
  std::size_t block = 0;
  std::size_t blocks = 10;
  std::string scheme = "present_classes";
};

std::string metric_report(const std::string& metric, double value, ordered_json params,
                          const std::vector<fs::path>& inputs) {
  ordered_json j;
  j["metric"] = metric;
  j["value"] = value;
  j["params"] = std::move(params);
  j["tool_version"] = kVersion;
  j["inputs"] = inputs_json(hash_inputs(inputs));
  return j.dump(2) + "\n";
}

int cmd_metrics_fid(const Context& ctx, const MetricOptions& o) {
  const auto& pa = require_path(o.a, "feature file (--a)");
  const auto& pb = require_path(o.b, "feature file (--b)");
  const auto ta = load_feature_table(pa);
  const auto tb = load_feature_table(pb);
  const double fid = frechet_distance(gaussian_stats(ta), gaussian_stats(tb));
  ordered_json params = {{"n_a", ta.size()}, {"n_b", tb.size()}, {"dim", ta.dim()}};
  emit_report(ctx, o.out, metric_report("fid", fid, params, {pa, pb}));
  return kExitOk;
}

int cmd_metrics_kid(const Context& ctx, const MetricOptions& o) {
  const auto& pa = require_path(o.a, "feature file (--a)");
  const auto& pb = require_path(o.b, "feature file (--b)");
  const auto ta = load_feature_table(pa);
  const auto tb = load_feature_table(pb);
  const auto kid = kid_from_tables(ta, tb, KidOptions{o.block, o.blocks, ctx.seed});
  ordered_json params = {{"block", kid.block}, {"blocks", kid.blocks},     {"seed", ctx.seed},
                         {"std_error", kid.std_error}, {"kernel", "(x.y/D+1)^3"}};
  emit_report(ctx, o.out, metric_report("kid", kid.value, params, {pa, pb}));
  return kExitOk;
}

int cmd_metrics_miou(const Context& ctx, const MetricOptions& o) {
  const auto classes = load_classes(o.classes, "class set (--classes)");
  const auto scheme = as_usage([&] { return parse_miou_scheme(o.scheme); });
  const auto gt_files = pgm_files(require_dir(o.gt, "ground-truth directory (--gt)"), "--gt");
  const auto pred_files = paired_files(gt_files, require_dir(o.pred, "prediction directory (--pred)"),
                                       ".pgm", "--pred");
  const auto result =
      miou_detail(confusion_counts(load_maps(gt_files, classes), load_maps(pred_files, classes)), scheme);
  ordered_json per_class = ordered_json::object();
  for (std::size_t c = 0; c < result.per_class.size(); ++c) {
    per_class[classes->name_at(c)] =
        std::isnan(result.per_class[c]) ? ordered_json(nullptr) : ordered_json(result.per_class[c]);
  }
  ordered_json params = {{"scheme", std::string(to_string(scheme))},
                         {"images", gt_files.size()},
                         {"per_class_iou", per_class}};
  std::vector<fs::path> inputs = {*o.classes};
  inputs.insert(inputs.end(), gt_files.begin(), gt_files.end());
  inputs.insert(inputs.end(), pred_files.begin(), pred_files.end());
  emit_report(ctx, o.out, metric_report("miou", result.miou, params, inputs));
  return kExitOk;
}

// ----------------------------------------------------------------- toy-lab

struct ToyOptions {
  std::optional<fs::path> config, out;
  std::string seeds;
};

int cmd_toy_run(const Context& ctx, const ToyOptions& o) {
  toy::ToyConfig config;
  std::vector<fs::path> inputs;
  if (o.config) {
    const auto& p = require_path(o.config, "toy config (--config)");
    config = as_usage([&] { return toy::parse_toy_config(read_file(p)); });
    inputs.push_back(p);
  }
  const auto seeds = parse_seed_list(o.seeds);
  if (seeds.size() < 2) throw UsageError("toy-lab run needs at least 2 seeds");
  if (!o.out) throw UsageError("missing required output path (--out)");
  const auto report = toy::run_experiment(config, seeds);
  auto j = ordered_json::parse(report.to_json());
  j["inputs"] = inputs_json(hash_inputs(inputs));
  write_file_atomic(*o.out, j.dump(2) + "\n");
  ctx.log(LogLevel::info, "affinity init wins: initial " + std::to_string(report.initial_mse_wins) +
                              "/" + std::to_string(seeds.size()) + ", convergence " +
                              std::to_string(report.convergence_wins) + "/" +
                              std::to_string(seeds.size()));
  return kExitOk;
}

// ---------------------------------------------------------- export-weights

struct ExportOptions {
  std::optional<fs::path> affinity, src, tgt, out;
  std::string layout = "row_major_TxS";
};

int cmd_export(const Context& ctx, const ExportOptions& o) {
  const auto src = load_classes(o.src, "source class set");
  const auto tgt = load_classes(o.tgt, "target class set");
  const auto& path = require_path(o.affinity, "affinity file (--affinity)");
  const auto layout = as_usage([&] { return parse_weight_layout(o.layout); });
  if (!o.out) throw UsageError("missing required output path (--out)");
  auto a = as_usage([&] { return load_affinity(path, src, tgt); });
  a.inputs = hash_inputs({*o.src, *o.tgt, path});
  export_layer_weights(a, layout, *o.out);
  ctx.log(LogLevel::info, "wrote " + o.out->string());
  return kExitOk;
}

int report_error(std::ostream& err, bool human, const std::string& code,
                 const std::string& message, int exit_code) {
  if (human) {
    err << "error: " << message << "\n";
  } else {
    ordered_json j;
    j["error"] = {{"code", code}, {"message", message}, {"exit_code", exit_code}};
    err << j.dump() << "\n";
  }
  return exit_code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cattool: class affinity estimation, transfer, sampling and metrics"};
  app.footer(kRngHelp);
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int threads = 1;
  std::string log_level = "warn";
  bool human_errors = false;
  app.add_option("--seed", seed, "Seed for every randomized step");
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1, 1024));
  app.add_option("--log-level", log_level, "error|warn|info|debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_flag("--human-errors", human_errors, "Plain-text errors instead of JSON");

  // affinity
  AffinityOptions ao;
  auto* affinity = app.add_subcommand("affinity", "Estimate or combine class affinity matrices");
  affinity->require_subcommand(1);
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--manifest", ao.manifest, "Pipeline manifest JSON");
    sub->add_option("--src", ao.src, "Source class-set manifest");
    sub->add_option("--tgt", ao.tgt, "Target class-set manifest");
    sub->add_option("--out", ao.out, "Output affinity JSON");
    sub->add_option("--zero-row-policy", ao.zero_row_policy, "uniform|error|keep_flagged");
    sub->add_flag("--binarize", ao.binarize, "Write the hard (one-hot argmax) matrix");
  };
  auto* conf = affinity->add_subcommand("confusion", "Pixel confusion of target GT vs source predictions");
  add_common(conf);
  conf->add_option("--gt", ao.gt, "Directory of target ground-truth PGMs");
  conf->add_option("--pred", ao.pred, "Directory of source-class predictions (same filenames)");
  conf->add_flag("--resize-pred", ao.resize_pred, "Nearest-neighbour resize predictions to GT size");
  auto* proto = affinity->add_subcommand("prototype", "Cosine affinity of patch-feature prototypes");
  add_common(proto);
  proto->add_option("--src-maps", ao.src_maps, "Source label maps");
  proto->add_option("--src-patches", ao.src_patches, "Source CATP patch grids (same stems)");
  proto->add_option("--tgt-maps", ao.tgt_maps, "Target label maps");
  proto->add_option("--tgt-patches", ao.tgt_patches, "Target CATP patch grids (same stems)");
  auto* text = affinity->add_subcommand("text", "Cosine affinity of class-name embeddings");
  add_common(text);
  text->add_option("--src-emb", ao.src_emb, "CATF embeddings of source class names");
  text->add_option("--tgt-emb", ao.tgt_emb, "CATF embeddings of target class names");
  text->add_flag("--test-embedder", ao.test_embedder, "Use the built-in trigram embedder (not CLIP)");
  auto* combine = affinity->add_subcommand("combine", "Majority vote over the three estimators");
  add_common(combine);
  combine->add_option("--confusion", ao.confusion, "Confusion affinity JSON");
  combine->add_option("--prototype", ao.prototype, "Prototype affinity JSON");
  combine->add_option("--text", ao.text, "Text affinity JSON");
  combine->add_option("--fallback-fid", ao.fallback_fid, "e.g. confusion=48.7,prototype=49.5,text=51.6");
  combine->add_option("--fallback-order", ao.fallback_order, "Best-first, e.g. confusion,prototype,text");

  ApplyOptions apo;
  auto* apply = app.add_subcommand("apply", "Map target label maps into the source label space");
  apply->add_option("--affinity", apo.affinity, "Affinity JSON");
  apply->add_option("--maps", apo.maps, "Directory of target label maps");
  apply->add_option("--mode", apo.mode, "soft|hard")->check(CLI::IsMember({"soft", "hard"}));
  apply->add_option("--src", apo.src, "Source class-set manifest");
  apply->add_option("--tgt", apo.tgt, "Target class-set manifest");
  apply->add_option("--out", apo.out, "Output directory");

  SampleOptions so;
  auto* sample = app.add_subcommand("sample", "Greedy class-balanced few-shot subset");
  sample->add_option("--pool", so.pool, "Directory of candidate label maps");
  sample->add_option("--classes", so.classes, "Class-set manifest of the pool");
  sample->add_option("--k", so.k, "Subset size");
  sample->add_option("--epsilon", so.epsilon, "KL smoothing constant");
  sample->add_flag("--reverse-kl", so.reverse_kl, "Use KL(empirical || uniform)");
  sample->add_option("--out", so.out, "Output JSON (default: stdout)");

  MetricOptions mo;
  auto* metrics = app.add_subcommand("metrics", "Evaluation metrics");
  metrics->require_subcommand(1);
  auto* fid = metrics->add_subcommand("fid", "Frechet distance between two CATF feature sets");
  auto* kid = metrics->add_subcommand("kid", "Kernel inception distance (unbiased, cubic kernel)");
  for (auto* sub : {fid, kid}) {
    sub->add_option("--a", mo.a, "First CATF feature file");
    sub->add_option("--b", mo.b, "Second CATF feature file");
    sub->add_option("--out", mo.out, "Output JSON (default: stdout)");
  }
  kid->add_option("--block", mo.block, "Block size (default min(N, 1000))");
  kid->add_option("--blocks", mo.blocks, "Number of blocks");
  auto* miou_cmd = metrics->add_subcommand("miou", "Mean IoU of predicted vs ground-truth maps");
  miou_cmd->add_option("--gt", mo.gt, "Ground-truth directory");
  miou_cmd->add_option("--pred", mo.pred, "Prediction directory (same filenames)");
  miou_cmd->add_option("--classes", mo.classes, "Class-set manifest");
  miou_cmd->add_option("--scheme", mo.scheme, "present_classes|all_classes");
  miou_cmd->add_option("--out", mo.out, "Output JSON (default: stdout)");

  ToyOptions to;
  auto* toy_lab = app.add_subcommand("toy-lab", "Synthetic affinity-transfer experiment");
  toy_lab->require_subcommand(1);
  auto* toy_run = toy_lab->add_subcommand("run", "Affinity vs random initialization over seeds");
  toy_run->add_option("--config", to.config, "Toy config JSON (defaults if omitted)");
  toy_run->add_option("--seeds", to.seeds, "Seed list, e.g. 0-19 or 1,5,9")->required();
  toy_run->add_option("--out", to.out, "Report JSON");

  ExportOptions eo;
  auto* export_cmd = app.add_subcommand("export-weights", "Write an affinity as first-layer weights");
  export_cmd->add_option("--affinity", eo.affinity, "Affinity JSON");
  export_cmd->add_option("--src", eo.src, "Source class-set manifest");
  export_cmd->add_option("--tgt", eo.tgt, "Target class-set manifest");
  export_cmd->add_option("--layout", eo.layout, "row_major_TxS|col_major_SxT");
  export_cmd->add_option("--out", eo.out, "Output CATF path");

  // CLI11 wants a mutable argv.
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  human_errors = std::find(args.begin(), args.end(), "--human-errors") != args.end();

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return report_error(err, human_errors, "usage_error", e.what(), kExitUsage);
  }

  static const std::map<std::string, LogLevel> kLevels = {
      {"error", LogLevel::error}, {"warn", LogLevel::warn}, {"info", LogLevel::info}, {"debug", LogLevel::debug}};
  Context ctx{out, err, kLevels.at(log_level), seed, "",
              std::vector<std::string>(args.begin() + (args.empty() ? 0 : 1), args.end())};
  set_thread_count(threads);

  struct Route {
    CLI::App* sub;
    std::string name;
    std::function<int()> run;
  };
  const std::vector<Route> routes = {
      {conf, "affinity confusion", [&] { return cmd_affinity_confusion(ctx, ao); }},
      {proto, "affinity prototype", [&] { return cmd_affinity_prototype(ctx, ao); }},
      {text, "affinity text", [&] { return cmd_affinity_text(ctx, ao); }},
      {combine, "affinity combine", [&] { return cmd_affinity_combine(ctx, ao); }},
      {apply, "apply", [&] { return cmd_apply(ctx, apo); }},
      {sample, "sample", [&] { return cmd_sample(ctx, so); }},
      {fid, "metrics fid", [&] { return cmd_metrics_fid(ctx, mo); }},
      {kid, "metrics kid", [&] { return cmd_metrics_kid(ctx, mo); }},
      {miou_cmd, "metrics miou", [&] { return cmd_metrics_miou(ctx, mo); }},
      {toy_run, "toy-lab run", [&] { return cmd_toy_run(ctx, to); }},
      {export_cmd, "export-weights", [&] { return cmd_export(ctx, eo); }},
  };
  try {
    for (const auto& route : routes) {
      if (route.sub->parsed()) {
        ctx.command = route.name;
        return route.run();
      }
    }
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    return report_error(err, human_errors, "usage_error", e.what(), kExitUsage);
  } catch (const Error& e) {
    return report_error(err, human_errors, std::string(to_string(e.kind())), e.what(),
                        kExitComputation);
  } catch (const std::exception& e) {
    return report_error(err, human_errors, "internal_error", e.what(), kExitComputation);
  }
}

}  // namespace cat::cli
