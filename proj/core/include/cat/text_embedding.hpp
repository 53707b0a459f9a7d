#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "cat/class_set.hpp"
#include "cat/feature_table.hpp"

namespace cat {

/// Deterministic stand-in for a text encoder, for tests and offline demos.
/// NOT CLIP: it hashes padded character trigrams ("^ro", "roa", ...) of the
/// normalized name with seeded FNV-1a into kTrigramDim signed buckets and
/// L2-normalizes. Names sharing trigrams get positive cosine; nothing more.
inline constexpr std::size_t kTrigramDim = 64;
inline constexpr std::uint64_t kTrigramSeed = 0x43415421;  // "CAT!"

std::vector<double> trigram_embedding(std::string_view name);

/// One row per class, ids = normalized class names.
FeatureTable trigram_embed_classes(const ClassSet& classes);

}  // namespace cat
