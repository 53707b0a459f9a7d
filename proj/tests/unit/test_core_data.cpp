#include <gtest/gtest.h>

#include <cstring>
#include <functional>
#include <limits>
#include <random>

#include "cat/class_set.hpp"
#include "cat/counting.hpp"
#include "cat/error.hpp"
#include "cat/feature_table.hpp"
#include "cat/fileio.hpp"
#include "cat/label_map.hpp"
#include "cat/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cat;
using testsupport::make_classes;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected cat::Error";
  return ErrorKind::io;
}

std::string pgm16(std::size_t w, std::size_t h, unsigned maxval, const std::vector<unsigned>& px) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" +
                  std::to_string(maxval) + "\n";
  for (unsigned v : px) {
    s.push_back(static_cast<char>(v >> 8));
    s.push_back(static_cast<char>(v & 0xFF));
  }
  return s;
}

}  // namespace

TEST(ClassSet, CityscapesFixtureLoads) {
  const auto cs = load_class_set(testsupport::fixture_path("cityscapes_classes.json"));
  ASSERT_EQ(cs->size(), 35u);
  EXPECT_EQ(cs->ignore_index(), 255);
  EXPECT_EQ(cs->position_of_name("license plate"), 34u);
  EXPECT_EQ(cs->position_of_name("  License Plate "), 34u);
  EXPECT_EQ(cs->position_of_index(23), cs->position_of_name("sky"));
  EXPECT_FALSE(cs->position_of_index(255).has_value());
  EXPECT_TRUE(cs->is_ignore(255));
}

TEST(ClassSet, JsonRoundTripPreservesHash) {
  const auto cs = load_class_set(testsupport::fixture_path("cityscapes_classes.json"));
  const auto again = parse_class_set(cs->to_json());
  EXPECT_EQ(*cs, *again);
  EXPECT_EQ(cs->content_hash(), again->content_hash());
  EXPECT_NE(cs->content_hash(), make_classes("c", 35)->content_hash());
}

TEST(ClassSet, RejectsDuplicatesAndCollisions) {
  EXPECT_EQ(kind_of([] { ClassSet("x", {{0, "a"}, {0, "b"}}); }), ErrorKind::invariant);
  EXPECT_EQ(kind_of([] { ClassSet("x", {{0, "a"}, {1, " A"}}); }), ErrorKind::invariant);
  EXPECT_EQ(kind_of([] { ClassSet("x", {{0, "a"}, {1, "b"}}, 1); }), ErrorKind::invariant);
  EXPECT_EQ(kind_of([] { ClassSet("x", {}); }), ErrorKind::invariant);
  EXPECT_EQ(kind_of([] { parse_class_set("{\"name\":\"x\"}"); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([] { parse_class_set("not json"); }), ErrorKind::parse);
}

TEST(LabelMap, RejectsUnknownValueWithCoordinates) {
  const auto cs = make_classes("c", 3, 255);
  try {
    LabelMap(cs, 2, 2, {0, 1, 7, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invariant);
    EXPECT_NE(std::string(e.what()).find("(0,1)"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(LabelMap(cs, 2, 2, {0, 1, 255, 2}));
}

TEST(Pgm, SixteenBitBigEndianSample) {
  std::vector<ClassEntry> entries{{0, "zero"}, {260, "big"}};
  const auto cs = std::make_shared<const ClassSet>("wide", entries);
  const auto map = decode_pgm(pgm16(2, 1, 300, {260, 0}), cs);
  EXPECT_EQ(map.at(0, 0), 260);
  EXPECT_EQ(map.at(1, 0), 0);
  EXPECT_EQ(map.positions()[0], 1);
}

TEST(Pgm, CommentsAndEightBit) {
  const auto cs = make_classes("c", 4);
  std::string bytes = "P5\n# a comment\n3 1\n# another\n255\n";
  bytes += std::string{'\x00', '\x03', '\x02'};
  const auto map = decode_pgm(bytes, cs);
  EXPECT_EQ(map.values()[1], 3);
  EXPECT_EQ(map.values()[2], 2);
}

TEST(Pgm, MalformedInputsFailAsParse) {
  const auto cs = make_classes("c", 4);
  EXPECT_EQ(kind_of([&] { decode_pgm("P2\n1 1\n255\n0", cs); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([&] { decode_pgm(std::string("P5\n2 2\n255\n") + '\0', cs); }),
            ErrorKind::parse);
  EXPECT_EQ(kind_of([&] { decode_pgm(std::string("P5\n1 1\n255\n") + '\x09', cs); }),
            ErrorKind::invariant);
  EXPECT_EQ(kind_of([&] { decode_pgm("P5\n1 1\n70000\n\x00\x00", cs); }), ErrorKind::parse);
}

TEST(Pgm, RoundTripIsByteCanonical) {
  std::mt19937_64 gen(7);
  const auto cs = make_classes("c", 9, 255);
  for (int t = 0; t < 10; ++t) {
    const auto map = testsupport::random_map(cs, 5 + t, 3 + t, gen, 0.1);
    const std::string bytes = encode_pgm(map);
    const auto back = decode_pgm(bytes, cs);
    EXPECT_EQ(back, map);
    EXPECT_EQ(encode_pgm(back), bytes);
  }
  std::vector<ClassEntry> wide{{0, "a"}, {300, "b"}};
  const auto ws = std::make_shared<const ClassSet>("w", wide);
  const LabelMap m16(ws, 2, 1, {300, 0});
  const auto bytes = encode_pgm(m16);
  EXPECT_EQ(bytes.substr(0, 14), "P5\n2 1\n65535\n\x01");
  EXPECT_EQ(decode_pgm(bytes, ws), m16);
}

TEST(LabelMap, HistogramMatchesOracle) {
  std::mt19937_64 gen(11);
  const auto cs = make_classes("c", 6, 255);
  for (int t = 0; t < 20; ++t) {
    const auto map = testsupport::random_map(cs, 9, 7, gen, 0.2);
    const auto hist = class_histogram(map);
    const auto expected = oracle::labeled_counts(map);
    ASSERT_EQ(hist.size(), expected.size());
    for (std::size_t c = 0; c < hist.size(); ++c) {
      EXPECT_EQ(static_cast<double>(hist[c]), expected[c]);
    }
  }
}

TEST(LabelMap, ResizeNearestSamplesFloorCoordinates) {
  const auto cs = make_classes("c", 16);
  std::vector<std::int32_t> v(16);
  for (int i = 0; i < 16; ++i) v[static_cast<std::size_t>(i)] = i;
  const LabelMap map(cs, 4, 4, v);
  const auto half = resize_nearest(map, 2, 2);
  EXPECT_EQ(std::vector<std::int32_t>(half.values().begin(), half.values().end()),
            (std::vector<std::int32_t>{0, 2, 8, 10}));
  const auto up = resize_nearest(map, 8, 8);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) EXPECT_EQ(up.at(x, y), map.at(x / 2, y / 2));
  EXPECT_EQ(resize_nearest(map, 4, 4), map);
}

TEST(Catf, RoundTripIsBitExactForFloat32Values) {
  std::mt19937_64 gen(3);
  Matrix m(5, 7);
  for (auto& v : m.data()) v = static_cast<float>(std::uniform_real_distribution<>(-10, 10)(gen));
  const auto bytes = encode_catf(m);
  ASSERT_EQ(bytes.size(), 16u + 5 * 7 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "CATF");
  const auto back = decode_catf(bytes);
  EXPECT_EQ(back, m);
  EXPECT_EQ(encode_catf(back), bytes);
}

TEST(Catf, TruncationAndTrailingBytesFail) {
  Matrix m(2, 3, 1.5);
  const auto bytes = encode_catf(m);
  EXPECT_EQ(kind_of([&] { decode_catf(bytes.substr(0, bytes.size() - 1)); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([&] { decode_catf(bytes + "x"); }), ErrorKind::parse);
  EXPECT_EQ(kind_of([&] { decode_catf(bytes.substr(0, 10)); }), ErrorKind::parse);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_catf(bad); }), ErrorKind::parse);
  std::string nan = bytes;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 16, &q, 4);
  EXPECT_EQ(kind_of([&] { decode_catf(nan); }), ErrorKind::numeric);
}

TEST(FeatureTable, SaveLoadWithIdsSidecar) {
  testsupport::TempDir dir("catf");
  std::mt19937_64 gen(5);
  Matrix m(3, 4);
  for (auto& v : m.data()) v = static_cast<float>(std::normal_distribution<>()(gen));
  const FeatureTable t({"a", "b", "c"}, m);
  save_feature_table(dir / "f.catf", t);
  EXPECT_TRUE(std::filesystem::exists(ids_sidecar_path(dir / "f.catf")));
  const auto back = load_feature_table(dir / "f.catf");
  EXPECT_EQ(back.ids(), t.ids());
  EXPECT_EQ(back.rows(), t.rows());
  EXPECT_EQ(kind_of([] { FeatureTable({"a", "a"}, Matrix(2, 1)); }), ErrorKind::invariant);
  EXPECT_EQ(kind_of([] { FeatureTable({"a"}, Matrix(2, 1)); }), ErrorKind::invariant);
}

TEST(Catp, RoundTrip) {
  std::mt19937_64 gen(9);
  auto g = testsupport::random_grid("img", 3, 2, 4, 5, gen);
  for (auto& v : g.data) v = static_cast<float>(v);
  const auto back = decode_catp(encode_catp(g), "img");
  EXPECT_EQ(back.grid_h, 3u);
  EXPECT_EQ(back.grid_w, 2u);
  EXPECT_EQ(back.patch_size, 4u);
  EXPECT_EQ(back.dim, 5u);
  EXPECT_EQ(back.data, g.data);
  testsupport::TempDir dir("catp");
  save_patch_grid(dir / "frame_01.catp", g);
  EXPECT_EQ(load_patch_grid(dir / "frame_01.catp").image_id, "frame_01");
}

TEST(Counting, MatchesNaiveCountsAndIgnoresIgnorePixels) {
  std::mt19937_64 gen(21);
  const auto t = make_classes("t", 4, 255);
  const auto s = make_classes("s", 6, 255);
  std::vector<LabelMap> gt;
  std::vector<LabelMap> pr;
  for (int i = 0; i < 8; ++i) {
    gt.push_back(testsupport::random_map(t, 10, 6, gen, 0.15));
    pr.push_back(testsupport::random_map(s, 10, 6, gen, 0.15));
  }
  const auto counts = count_cooccurrences(gt, pr);
  std::vector<std::vector<std::uint64_t>> naive(4, std::vector<std::uint64_t>(6, 0));
  for (std::size_t m = 0; m < gt.size(); ++m)
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 10; ++x) {
        const auto a = oracle::find_class(*t, gt[m].at(x, y));
        const auto b = oracle::find_class(*s, pr[m].at(x, y));
        if (a && b) ++naive[*a][*b];
      }
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(counts(r, c), naive[r][c]);
}

TEST(Counting, ShapeMismatchIsDimensionError) {
  const auto t = make_classes("t", 2);
  std::vector<LabelMap> a{LabelMap(t, 2, 2, {0, 1, 0, 1})};
  std::vector<LabelMap> b{LabelMap(t, 2, 1, {0, 1})};
  EXPECT_EQ(kind_of([&] { count_cooccurrences(a, b); }), ErrorKind::dimension);
  std::vector<LabelMap> none;
  EXPECT_EQ(kind_of([&] { count_cooccurrences(a, none); }), ErrorKind::dimension);
}

TEST(Rng, ReproducibleAndBounded) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    EXPECT_EQ(x, b.below(7));
    EXPECT_LT(x, 7u);
    const double u = a.uniform01();
    EXPECT_EQ(u, b.uniform01());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(FileIo, AtomicWriteAndHash) {
  testsupport::TempDir dir("io");
  write_file_atomic(dir / "x.txt", "abc");
  EXPECT_EQ(read_file(dir / "x.txt"), "abc");
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_file(dir / "x.txt"), sha256_hex("abc"));
  EXPECT_EQ(kind_of([&] { read_file(dir / "missing"); }), ErrorKind::io);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(CoreData, MinimalExamples) {
  const auto cs = parse_class_set(
      R"({"name":"mini","classes":[{"index":0,"name":"unlabeled"},{"index":1,"name":"road"}]})");
  EXPECT_EQ(cs->size(), 2u);
  EXPECT_EQ(kind_of([] {
              parse_class_set(
                  R"({"name":"d","classes":[{"index":1,"name":"a"},{"index":1,"name":"b"}]})");
            }),
            ErrorKind::invariant);

  const auto map = decode_pgm(std::string("P5\n2 2\n255\n") + std::string{0, 0, 1, 1}, cs);
  EXPECT_EQ(std::vector<std::int32_t>(map.values().begin(), map.values().end()),
            (std::vector<std::int32_t>{0, 0, 1, 1}));
  EXPECT_EQ(class_histogram(map), (std::vector<std::uint64_t>{2, 2}));

  const auto ig = make_classes("c", 2, 255);
  EXPECT_EQ(class_histogram(LabelMap(ig, 2, 1, {255, 255})), (std::vector<std::uint64_t>{0, 0}));

  const auto unit = decode_catf(encode_catf(Matrix(1, 3, {1, 0, 0})));
  EXPECT_EQ(unit, Matrix(1, 3, {1, 0, 0}));
}
