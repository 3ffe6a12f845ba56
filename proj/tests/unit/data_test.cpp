// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "convarrange/data/formats.hpp"
#include "convarrange/data/synth.hpp"
#include "convarrange/data/transforms.hpp"
#include "oracles.hpp"

namespace convarrange::data {
namespace {

TEST(Idx, DigitsFixture) {
  const auto d = load_idx(oracle::fixture("digits100-images.idx3-ubyte"),
                          oracle::fixture("digits100-labels.idx1-ubyte"), Normalization::PositiveUnit);
  EXPECT_EQ(d.images.shape, (Shape{100, 1, 28, 28}));
  std::map<int, int> counts;
  for (const int l : d.labels) ++counts[l];
  ASSERT_EQ(counts.size(), 10u);
  for (const auto& [label, n] : counts) EXPECT_EQ(n, 10) << label;
  for (const float v : d.images.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(Idx, BadMagicAndCountMismatch) {
  auto img = io::read_file(oracle::fixture("digits100-images.idx3-ubyte"));
  auto lab = io::read_file(oracle::fixture("digits100-labels.idx1-ubyte"));
  auto bad = img;
  bad[3] = 0x01;
  try {
    parse_idx(bad, lab, Normalization::SignedUnit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
  lab[7] = 99;
  try {
    parse_idx(img, lab, Normalization::SignedUnit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
}

TEST(Cifar, TenRecordFixture) {
  const auto d = load_cifar_binary(oracle::fixture("cifar10records.bin"), Normalization::PositiveUnit);
  EXPECT_EQ(d.images.shape, (Shape{10, 3, 32, 32}));
  EXPECT_EQ(d.labels, (std::vector<int>{3, 1, 4, 1, 5, 9, 2, 6, 5, 3}));
  for (std::size_t i = 0; i < 10; ++i) {
    for (const std::size_t j : {std::size_t{0}, std::size_t{1000}, std::size_t{3071}}) {
      EXPECT_EQ(d.images[i * 3072 + j], static_cast<float>((j + 7 * i) % 256) / 255.0f);
    }
  }
}

TEST(Cifar, EmptyAndTruncated) {
  EXPECT_EQ(parse_cifar_binary({}, Normalization::SignedUnit).size(), 0u);
  const std::vector<std::uint8_t> partial(kCifarRecord + 5, 0);
  try {
    parse_cifar_binary(partial, Normalization::SignedUnit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Truncated);
  }
}

TEST(Normalize, Endpoints) {
  EXPECT_EQ(normalize_pixel(0, Normalization::SignedUnit), -1.0f);
  EXPECT_EQ(normalize_pixel(255, Normalization::SignedUnit), 1.0f);
  EXPECT_EQ(normalize_pixel(0, Normalization::PositiveUnit), 0.0f);
  EXPECT_EQ(normalize_pixel(255, Normalization::PositiveUnit), 1.0f);
}

TEST(Synth, TwoPerClassAndDeterministic) {
  const auto a = synth_shapes(16, 8, 4);
  std::map<int, int> counts;
  for (const int l : a.labels) ++counts[l];
  ASSERT_EQ(counts.size(), 8u);
  for (const auto& [label, n] : counts) EXPECT_EQ(n, 2);
  const auto b = synth_shapes(16, 8, 4);
  EXPECT_EQ(a.images.data, b.images.data);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(synth_shapes(16, 8, 5).images.data, a.images.data);
  for (const float v : a.images.data) {
    ASSERT_GE(v, -1.0f);
    ASSERT_LE(v, 1.0f);
  }
  EXPECT_THROW(synth_shapes(4, 9, 0), Error);
}

TEST(Transforms, ZeroShiftNoFlipIsIdentity) {
  const auto x = oracle::normal_vector(2 * 5 * 6, 1);
  const std::vector<float> in(x.begin(), x.end());
  std::vector<float> out(in.size());
  shift_flip(in, out, 2, 5, 6, 0, 0, false);
  EXPECT_EQ(out, in);
}

TEST(Transforms, DoubleFlipIsIdentity) {
  const auto x = oracle::normal_vector(3 * 4 * 7, 2);
  const std::vector<float> in(x.begin(), x.end());
  std::vector<float> once(in.size()), twice(in.size());
  shift_flip(in, once, 3, 4, 7, 0, 0, true);
  shift_flip(once, twice, 3, 4, 7, 0, 0, true);
  EXPECT_EQ(twice, in);
  EXPECT_EQ(once[0], in[6]);
}

TEST(Transforms, ShiftMovesAndZeroFills) {
  std::vector<float> in(9);
  for (std::size_t i = 0; i < 9; ++i) in[i] = static_cast<float>(i + 1);
  std::vector<float> out(9);
  shift_flip(in, out, 1, 3, 3, 1, 0, false);
  EXPECT_EQ(out, (std::vector<float>{0, 0, 0, 1, 2, 3, 4, 5, 6}));
}

Dataset Small(std::size_t n, Split split = Split::Train) {
  auto d = synth_shapes(n, 4, 9);
  d.split = split;
  return d;
}

TEST(Corruption, RandomizeLabels) {
  const auto d = Small(400);
  EXPECT_EQ(randomize_labels(d, 0.0, 1).labels, d.labels);
  const auto r = randomize_labels(d, 1.0, 1);
  EXPECT_EQ(r.images.data, d.images.data);
  std::size_t same = 0;
  for (std::size_t i = 0; i < d.size(); ++i) same += r.labels[i] == d.labels[i];
  // Uniform redraws keep the label with probability 1/4.
  EXPECT_NEAR(static_cast<double>(same) / 400.0, 0.25, 0.08);
  EXPECT_EQ(randomize_labels(d, 1.0, 1).labels, r.labels);
  EXPECT_EQ(randomize_labels(Small(40, Split::Test), 1.0, 1).labels, Small(40, Split::Test).labels);
  EXPECT_THROW(randomize_labels(d, 1.5, 1), Error);
}

TEST(Corruption, PixelShufflePreservesMultisets) {
  const auto d = Small(20);
  const auto s = pixel_shuffle(d, 3);
  EXPECT_EQ(s.labels, d.labels);
  EXPECT_NE(s.images.data, d.images.data);
  const std::size_t HW = 256;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<float> a(d.images.ptr() + i * HW, d.images.ptr() + (i + 1) * HW);
    std::vector<float> b(s.images.ptr() + i * HW, s.images.ptr() + (i + 1) * HW);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ASSERT_EQ(a, b) << i;
  }
}

TEST(Corruption, GlobalPermutationIsShared) {
  // Images 0 and 1 are replaced by index ramps; a shared permutation moves
  // both ramps identically.
  auto d = Small(2);
  for (std::size_t p = 0; p < 256; ++p) {
    d.images[p] = static_cast<float>(p);
    d.images[256 + p] = static_cast<float>(p) + 1000.0f;
  }
  const auto s = pixel_shuffle(d, 5);
  for (std::size_t p = 0; p < 256; ++p) EXPECT_EQ(s.images[256 + p], s.images[p] + 1000.0f);
  const auto per = pixel_shuffle(d, 5, true);
  std::size_t differ = 0;
  for (std::size_t p = 0; p < 256; ++p) differ += per.images[256 + p] != per.images[p] + 1000.0f;
  EXPECT_GT(differ, 200u);
  EXPECT_EQ(pixel_shuffle(Small(2, Split::Val), 5).images.data, Small(2, Split::Val).images.data);
}

TEST(Split, SizesAndDisjointCover) {
  auto d = Small(50);
  for (std::size_t i = 0; i < 50; ++i) d.images[i * 256] = static_cast<float>(i);  // tag each sample
  const auto s = split_validation(d, 7);
  EXPECT_EQ(s.val.size(), 5u);
  EXPECT_EQ(s.train.size(), 45u);
  EXPECT_EQ(s.val.split, Split::Val);
  std::set<float> tags;
  for (const auto* part : {&s.train, &s.val}) {
    for (std::size_t i = 0; i < part->size(); ++i) tags.insert(part->images[i * 256]);
  }
  EXPECT_EQ(tags.size(), 50u);
  EXPECT_EQ(split_validation(d, 7).val.images.data, s.val.images.data);
}

}  // namespace
}  // namespace convarrange::data
