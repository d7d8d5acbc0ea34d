#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "hpcnn/data/loader.hpp"
#include "test_util.hpp"

using namespace hpcnn;
using namespace hpcnn::data;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("hpcnn_data_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// 10000 records with 1000 per class and byte patterns that depend on the slot.
Dataset balanced_file(std::uint64_t seed) {
  Dataset ds;
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> img(kImageBytes);
  for (std::size_t i = 0; i < kRecordsPerFile; ++i) {
    for (auto& b : img) b = static_cast<std::uint8_t>(rng());
    ds.push_back(img, i % 10);
  }
  return ds;
}

Tensor<float> ramp_image() {
  Tensor<float> img(Shape{3, 32, 32});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = float(i % 251) / 250.0f;
  return img;
}

}  // namespace

TEST(Cifar, FormatArithmetic) {
  EXPECT_EQ(kRecordBytes, 3073u);
  EXPECT_EQ(kFileBytes, 30730000u);
}

TEST(Cifar, RecordRoundTrip) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::uint8_t> rec(kRecordBytes);
    for (auto& b : rec) b = static_cast<std::uint8_t>(rng());
    rec[0] = static_cast<std::uint8_t>(t % 10);
    const auto img = decode_record(rec);
    EXPECT_EQ(img.label, std::size_t(t % 10));
    EXPECT_FLOAT_EQ(img.pixels[5], rec[6] / 255.0f);
    EXPECT_EQ(encode_record(img), rec);
  }
}

TEST(Cifar, PlaneOrderIsRedGreenBlue) {
  std::vector<std::uint8_t> rec(kRecordBytes, 0);
  rec[1] = 255;            // R(0,0)
  rec[1 + 1024 + 33] = 51;  // G(1,1)
  const auto img = decode_record(rec);
  EXPECT_FLOAT_EQ(img.pixels[0], 1.0f);
  EXPECT_FLOAT_EQ(img.pixels[1024 + 32 + 1], 0.2f);
}

TEST(Cifar, RejectsBadLabelByte) {
  std::vector<std::uint8_t> rec(kRecordBytes, 0);
  rec[0] = 10;
  EXPECT_THROW(decode_record(rec), DataError);
}

TEST(Cifar, FileRoundTripIsByteExact) {
  TempDir dir;
  const auto ds = balanced_file(1);
  write_batch_file(dir.path() / "data_batch_1.bin", ds);
  EXPECT_EQ(fs::file_size(dir.path() / "data_batch_1.bin"), kFileBytes);
  const auto back = read_batch_file(dir.path() / "data_batch_1.bin");
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.pixels, ds.pixels);
}

TEST(Cifar, FileErrors) {
  TempDir dir;
  EXPECT_THROW(read_batch_file(dir.path() / "missing.bin"), DataError);
  {
    std::ofstream(dir.path() / "short.bin", std::ios::binary) << std::string(kFileBytes - 1, '\0');
  }
  EXPECT_THROW(read_batch_file(dir.path() / "short.bin"), DataError);
  auto ds = balanced_file(2);
  write_batch_file(dir.path() / "bad.bin", ds);
  {
    std::fstream f(dir.path() / "bad.bin", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(std::streamoff(kRecordBytes * 77));
    f.put(char(12));
  }
  try {
    read_batch_file(dir.path() / "bad.bin");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("record 77"), std::string::npos);
  }
  EXPECT_THROW(load_cifar10(dir.path() / "nope"), DataError);
  EXPECT_THROW(load_cifar10(dir.path()), DataError);
}

TEST(Cifar, FixtureDirectoryClassCounts) {
  TempDir dir;
  for (std::size_t f = 0; f < 5; ++f) write_batch_file(dir.path() / kTrainFiles[f], balanced_file(10 + f));
  write_batch_file(dir.path() / kTestFile, balanced_file(20));
  const auto s = load_cifar10(dir.path());
  EXPECT_EQ(s.train.size(), 50000u);
  EXPECT_EQ(s.test.size(), 10000u);
  for (auto c : s.train.class_counts()) EXPECT_EQ(c, 5000u);
  for (auto c : s.test.class_counts()) EXPECT_EQ(c, 1000u);
}

TEST(Cifar, RealDatasetWhenAvailable) {
  const char* dir = std::getenv("CIFAR10_DIR");
  if (!dir) GTEST_SKIP() << "CIFAR10_DIR not set";
  for (const auto& f : kTrainFiles) EXPECT_EQ(fs::file_size(fs::path(dir) / f), kFileBytes);
  const auto s = load_cifar10(dir);
  for (auto c : s.train.class_counts()) EXPECT_EQ(c, 5000u);
  for (auto c : s.test.class_counts()) EXPECT_EQ(c, 1000u);
}

TEST(Crop, CenteredOffsetIsIdentity) {
  const auto img = ramp_image();
  EXPECT_EQ(crop_at(img, 2, 2, 2, 32), img);
}

TEST(Crop, ShiftedOffsetZeroFills) {
  const auto img = ramp_image();
  const auto out = crop_at(img, 0, 4, 2, 32);
  EXPECT_EQ(out.shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(out[0], 0.0f);                       // row -2 is padding
  EXPECT_EQ(out[2 * 32 + 0], img[0 * 32 + 2]);  // row 0, col 2
  EXPECT_EQ(out[2 * 32 + 31], 0.0f);            // col 33 is padding
}

TEST(Crop, OffsetsAreUniform) {
  std::mt19937_64 rng(1234);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  for (int i = 0; i < 10000; ++i) ++counts[draw_crop_offset(rng, 2)];
  ASSERT_EQ(counts.size(), 25u);
  for (const auto& [off, n] : counts) EXPECT_NEAR(n / 10000.0, 0.04, 0.01);
}

TEST(Crop, AlwaysProducesFullImage) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(random_crop(ramp_image(), rng).shape(), (Shape{3, 32, 32}));
}

TEST(Flip, InvolutionAndColumnMapping) {
  const auto img = ramp_image();
  const auto f = flip_horizontal(img);
  EXPECT_EQ(flip_horizontal(f), img);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) ASSERT_EQ(f[(c * 32 + y) * 32 + x], img[(c * 32 + y) * 32 + 31 - x]);
}

TEST(Flip, BoundaryProbabilities) {
  std::mt19937_64 rng(9);
  const auto img = ramp_image();
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(horizontal_flip(img, rng, 0.0), img);
    EXPECT_EQ(horizontal_flip(img, rng, 1.0), flip_horizontal(img));
  }
  EXPECT_THROW(horizontal_flip(img, rng, 1.5), ArgumentError);
}

TEST(Normalize, TableConstants) {
  Tensor<float> img(Shape{3, 1, 1}, std::vector<float>{0.4914f, 0.4822f, 0.4465f});
  const auto out = normalize(img);
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
  Tensor<float> white(Shape{3, 1, 1}, 1.0f);
  EXPECT_NEAR(normalize(white)[0], 2.5141, 1e-4);
  EXPECT_NEAR(normalize(white)[0], (1.0 - 0.4914) / 0.2023, 1e-6);
}

TEST(Normalize, DenormalizeInverts) {
  const auto img = ramp_image();
  const auto back = denormalize(normalize(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back[i], img[i], 1e-6);
  NormalizationParams bad;
  bad.std[1] = 0.0f;
  EXPECT_THROW(normalize(img, bad), ArgumentError);
}

TEST(Batches, FiftyThousandAtBatch128) {
  Dataset ds;
  ds.labels.assign(50000, 0);
  ds.pixels.assign(50000 * kImageBytes, 0);
  const auto loader = make_batches(ds, 128, true, Split::Train, 1);
  ASSERT_EQ(loader.size(), 391u);
  EXPECT_EQ(loader[389].images.dim(0), 128u);
  EXPECT_EQ(loader[390].images.dim(0), 80u);
  EXPECT_THROW(loader[391], ArgumentError);
  EXPECT_THROW(make_batches(ds, 0, true, Split::Train, 1), ArgumentError);

  const auto again = make_batches(ds, 128, true, Split::Train, 1);
  const auto other = make_batches(ds, 128, true, Split::Train, 2);
  const auto next_epoch = make_batches(ds, 128, true, Split::Train, 1, 1);
  EXPECT_EQ(loader.order(), again.order());
  EXPECT_NE(loader.order(), other.order());
  EXPECT_NE(loader.order(), next_epoch.order());
  auto sorted = loader.order();
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
}

TEST(Batches, PartitionPreservesLabelMultiset) {
  const auto ds = synthetic_dataset(10, 1000, 3);
  const auto loader = make_batches(ds, 96, true, Split::Train, 4);
  std::vector<std::size_t> seen(10, 0);
  std::size_t total = 0;
  for (std::size_t b = 0; b < loader.size(); ++b) {
    const auto batch = loader[b];
    EXPECT_EQ(batch.images.shape(), (Shape{batch.labels.size(), 3, 32, 32}));
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
      EXPECT_EQ(batch.labels[i], ds.labels[batch.indices[i]]);
      ++seen[batch.labels[i]];
    }
    total += batch.labels.size();
  }
  EXPECT_EQ(total, 1000u);
  EXPECT_EQ(seen, ds.class_counts());
}

TEST(Batches, EvalPipelineIsDeterministicNormalizeOnly) {
  const auto ds = synthetic_dataset(10, 40, 3);
  const auto a = make_batches(ds, 16, false, Split::Eval, 1)[1];
  const auto b = make_batches(ds, 16, false, Split::Eval, 99, 7)[1];
  EXPECT_TRUE(bit_identical(a.images, b.images));
  const auto expect = normalize(ds.image(16).pixels);
  EXPECT_TRUE(std::equal(expect.data().begin(), expect.data().end(), a.images.raw()));
}

TEST(Batches, TrainAugmentationIsSeededAndThreadInvariant) {
  const auto ds = synthetic_dataset(10, 64, 3);
  Batch one, four;
  {
    test::ScopedPool pool(1);
    one = make_batches(ds, 64, true, Split::Train, 8, 2)[0];
  }
  {
    test::ScopedPool pool(4);
    four = make_batches(ds, 64, true, Split::Train, 8, 2)[0];
  }
  EXPECT_TRUE(bit_identical(one.images, four.images));
  const auto other_epoch = make_batches(ds, 64, true, Split::Train, 8, 3)[0];
  EXPECT_FALSE(bit_identical(one.images, other_epoch.images));
}

TEST(Subset, StratifiedCountsAndSeeding) {
  const auto ds = synthetic_dataset(10, 1000, 1);
  const auto sub = stratified_subset(ds, 30, 5);
  EXPECT_EQ(sub.size(), 300u);
  for (auto c : sub.class_counts()) EXPECT_EQ(c, 30u);
  EXPECT_EQ(stratified_subset(ds, 30, 5).pixels, sub.pixels);
  EXPECT_NE(stratified_subset(ds, 30, 6).pixels, sub.pixels);
  EXPECT_EQ(stratified_subset(ds, 500, 5).size(), 1000u);
}

TEST(Synthetic, SizesLabelsAndColorMargin) {
  const auto ds = synthetic_dataset(10, 100, 2);
  EXPECT_EQ(ds.size(), 100u);
  for (auto c : ds.class_counts()) EXPECT_EQ(c, 10u);
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = a + 1; b < 10; ++b) {
      const auto ca = synthetic_class_color(a), cb = synthetic_class_color(b);
      float gap = 0;
      for (int ch = 0; ch < 3; ++ch) gap = std::max(gap, std::abs(ca[ch] - cb[ch]));
      EXPECT_GE(gap, 0.3f - 1e-6f);
    }
  // Empirical channel means follow the construction.
  for (std::size_t i = 0; i < 10; ++i) {
    const auto img = ds.image(i).pixels;
    const auto color = synthetic_class_color(ds.labels[i]);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double m = 0;
      for (std::size_t k = 0; k < 1024; ++k) m += img[ch * 1024 + k];
      EXPECT_NEAR(m / 1024, color[ch], 0.03);
    }
  }
}
