#ifndef HPCNN_DATA_CIFAR_HPP
#define HPCNN_DATA_CIFAR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "hpcnn/core/error.hpp"
#include "hpcnn/core/tensor.hpp"

namespace hpcnn::data {

inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kImageBytes = kChannels * kSide * kSide;  // 3072
inline constexpr std::size_t kRecordBytes = 1 + kImageBytes;            // 3073
inline constexpr std::size_t kRecordsPerFile = 10000;
inline constexpr std::size_t kFileBytes = kRecordsPerFile * kRecordBytes;  // 30,730,000
inline constexpr std::size_t kCifarClasses = 10;

inline const std::array<std::string, kCifarClasses> kClassNames = {
    "airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"};

inline const std::array<std::string, 5> kTrainFiles = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                                                       "data_batch_4.bin", "data_batch_5.bin"};
inline const std::string kTestFile = "test_batch.bin";

/// One decoded image: pixels 3 x 32 x 32 in [0, 1], plane order R, G, B.
struct LabeledImage {
  Tensor<float> pixels;
  std::size_t label = 0;
};

/// Images kept as the raw CIFAR bytes (one byte per channel value), which
/// is 4x smaller than floats; decoding to [0, 1] happens per batch.
struct Dataset {
  std::vector<std::uint8_t> pixels;  // size() * kImageBytes
  std::vector<std::uint8_t> labels;
  std::size_t num_classes = kCifarClasses;

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> image_bytes(std::size_t i) const {
    return std::span<const std::uint8_t>(pixels).subspan(i * kImageBytes, kImageBytes);
  }

  void push_back(std::span<const std::uint8_t> bytes, std::size_t label) {
    if (bytes.size() != kImageBytes) throw DimensionError("image must have 3072 bytes");
    if (label >= num_classes) throw DataError("label " + std::to_string(label) + " out of range");
    pixels.insert(pixels.end(), bytes.begin(), bytes.end());
    labels.push_back(static_cast<std::uint8_t>(label));
  }

  void append(const Dataset& other) {
    pixels.insert(pixels.end(), other.pixels.begin(), other.pixels.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }

  LabeledImage image(std::size_t i) const {
    LabeledImage out{Tensor<float>(Shape{kChannels, kSide, kSide}), labels.at(i)};
    const auto bytes = image_bytes(i);
    for (std::size_t k = 0; k < kImageBytes; ++k) out.pixels[k] = float(bytes[k]) / 255.0f;
    return out;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto l : labels) ++counts[l];
    return counts;
  }
};

/// Decodes one 3073-byte record: label byte, then the R, G and B planes.
inline LabeledImage decode_record(std::span<const std::uint8_t> record) {
  if (record.size() != kRecordBytes) throw DataError("CIFAR record must be 3073 bytes");
  if (record[0] >= kCifarClasses) throw DataError("label byte " + std::to_string(record[0]) + " > 9");
  LabeledImage img{Tensor<float>(Shape{kChannels, kSide, kSide}), record[0]};
  for (std::size_t k = 0; k < kImageBytes; ++k) img.pixels[k] = float(record[1 + k]) / 255.0f;
  return img;
}

/// Inverse of decode_record for pixels that are exact multiples of 1/255.
inline std::vector<std::uint8_t> encode_record(const LabeledImage& img) {
  if (img.pixels.size() != kImageBytes) throw DimensionError("image must be 3 x 32 x 32");
  if (img.label >= kCifarClasses) throw DataError("label " + std::to_string(img.label) + " > 9");
  std::vector<std::uint8_t> out(kRecordBytes);
  out[0] = static_cast<std::uint8_t>(img.label);
  for (std::size_t k = 0; k < kImageBytes; ++k) {
    const float v = std::clamp(img.pixels[k], 0.0f, 1.0f) * 255.0f;
    out[1 + k] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

/// Reads one batch file; it must hold exactly 10000 records.
inline Dataset read_batch_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw DataError("missing CIFAR-10 file " + path.string());
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec || bytes != kFileBytes)
    throw DataError(path.string() + " has " + std::to_string(bytes) + " bytes, expected " +
                    std::to_string(kFileBytes));
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> raw(kFileBytes);
  if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size())))
    throw DataError("cannot read " + path.string());
  Dataset ds;
  ds.pixels.reserve(kRecordsPerFile * kImageBytes);
  ds.labels.reserve(kRecordsPerFile);
  for (std::size_t r = 0; r < kRecordsPerFile; ++r) {
    const std::uint8_t* rec = raw.data() + r * kRecordBytes;
    if (rec[0] >= kCifarClasses)
      throw DataError(path.string() + " record " + std::to_string(r) + ": label byte " + std::to_string(rec[0]) +
                      " > 9");
    ds.labels.push_back(rec[0]);
    ds.pixels.insert(ds.pixels.end(), rec + 1, rec + kRecordBytes);
  }
  return ds;
}

/// Writes records in the CIFAR-10 binary layout (used for fixtures and
/// round-trip checks). Written through a temp file and renamed into place.
inline void write_batch_file(const std::filesystem::path& path, const Dataset& ds) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const char label = static_cast<char>(ds.labels[i]);
      out.write(&label, 1);
      out.write(reinterpret_cast<const char*>(ds.image_bytes(i).data()), std::streamsize(kImageBytes));
    }
    if (!out) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

struct CifarSplits {
  Dataset train;  // 50000 images, batches 1..5 in order
  Dataset test;   // 10000 images
};

/// Loads data_batch_1..5.bin and test_batch.bin from `dir`.
inline CifarSplits load_cifar10(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("CIFAR-10 directory " + dir.string() + " does not exist");
  CifarSplits s;
  s.train.pixels.reserve(5 * kRecordsPerFile * kImageBytes);
  for (const auto& f : kTrainFiles) s.train.append(read_batch_file(dir / f));
  s.test = read_batch_file(dir / kTestFile);
  return s;
}

}  // namespace hpcnn::data

#endif  // HPCNN_DATA_CIFAR_HPP
