#ifndef HPCNN_TRAIN_CHECKPOINT_HPP
#define HPCNN_TRAIN_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "hpcnn/core/hash.hpp"
#include "hpcnn/train/trainer.hpp"

// Layout (all integers and floats little-endian):
//   "HPCNNCKP" u32 version
//   metadata: str arch, u64 num_classes, u64 epoch, u64 seed, u64 config_hash
//   u64 tensor count, then per tensor: str name, u32 rank, u64 dims[rank], f32 data[numel]
//   u64 history count, then per epoch: u64 epoch, f64 lr, train_loss, train_acc,
//     test_loss, test_acc, train_s, eval_s
//   u64 FNV-1a of every preceding byte
// where str = u32 length + bytes. Tensor names: parameters and buffers as
// registered by the model, momentum buffers as "momentum/<parameter>".

namespace hpcnn {

struct Checkpoint {
  static constexpr char kMagic[8] = {'H', 'P', 'C', 'N', 'N', 'C', 'K', 'P'};
  static constexpr std::uint32_t kVersion = 1;

  std::string arch;
  std::uint64_t num_classes = 0;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::map<std::string, Tensor<float>> tensors;
  std::vector<EpochRecord> history;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& b, std::size_t end, std::string path) : b_(b), end_(end), path_(std::move(path)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(b_.begin() + long(pos_), b_.begin() + long(pos_ + n));
    pos_ += n;
    return s;
  }
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) throw CorruptionError("checkpoint " + path_ + " is truncated");
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::uint64_t le(int n) {
    need(std::uint64_t(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(b_[pos_ + std::size_t(i)]) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string path_;
};

}  // namespace detail

/// Snapshot of a model plus training state.
inline Checkpoint make_checkpoint(Model<float>& model, const TrainState& state, std::uint64_t config_hash) {
  Checkpoint c;
  c.arch = model.arch();
  c.num_classes = model.num_classes();
  c.epoch = state.epoch;
  c.seed = state.seed;
  c.config_hash = config_hash;
  const auto params = model.parameters();
  for (auto* p : params) c.tensors.emplace(p->name, *p->value);
  for (auto& b : model.buffers()) c.tensors.emplace(b.name, *b.value);
  for (std::size_t i = 0; i < state.momentum.size() && i < params.size(); ++i)
    c.tensors.emplace("momentum/" + params[i]->name, state.momentum[i]);
  c.history = state.history;
  return c;
}

inline void checkpoint_save(const Checkpoint& c, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(Checkpoint::kMagic, 8);
  w.u32(Checkpoint::kVersion);
  w.str(c.arch);
  w.u64(c.num_classes);
  w.u64(c.epoch);
  w.u64(c.seed);
  w.u64(c.config_hash);
  w.u64(c.tensors.size());
  for (const auto& [name, t] : c.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape().dims()) w.u64(d);
    for (float v : t.data()) w.f32(v);
  }
  w.u64(c.history.size());
  for (const auto& h : c.history) {
    w.u64(h.epoch);
    for (double v : {h.learning_rate, h.train_loss, h.train_acc, h.test_loss, h.test_acc, h.train_seconds,
                     h.eval_seconds})
      w.f64(v);
  }
  w.u64(Fnv1a().update(w.bytes()).value());

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out.write(reinterpret_cast<const char*>(w.bytes().data()), std::streamsize(w.bytes().size()));
    if (!out) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline void checkpoint_save(Model<float>& model, const TrainState& state, std::uint64_t config_hash,
                            const std::filesystem::path& path) {
  checkpoint_save(make_checkpoint(model, state, config_hash), path);
}

/// Reads and verifies a checkpoint. Truncation, a bad magic/version or a
/// checksum mismatch raise CorruptionError.
inline Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 8 + 4 + 8) throw CorruptionError("checkpoint " + name + " is truncated");
  const std::size_t body = bytes.size() - 8;
  detail::ByteReader tail(bytes, bytes.size(), name);
  tail.skip(body);
  const std::uint64_t stored = tail.u64();
  if (!std::equal(bytes.begin(), bytes.begin() + 8, Checkpoint::kMagic))
    throw CorruptionError(name + " is not an hpcnn checkpoint");

  detail::ByteReader r(bytes, body, name);
  r.skip(8);
  const auto version = r.u32();
  if (version != Checkpoint::kVersion)
    throw CorruptionError(name + ": unsupported checkpoint version " + std::to_string(version));
  if (Fnv1a().update(std::span<const std::uint8_t>(bytes.data(), body)).value() != stored) {
    throw CorruptionError("checkpoint " + name + " is truncated or damaged (checksum mismatch)");
  }
  Checkpoint c;
  c.arch = r.str();
  c.num_classes = r.u64();
  c.epoch = r.u64();
  c.seed = r.u64();
  c.config_hash = r.u64();
  const auto count = r.u64();
  for (std::uint64_t t = 0; t < count; ++t) {
    std::string tname = r.str();
    const auto rank = r.u32();
    if (rank == 0 || rank > 8) throw CorruptionError(name + ": tensor " + tname + " has rank " + std::to_string(rank));
    std::vector<std::size_t> dims(rank);
    std::uint64_t numel = 1;
    for (auto& d : dims) {
      d = r.u64();
      if (d == 0) throw CorruptionError(name + ": tensor " + tname + " has a zero dimension");
      numel *= d;
      r.need(numel * 4);
    }
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32();
    c.tensors.emplace(std::move(tname), Tensor<float>(Shape(dims), std::move(data)));
  }
  const auto hist = r.u64();
  r.need(hist * 64);
  for (std::uint64_t h = 0; h < hist; ++h) {
    EpochRecord e;
    e.epoch = r.u64();
    e.learning_rate = r.f64();
    e.train_loss = r.f64();
    e.train_acc = r.f64();
    e.test_loss = r.f64();
    e.test_acc = r.f64();
    e.train_seconds = r.f64();
    e.eval_seconds = r.f64();
    c.history.push_back(e);
  }
  if (r.pos() != body) throw CorruptionError(name + ": trailing bytes after history");
  return c;
}

/// Copies a checkpoint into a model of the same architecture and returns
/// the training state to resume from.
inline TrainState restore(Model<float>& model, const Checkpoint& c) {
  if (c.arch != model.arch() || c.num_classes != model.num_classes())
    throw ArgumentError("checkpoint holds " + c.arch + "/" + std::to_string(c.num_classes) + ", model is " +
                        model.arch() + "/" + std::to_string(model.num_classes()));
  auto take = [&](const std::string& n, Tensor<float>& dst) {
    auto it = c.tensors.find(n);
    if (it == c.tensors.end()) throw CorruptionError("checkpoint lacks tensor " + n);
    if (it->second.shape() != dst.shape())
      throw CorruptionError("checkpoint tensor " + n + " has shape " + it->second.shape().str() + ", expected " +
                            dst.shape().str());
    dst = it->second;
  };
  TrainState s;
  s.epoch = c.epoch;
  s.seed = c.seed;
  s.history = c.history;
  const auto params = model.parameters();
  for (auto* p : params) take(p->name, *p->value);
  for (auto& b : model.buffers()) take(b.name, *b.value);
  if (c.tensors.count("momentum/" + params.front()->name)) {
    for (auto* p : params) {
      s.momentum.emplace_back(p->value->shape());
      take("momentum/" + p->name, s.momentum.back());
    }
  }
  return s;
}

}  // namespace hpcnn

#endif  // HPCNN_TRAIN_CHECKPOINT_HPP
