#ifndef HPCNN_BENCH_BENCH_HPP
#define HPCNN_BENCH_BENCH_HPP

// Benchmark harness: runs training configurations, collects the comparison
// table and writes the per-run artifacts (curves, confusion, checkpoint).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hpcnn/core/hash.hpp"
#include "hpcnn/data/cifar.hpp"
#include "hpcnn/metrics/metrics.hpp"
#include "hpcnn/model/zoo.hpp"
#include "hpcnn/perf/autotune.hpp"
#include "hpcnn/train/checkpoint.hpp"
#include "hpcnn/train/trainer.hpp"

namespace hpcnn::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline const std::vector<std::string> kReportColumns = {"Configuration", "Epoch",    "Test Acc",
                                                        "Precision",     "Recall",   "F1 Score",
                                                        "Training Time(s)"};
inline const std::vector<std::string> kCurveColumns = {"epoch",    "train_loss", "train_acc",
                                                       "test_loss", "test_acc",  "epoch_time_s"};

enum class Format { Markdown, Csv, Json };

inline Format parse_format(const std::string& s) {
  if (s == "markdown" || s == "md") return Format::Markdown;
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw ConfigError("unknown report format '" + s + "' (expected markdown, csv or json)");
}

inline std::string extension(Format f) {
  switch (f) {
    case Format::Markdown: return "md";
    case Format::Csv: return "csv";
    case Format::Json: return "json";
  }
  return "txt";
}

struct RunConfig {
  std::string label;  // empty: derived from model and perf settings
  TrainConfig train;
  std::optional<std::uint64_t> seed;  // mandatory; copied into train.seed
  fs::path data_dir;
  bool synthetic = false;
  std::size_t synthetic_train = 5000;
  std::size_t synthetic_test = 1000;
  std::size_t subset = 0;       // per-class cap on the training split, 0 keeps all
  std::size_t test_subset = 0;  // same for the test split
  fs::path out_dir = "bench_out";
  Format format = Format::Markdown;
  fs::path tune_cache;  // empty: no persistent cache

  void validate() const {
    if (!seed) throw ConfigError("a seed is required (--seed); unseeded runs are not supported");
    if (train.model != "resnet18" && train.model != "alexnet" && train.model != "tinycnn")
      throw ConfigError("unknown model '" + train.model + "' (expected resnet18, alexnet or tinycnn)");
    if (!synthetic && data_dir.empty()) throw ConfigError("either --data-dir or --synthetic is required");
    if (synthetic && (synthetic_train == 0 || synthetic_test == 0))
      throw ConfigError("synthetic train and test sizes must be positive");
    train.validate();
  }

  TrainConfig resolved() const {
    TrainConfig t = train;
    t.seed = seed.value_or(0);
    return t;
  }

  /// Everything that shapes the result: training settings plus data selection.
  std::string canonical() const {
    std::ostringstream os;
    os << resolved().canonical() << ";data=" << (synthetic ? "synthetic" : data_dir.string());
    if (synthetic) os << ";synthetic_train=" << synthetic_train << ";synthetic_test=" << synthetic_test;
    os << ";subset=" << subset << ";test_subset=" << test_subset;
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }

  std::string display_label() const {
    if (!label.empty()) return label;
    std::string name = train.model == "resnet18" ? "ResNet-18" : train.model == "alexnet" ? "AlexNet" : "TinyCNN";
    const auto& perf = train.perf;
    if (perf.autotune && perf.num_threads > 1) return "HPC tools & " + name;
    if (!perf.autotune && perf.num_threads == 1) return "No HPC tools & " + name;
    return name + " (" + std::to_string(perf.num_threads) + " threads, autotune " + (perf.autotune ? "on" : "off") + ")";
  }
};

/// The two runtime settings toggled together: "hpc" = 4 threads with kernel
/// autotuning, "baseline" = 1 thread with the static UNROLL kernel.
inline void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "hpc") {
    cfg.train.perf.num_threads = 4;
    cfg.train.perf.autotune = true;
  } else if (preset == "baseline") {
    cfg.train.perf.num_threads = 1;
    cfg.train.perf.autotune = false;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected hpc or baseline)");
  }
}

inline std::vector<std::size_t> parse_milestones(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw ConfigError("bad milestone '" + item + "'");
    out.push_back(std::size_t(v));
  }
  return out;
}

namespace detail {

template <typename V>
V json_value(const json& j, const std::string& key) {
  try {
    return j.get<V>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Applies one JSON object whose keys mirror the long CLI flags
/// ("batch-size", "milestones", ...). Keys listed in `forbidden` are rejected.
inline void apply_json(RunConfig& cfg, const json& obj, const std::vector<std::string>& forbidden = {}) {
  using detail::json_value;
  if (!obj.is_object()) throw ConfigError("each configuration must be a JSON object");
  // The preset goes first so explicit keys in the same object override it.
  if (obj.contains("preset")) apply_preset(cfg, json_value<std::string>(obj["preset"], "preset"));
  for (const auto& [key, v] : obj.items()) {
    if (std::find(forbidden.begin(), forbidden.end(), key) != forbidden.end())
      throw ConfigError("'" + key + "' must be shared by all runs; set it in \"base\"");
    if (key == "preset") continue;
    if (key == "label") cfg.label = json_value<std::string>(v, key);
    else if (key == "model") cfg.train.model = json_value<std::string>(v, key);
    else if (key == "epochs") cfg.train.epochs = json_value<std::size_t>(v, key);
    else if (key == "batch-size") cfg.train.batch_size = json_value<std::size_t>(v, key);
    else if (key == "lr") cfg.train.optimizer.learning_rate = json_value<double>(v, key);
    else if (key == "momentum") cfg.train.optimizer.momentum = json_value<double>(v, key);
    else if (key == "weight-decay") cfg.train.optimizer.weight_decay = json_value<double>(v, key);
    else if (key == "milestones") {
      cfg.train.scheduler.milestones =
          v.is_string() ? parse_milestones(v.get<std::string>()) : json_value<std::vector<std::size_t>>(v, key);
    } else if (key == "gamma") cfg.train.scheduler.gamma = json_value<double>(v, key);
    else if (key == "threads") cfg.train.perf.num_threads = json_value<std::size_t>(v, key);
    else if (key == "autotune") cfg.train.perf.autotune = json_value<bool>(v, key);
    else if (key == "deterministic") cfg.train.perf.deterministic = json_value<bool>(v, key);
    else if (key == "data-dir") cfg.data_dir = json_value<std::string>(v, key);
    else if (key == "synthetic") cfg.synthetic = json_value<bool>(v, key);
    else if (key == "synthetic-train") cfg.synthetic_train = json_value<std::size_t>(v, key);
    else if (key == "synthetic-test") cfg.synthetic_test = json_value<std::size_t>(v, key);
    else if (key == "subset") cfg.subset = json_value<std::size_t>(v, key);
    else if (key == "test-subset") cfg.test_subset = json_value<std::size_t>(v, key);
    else if (key == "seed") cfg.seed = json_value<std::uint64_t>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

/// A compare file is either {"base": {...}, "runs": [{...}, ...]} or a bare
/// list of run objects. Seed and data selection belong to "base" so every run
/// sees the same data; per-run objects may only change the rest.
inline std::vector<RunConfig> parse_compare(const json& doc, const RunConfig& defaults) {
  static const std::vector<std::string> shared = {"seed",   "data-dir",    "synthetic",   "synthetic-train",
                                                  "subset", "test-subset", "synthetic-test"};
  RunConfig base = defaults;
  json runs;
  if (doc.is_array()) {
    runs = doc;
  } else if (doc.is_object()) {
    if (doc.contains("base")) apply_json(base, doc["base"]);
    if (!doc.contains("runs")) throw ConfigError("compare file needs a \"runs\" list");
    runs = doc["runs"];
    for (const auto& [key, _] : doc.items())
      if (key != "base" && key != "runs") throw ConfigError("unknown top-level key '" + key + "'");
  } else {
    throw ConfigError("compare file must hold a JSON object or list");
  }
  if (!runs.is_array() || runs.empty()) throw ConfigError("compare needs at least one run");
  std::vector<RunConfig> out;
  for (const auto& r : runs) {
    RunConfig c = base;
    apply_json(c, r, shared);
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<RunConfig> load_compare_file(const fs::path& path, const RunConfig& defaults) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open compare file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("compare file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_compare(doc, defaults);
}

struct Splits {
  data::Dataset train, test;
};

/// Synthetic splits are cut from one generated set so train and test share
/// the per-class textures and differ only in noise.
inline Splits load_data(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.seed.value_or(0);
  Splits s;
  if (cfg.synthetic) {
    const auto all = data::synthetic_dataset(data::kCifarClasses, cfg.synthetic_train + cfg.synthetic_test, seed);
    s.train.num_classes = s.test.num_classes = all.num_classes;
    for (std::size_t i = 0; i < all.size(); ++i)
      (i < cfg.synthetic_train ? s.train : s.test).push_back(all.image_bytes(i), all.labels[i]);
  } else {
    auto c = data::load_cifar10(cfg.data_dir);
    s.train = std::move(c.train);
    s.test = std::move(c.test);
  }
  if (cfg.subset) s.train = data::stratified_subset(s.train, cfg.subset, seed);
  if (cfg.test_subset) s.test = data::stratified_subset(s.test, cfg.test_subset, derive_seed(seed, {1}));
  return s;
}

inline std::string machine_descriptor() {
  std::ostringstream os;
  os << std::thread::hardware_concurrency() << " hardware threads";
#if defined(__clang__)
  os << ", clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  os << ", gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
  return os.str();
}

struct RunResult {
  RunConfig config;
  std::string label;
  std::uint64_t config_hash = 0;
  TrainState state;
  metrics::MetricsReport metrics;
  std::vector<Tensor<float>> parameters;  // final weights, for determinism checks
  fs::path artifact_dir;                  // empty when artifacts were not written

  double test_accuracy() const { return state.history.empty() ? 0.0 : state.history.back().test_acc; }
  double training_seconds() const { return state.total_seconds(); }
};

inline std::vector<std::string> class_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c)
    names.push_back(k == data::kCifarClasses ? data::kClassNames[c] : "class_" + std::to_string(c));
  return names;
}


inline std::string metadata_line(std::uint64_t seed, std::uint64_t hash) {
  return "# seed=" + std::to_string(seed) + " config_hash=" + hex64(hash);
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

/// One row per epoch, preceded by a "# seed=... config_hash=..." line.
inline std::string format_curves(const std::vector<EpochRecord>& history, std::uint64_t seed, std::uint64_t hash) {
  std::ostringstream os;
  os << metadata_line(seed, hash) << '\n';
  for (std::size_t i = 0; i < kCurveColumns.size(); ++i) os << (i ? "," : "") << kCurveColumns[i];
  os << '\n';
  os.precision(9);
  for (const auto& h : history)
    os << h.epoch + 1 << ',' << h.train_loss << ',' << h.train_acc << ',' << h.test_loss << ',' << h.test_acc << ','
       << h.epoch_seconds() << '\n';
  return os.str();
}

/// Raw counts (rows = actual, columns = predicted) with class names.
inline std::string format_confusion_counts(const metrics::ConfusionMatrix& cm, std::uint64_t seed, std::uint64_t hash) {
  const auto names = class_names(cm.classes());
  std::ostringstream os;
  os << metadata_line(seed, hash) << "\nactual\\predicted";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  for (std::size_t r = 0; r < cm.classes(); ++r) {
    os << names[r];
    for (std::size_t c = 0; c < cm.classes(); ++c) os << ',' << cm.at(r, c);
    os << '\n';
  }
  return os.str();
}

/// Row-normalized view: each row sums to 1, or is all zero for a class with
/// no samples.
inline std::string format_confusion_normalized(const metrics::ConfusionMatrix& cm, std::uint64_t seed,
                                               std::uint64_t hash) {
  const auto names = class_names(cm.classes());
  const auto norm = cm.row_normalized();
  const std::size_t k = cm.classes();
  std::ostringstream os;
  os << metadata_line(seed, hash) << "\nactual\\predicted";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  os.precision(12);
  for (std::size_t r = 0; r < k; ++r) {
    os << names[r];
    for (std::size_t c = 0; c < k; ++c) os << ',' << norm[r * k + c];
    os << '\n';
  }
  return os.str();
}

/// Table of results. With `speedup` a trailing column holds
/// time(first row) / time(row).
inline std::string format_report(const std::vector<RunResult>& rows, Format fmt, bool speedup = false) {
  using detail::fixed;
  auto pct = [](double v) { return fixed(100.0 * v, 3); };
  std::vector<std::string> header = kReportColumns;
  if (speedup) header.push_back("Speedup");
  const double base_time = rows.empty() ? 0.0 : rows.front().training_seconds();
  auto speedup_of = [&](const RunResult& r) {
    return r.training_seconds() > 0 ? base_time / r.training_seconds() : 0.0;
  };

  std::ostringstream os;
  if (fmt == Format::Json) {
    json doc;
    doc["columns"] = header;
    doc["machine"] = machine_descriptor();
    doc["rows"] = json::array();
    for (const auto& r : rows) {
      json row;
      row["Configuration"] = r.label;
      row["Epoch"] = r.state.epoch;
      row["Test Acc"] = 100.0 * r.test_accuracy();
      row["Precision"] = 100.0 * r.metrics.macro_precision;
      row["Recall"] = 100.0 * r.metrics.macro_recall;
      row["F1 Score"] = 100.0 * r.metrics.macro_f1;
      row["Training Time(s)"] = r.training_seconds();
      if (speedup) row["Speedup"] = speedup_of(r);
      row["seed"] = r.state.seed;
      row["config_hash"] = hex64(r.config_hash);
      row["config"] = r.config.canonical();
      doc["rows"].push_back(row);
    }
    os << doc.dump(2) << '\n';
    return os.str();
  }

  auto cells = [&](const RunResult& r, bool with_percent) {
    const std::string unit = with_percent ? "%" : "";
    std::vector<std::string> c = {r.label,
                                  std::to_string(r.state.epoch),
                                  pct(r.test_accuracy()) + unit,
                                  pct(r.metrics.macro_precision) + unit,
                                  pct(r.metrics.macro_recall) + unit,
                                  pct(r.metrics.macro_f1) + unit,
                                  fixed(r.training_seconds(), 2)};
    if (speedup) c.push_back(fixed(speedup_of(r), 3));
    return c;
  };

  if (fmt == Format::Csv) {
    for (const auto& r : rows) os << metadata_line(r.state.seed, r.config_hash) << " run=" << r.label << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << detail::csv_field(header[i]);
    os << '\n';
    for (const auto& r : rows) {
      const auto c = cells(r, false);
      for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << detail::csv_field(c[i]);
      os << '\n';
    }
    return os.str();
  }

  os << '|';
  for (const auto& h : header) os << ' ' << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? " ---: |" : " --- |");
  os << '\n';
  for (const auto& r : rows) {
    os << '|';
    for (const auto& c : cells(r, true)) os << ' ' << c << " |";
    os << '\n';
  }
  os << '\n';
  for (const auto& r : rows)
    os << "- " << r.label << ": seed " << r.state.seed << ", config hash " << hex64(r.config_hash) << '\n';
  os << "- machine: " << machine_descriptor() << '\n';
  return os.str();
}

/// Writes curves.csv, confusion.csv, confusion_normalized.csv and
/// checkpoint.bin for one finished run into `dir`.
inline void write_artifacts(const RunResult& r, Model<float>& model, const fs::path& dir) {
  const std::uint64_t seed = r.state.seed;
  detail::write_text(dir / "curves.csv", format_curves(r.state.history, seed, r.config_hash));
  detail::write_text(dir / "confusion.csv", format_confusion_counts(r.state.confusion, seed, r.config_hash));
  detail::write_text(dir / "confusion_normalized.csv",
                     format_confusion_normalized(r.state.confusion, seed, r.config_hash));
  try {
    checkpoint_save(model, r.state, r.config_hash, dir / "checkpoint.bin");
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
}

struct RunOptions {
  bool write_artifacts = true;
  fs::path artifact_dir;  // defaults to cfg.out_dir
  std::ostream* log = nullptr;
};

/// Trains and evaluates one configuration; data may be passed in so compare
/// can share one loaded set across runs.
inline RunResult run(const RunConfig& cfg, const Splits& data, const RunOptions& opt = {}) {
  cfg.validate();
  if (data.test.size() == 0) throw DataError("the test split is empty");
  const TrainConfig tc = cfg.resolved();
  if (!cfg.tune_cache.empty()) perf::tuner().cache() = perf::TuneCache::load(cfg.tune_cache.string());

  RunResult r;
  r.config = cfg;
  r.label = cfg.display_label();
  r.config_hash = cfg.hash();
  auto model = build_model<float>(tc.model, data.train.num_classes, tc.seed);
  r.state = train_epochs(model, data.train, data.test, tc, tc.epochs, {}, [&](const EpochRecord& e, const TrainState&) {
    if (opt.log)
      *opt.log << r.label << " epoch " << e.epoch + 1 << '/' << tc.epochs << ": train loss "
               << detail::fixed(e.train_loss, 4) << ", train acc " << detail::fixed(100 * e.train_acc, 2)
               << "%, test acc " << detail::fixed(100 * e.test_acc, 2) << "%, "
               << detail::fixed(e.epoch_seconds(), 2) << " s" << std::endl;
  });
  r.metrics = metrics::compute_metrics(r.state.confusion);
  for (auto* p : model.parameters()) r.parameters.push_back(*p->value);

  if (!cfg.tune_cache.empty()) perf::tuner().cache().save(cfg.tune_cache.string());
  if (opt.write_artifacts) {
    r.artifact_dir = opt.artifact_dir.empty() ? cfg.out_dir : opt.artifact_dir;
    write_artifacts(r, model, r.artifact_dir);
  }
  return r;
}

inline RunResult run(const RunConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  return run(cfg, load_data(cfg), opt);
}

inline std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += char(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "run" : out;
}

/// Runs every configuration in turn on the same data. Artifacts for run i go
/// to out_dir/<i>_<label>/, the combined report to out_dir/report.<ext>.
inline std::vector<RunResult> compare(const std::vector<RunConfig>& cfgs, const fs::path& out_dir, Format fmt,
                                      const RunOptions& opt = {}) {
  if (cfgs.empty()) throw ConfigError("compare needs at least one run");
  for (const auto& c : cfgs) c.validate();
  const auto data = load_data(cfgs.front());
  std::vector<RunResult> rows;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    RunOptions o = opt;
    o.artifact_dir = out_dir / (std::to_string(i + 1) + "_" + slug(cfgs[i].display_label()));
    rows.push_back(run(cfgs[i], data, o));
  }
  if (opt.write_artifacts) detail::write_text(out_dir / ("report." + extension(fmt)), format_report(rows, fmt, true));
  return rows;
}

/// Process exit status for an exception escaping the CLI.
inline int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const CorruptionError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e))
    return 4;
  return 1;
}

}  // namespace hpcnn::bench

#endif  // HPCNN_BENCH_BENCH_HPP
