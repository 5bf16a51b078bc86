// Copyright 2026 The rimseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dataset sweeps. Every (image, configuration) pair is an independent job;
// jobs run on a small thread pool and their rows are written in job order
// by a single writer as soon as all earlier rows are complete.
//
// Thread count: SweepOptions::threads, else the RIMSEG_THREADS environment
// variable, else 1.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "rimseg/image.hpp"
#include "rimseg/image_io.hpp"
#include "rimseg/label_io.hpp"
#include "rimseg/metrics.hpp"
#include "rimseg/normalize.hpp"
#include "rimseg/records.hpp"
#include "rimseg/segmenter.hpp"
#include "rimseg/slic.hpp"

namespace rimseg {

inline constexpr const char* kMethodOurs = "ours";
inline constexpr const char* kMethodOursNoRecons = "ours_no_recons";
inline constexpr const char* kMethodSlic = "slic";

struct SweepOptions {
  std::size_t threads = 0;       // 0: RIMSEG_THREADS or 1
  std::size_t max_side = 0;      // 0: native resolution
  int epsilon = kDefaultBoundaryTolerance;
  std::ostream* log = nullptr;   // warnings and progress; nullptr for silence
};

inline std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RIMSEG_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return 1;
}

// Supported images directly inside `dir`, sorted by file name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument(dir.string() + ": not a readable directory");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_supported_image(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// File name up to the first '.', e.g. "img.2.png" -> "img".
inline std::string image_stem(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  return name.substr(0, name.find('.'));
}

// Ground-truth files in `gt_dir` sharing the image's stem, sorted; several
// files are several annotations of the same image.
inline std::vector<std::filesystem::path> find_ground_truth(const std::filesystem::path& gt_dir,
                                                            const std::string& stem) {
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(gt_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = detail::lower_extension(entry.path());
    if ((ext == ".png" || ext == ".csv") && image_stem(entry.path()) == stem) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline RgbImage load_for_experiment(const std::filesystem::path& path, std::size_t max_side) {
  RgbImage img = load_image(path);
  return max_side > 0 ? downscale_to_fit(img, max_side) : img;
}

namespace detail {

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

// Runs jobs[i]() on `threads` workers and hands results to `emit` in index
// order from whichever worker completes the pending prefix.
inline std::vector<ExperimentRecord> run_jobs(
    const std::vector<std::function<ExperimentRecord()>>& jobs, std::size_t threads,
    const std::function<void(const ExperimentRecord&)>& emit) {
  std::vector<std::optional<ExperimentRecord>> slots(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t written = 0;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      ExperimentRecord r = jobs[i]();
      std::lock_guard<std::mutex> lock(mutex);
      slots[i] = std::move(r);
      while (written < slots.size() && slots[written]) emit(*slots[written++]);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::vector<ExperimentRecord> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline ExperimentRecord base_record(const std::string& image_id, const std::string& method,
                                    const RunConfig& cfg, int epsilon) {
  ExperimentRecord r;
  r.image_id = image_id;
  r.method = method;
  r.seed = cfg.seed;
  r.n_target = cfg.n_superpixels;
  r.lambda = cfg.lambda;
  r.alpha = cfg.alpha;
  r.beta = cfg.beta;
  r.sigma = cfg.sigma;
  r.iterations = cfg.iterations;
  r.learning_rate = cfg.learning_rate;
  r.width_mult = cfg.width_mult;
  r.epsilon = epsilon;
  return r;
}

inline void fill_from_result(ExperimentRecord& r, const SegmentationResult& res) {
  r.n_superpixels_used = res.n_superpixels_used;
  r.n_components = res.n_connected_components;
  if (!res.loss_history.empty()) {
    r.initial_loss = res.loss_history.front().loss.total;
    r.final_loss = res.loss_history.back().loss.total;
  }
}

template <typename Body>
ExperimentRecord guarded(ExperimentRecord r, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.status = "error: " + one_line(e.what());
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

class CsvSink {
 public:
  explicit CsvSink(const std::filesystem::path& path) {
    if (path.empty()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw FormatError(path.string() + ": cannot open for writing");
    out_ << csv_header() << '\n' << std::flush;
  }
  void operator()(const ExperimentRecord& r) {
    if (out_.is_open()) out_ << to_csv_row(r) << '\n' << std::flush;
  }

 private:
  std::ofstream out_;
};

}  // namespace detail

// One row per (image, lambda, seed), all other settings from `base`.
inline std::vector<ExperimentRecord> run_lambda_sweep(const std::filesystem::path& image_dir,
                                                      const std::vector<double>& lambdas,
                                                      const RunConfig& base,
                                                      const std::vector<std::uint64_t>& seeds,
                                                      const std::filesystem::path& out_csv,
                                                      const SweepOptions& opt = {}) {
  const auto images = list_images(image_dir);
  detail::CsvSink sink(out_csv);
  std::vector<std::function<ExperimentRecord()>> jobs;
  for (const auto& path : images) {
    for (double lambda : lambdas) {
      for (std::uint64_t seed : seeds) {
        RunConfig cfg = base;
        cfg.lambda = lambda;
        cfg.seed = seed;
        jobs.push_back([path, cfg, opt] {
          return detail::guarded(
              detail::base_record(image_stem(path), kMethodOurs, cfg, opt.epsilon),
              [&](ExperimentRecord& r) {
                const NormalizedInput in = normalize_inputs(load_for_experiment(path, opt.max_side));
                detail::fill_from_result(r, segment(in.image, in.coords, cfg));
              });
        });
      }
    }
  }
  return detail::run_jobs(jobs, resolve_thread_count(opt.threads), [&](const ExperimentRecord& r) {
    sink(r);
    if (opt.log) {
      *opt.log << r.image_id << " lambda=" << r.lambda << " seed=" << r.seed
               << " used=" << r.n_superpixels_used << " " << r.status << '\n';
    }
  });
}

inline std::vector<ExperimentRecord> run_lambda_sweep(const std::filesystem::path& image_dir,
                                                      const std::vector<double>& lambdas,
                                                      const RunConfig& base,
                                                      const std::filesystem::path& out_csv,
                                                      const SweepOptions& opt = {}) {
  return run_lambda_sweep(image_dir, lambdas, base, {base.seed}, out_csv, opt);
}

struct BenchmarkConfig {
  std::vector<std::string> methods = {kMethodOurs, kMethodOursNoRecons, kMethodSlic};
  std::vector<std::size_t> counts = {50};
  RunConfig run;    // n_superpixels is replaced by each count
  SlicConfig slic;  // k is replaced by each count
};

// One row per (image with ground truth, method, count). "ours_no_recons"
// is "ours" with beta = 0.
inline std::vector<ExperimentRecord> run_benchmark(const std::filesystem::path& image_dir,
                                                   const std::filesystem::path& gt_dir,
                                                   const BenchmarkConfig& bench,
                                                   const std::filesystem::path& out_csv,
                                                   const SweepOptions& opt = {}) {
  for (const auto& m : bench.methods) {
    if (m != kMethodOurs && m != kMethodOursNoRecons && m != kMethodSlic) {
      throw std::invalid_argument("run_benchmark: unknown method '" + m + "'");
    }
  }
  if (!std::filesystem::is_directory(gt_dir)) {
    throw std::invalid_argument(gt_dir.string() + ": not a readable directory");
  }
  const auto images = list_images(image_dir);
  detail::CsvSink sink(out_csv);
  std::vector<std::function<ExperimentRecord()>> jobs;
  for (const auto& path : images) {
    const std::string stem = image_stem(path);
    const auto gts = find_ground_truth(gt_dir, stem);
    if (gts.empty()) {
      if (opt.log) *opt.log << "warning: no ground truth for " << path.string() << ", skipped\n";
      continue;
    }
    for (const auto& method : bench.methods) {
      for (std::size_t count : bench.counts) {
        RunConfig cfg = bench.run;
        cfg.n_superpixels = count;
        if (method == kMethodOursNoRecons) cfg.beta = 0.0;
        ExperimentRecord proto = detail::base_record(stem, method, cfg, opt.epsilon);
        SlicConfig scfg = bench.slic;
        scfg.k = count;
        if (method == kMethodSlic) {
          proto.lambda = proto.alpha = proto.beta = proto.sigma = 0.0;
          proto.iterations = scfg.max_iters;
          proto.learning_rate = proto.width_mult = 0.0;
          proto.seed = 0;
          proto.compactness = scfg.compactness;
        }
        jobs.push_back([path, gts, cfg, scfg, method, proto, opt] {
          return detail::guarded(proto, [&](ExperimentRecord& r) {
            const RgbImage img = load_for_experiment(path, opt.max_side);
            std::vector<LabelMap> truth;
            for (const auto& g : gts) {
              LabelMap gt = load_labelmap(g);
              // Follows the image when --max-side shrank it.
              if (gt.width != img.width || gt.height != img.height) {
                gt = resize_nearest(gt, img.width, img.height);
              }
              truth.push_back(std::move(gt));
            }
            LabelMap labels;
            if (method == kMethodSlic) {
              labels = slic(img, scfg);
              r.n_superpixels_used = count_superpixels(labels);
              r.n_components = count_connected_components(labels);
            } else {
              const NormalizedInput in = normalize_inputs(img);
              SegmentationResult res = segment(in.image, in.coords, cfg);
              detail::fill_from_result(r, res);
              labels = std::move(res.labels);
            }
            const MetricsReport m = evaluate(labels, truth, opt.epsilon);
            r.asa = m.asa;
            r.br = m.br;
          });
        });
      }
    }
  }
  return detail::run_jobs(jobs, resolve_thread_count(opt.threads), [&](const ExperimentRecord& r) {
    sink(r);
    if (opt.log) {
      *opt.log << r.image_id << " " << r.method << " n=" << r.n_target
               << " used=" << r.n_superpixels_used << " " << r.status << '\n';
    }
  });
}

}  // namespace rimseg
