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

// Command-line front end:
//
//   rimseg segment      --image a.png --out a_labels.png [--recon r.png] [--loss-csv l.csv]
//   rimseg eval         --labels a_labels.png --gt a_gt.png [--gt ...] [--epsilon 1]
//   rimseg sweep-lambda --images DIR --lambdas 0.1,2 --out sweep.csv
//   rimseg benchmark    --images DIR --gt DIR --counts 25,50,100 --out bench.csv
//   rimseg slic         --image a.png --k 100 --out a_slic.png

#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "rimseg/experiments.hpp"
#include "rimseg/image_io.hpp"
#include "rimseg/label_io.hpp"
#include "rimseg/metrics.hpp"
#include "rimseg/normalize.hpp"
#include "rimseg/records.hpp"
#include "rimseg/segmenter.hpp"
#include "rimseg/slic.hpp"

namespace rimseg {

namespace detail {

inline void add_run_flags(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--n", cfg.n_superpixels, "Upper bound N on the number of superpixels")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{kMaxPngLabel} + 1));
  cmd.add_option("--lambda", cfg.lambda, "Weight of the marginal entropy term")->capture_default_str();
  cmd.add_option("--alpha", cfg.alpha, "Weight of the smoothness term")->capture_default_str();
  cmd.add_option("--beta", cfg.beta, "Weight of the reconstruction term")->capture_default_str();
  cmd.add_option("--sigma", cfg.sigma, "Edge sensitivity of the smoothness weights")
      ->capture_default_str();
  cmd.add_option("--iters", cfg.iterations, "Optimization iterations T")->capture_default_str();
  cmd.add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
  cmd.add_option("--seed", cfg.seed, "Initialization seed")->capture_default_str();
  cmd.add_option("--width", cfg.width_mult, "Hidden channel width multiplier")->capture_default_str();
  cmd.add_option("--log-every", cfg.log_every, "Loss logging interval")->capture_default_str();
}

inline void add_slic_flags(CLI::App& cmd, SlicConfig& cfg, bool with_k) {
  if (with_k) cmd.add_option("--k", cfg.k, "Target number of superpixels")->capture_default_str();
  cmd.add_option("--compactness", cfg.compactness, "Spatial weight m")->capture_default_str();
  cmd.add_option("--max-iters", cfg.max_iters, "k-means iterations")->capture_default_str();
  cmd.add_flag("!--no-connectivity", cfg.enforce_connectivity,
               "Skip merging of small disconnected fragments");
}

inline void write_loss_history(const std::filesystem::path& path,
                               const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "iteration,clustering,smoothness,recons,total\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6g,%.6g\n", h.iteration, h.loss.clustering,
                  h.loss.smoothness, h.loss.recons, h.loss.total);
    out << buf;
  }
  if (!out) throw FormatError(path.string() + ": write failed");
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Unsupervised superpixel segmentation by per-image CNN optimization", "rimseg"};
  app.require_subcommand(1);

  // segment
  RunConfig run;
  std::string image_path, out_path, recon_path, loss_path;
  std::size_t max_side = 0;
  bool quiet = false;
  auto* seg = app.add_subcommand("segment", "Segment one image into superpixels");
  seg->add_option("--image", image_path, "Input PNG or PPM")->required();
  seg->add_option("--out", out_path, "Output label map (.png, 16-bit, or .csv)")->required();
  seg->add_option("--recon", recon_path, "Optional reconstruction PNG");
  seg->add_option("--loss-csv", loss_path, "Optional loss history CSV");
  seg->add_option("--max-side", max_side, "Downscale so no side exceeds this (0 keeps size)");
  seg->add_flag("--quiet", quiet, "Suppress progress output");
  detail::add_run_flags(*seg, run);

  // eval
  std::string labels_path;
  std::vector<std::string> gt_paths;
  int epsilon = kDefaultBoundaryTolerance;
  auto* ev = app.add_subcommand("eval", "Score a label map against ground truth");
  ev->add_option("--labels", labels_path, "Superpixel label map")->required();
  ev->add_option("--gt", gt_paths, "Ground-truth label map; repeat for several annotations")
      ->required();
  ev->add_option("--epsilon", epsilon, "Boundary tolerance in pixels")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  // sweep-lambda
  std::string images_dir, csv_path;
  std::vector<double> lambdas = {0.0, 0.5, 1.0, 2.0, 3.0};
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 0;
  RunConfig sweep_run;
  auto* sweep = app.add_subcommand("sweep-lambda", "Superpixel counts over a range of lambda");
  sweep->add_option("--images", images_dir, "Directory of input images")->required();
  sweep->add_option("--lambdas", lambdas, "Comma-separated lambda values")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--seeds", seeds, "Comma-separated seeds (default: --seed)")->delimiter(',');
  sweep->add_option("--out", csv_path, "Output CSV")->required();
  sweep->add_option("--max-side", max_side, "Downscale so no side exceeds this (0 keeps size)");
  sweep->add_option("--threads", threads, "Parallel jobs (default: RIMSEG_THREADS or 1)");
  sweep->add_option("--epsilon", epsilon, "Boundary tolerance recorded with each row");
  detail::add_run_flags(*sweep, sweep_run);

  // benchmark
  std::string gt_dir;
  BenchmarkConfig bench;
  auto* bm = app.add_subcommand("benchmark", "ASA / BR of each method against ground truth");
  bm->add_option("--images", images_dir, "Directory of input images")->required();
  bm->add_option("--gt", gt_dir, "Directory of ground-truth label maps")->required();
  bm->add_option("--methods", bench.methods, "Subset of ours,ours_no_recons,slic")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::IsMember({kMethodOurs, kMethodOursNoRecons, kMethodSlic}));
  bm->add_option("--counts", bench.counts, "Comma-separated superpixel counts")
      ->delimiter(',')
      ->capture_default_str();
  bm->add_option("--out", csv_path, "Output CSV")->required();
  bm->add_option("--max-side", max_side, "Downscale so no side exceeds this (0 keeps size)");
  bm->add_option("--threads", threads, "Parallel jobs (default: RIMSEG_THREADS or 1)");
  bm->add_option("--epsilon", epsilon, "Boundary tolerance in pixels")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  detail::add_run_flags(*bm, bench.run);
  detail::add_slic_flags(*bm, bench.slic, false);

  // slic
  SlicConfig slic_cfg;
  auto* sl = app.add_subcommand("slic", "SLIC baseline on one image");
  sl->add_option("--image", image_path, "Input PNG or PPM")->required();
  sl->add_option("--out", out_path, "Output label map (.png or .csv)")->required();
  sl->add_option("--max-side", max_side, "Downscale so no side exceeds this (0 keeps size)");
  detail::add_slic_flags(*sl, slic_cfg, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help
    if (argc > 1) err << "rimseg: " << e.what() << "\n\n";
    err << app.help();
    return 2;
  }

  try {
    SweepOptions opt;
    opt.threads = threads;
    opt.max_side = max_side;
    opt.epsilon = epsilon;
    opt.log = &err;

    if (*seg) {
      for (const auto& w : run.validate()) err << "warning: " << w << '\n';
      const NormalizedInput in = normalize_inputs(load_for_experiment(image_path, max_side));
      LossObserver progress;
      if (!quiet) {
        progress = [&](const LossRecord& r) {
          err << "iter " << r.iteration << " loss " << r.loss.total << '\n';
        };
      }
      const SegmentationResult res = segment(in.image, in.coords, run, progress);
      save_labelmap(out_path, res.labels);
      if (!recon_path.empty() && res.recon) {
        save_image(recon_path, denormalize_image(*res.recon, in.image_stats));
      }
      if (!loss_path.empty()) detail::write_loss_history(loss_path, res.loss_history);
      if (!quiet) {
        err << "superpixels used " << res.n_superpixels_used << ", connected components "
            << res.n_connected_components << ", " << res.elapsed.count() << " s\n";
      }
      return 0;
    }
    if (*ev) {
      const LabelMap labels = load_labelmap(labels_path);
      std::vector<LabelMap> gts;
      for (const auto& g : gt_paths) gts.push_back(load_labelmap(g));
      const MetricsReport m = evaluate(labels, gts, epsilon);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g,%.6g", m.asa, m.br);
      out << "asa,br\n" << buf << '\n';
      return 0;
    }
    if (*sweep) {
      for (const auto& w : sweep_run.validate()) err << "warning: " << w << '\n';
      if (seeds.empty()) seeds.push_back(sweep_run.seed);
      run_lambda_sweep(images_dir, lambdas, sweep_run, seeds, csv_path, opt);
      return 0;
    }
    if (*bm) {
      for (const auto& w : bench.run.validate()) err << "warning: " << w << '\n';
      run_benchmark(images_dir, gt_dir, bench, csv_path, opt);
      return 0;
    }
    if (*sl) {
      const RgbImage img = load_for_experiment(image_path, max_side);
      save_labelmap(out_path, slic(img, slic_cfg));
      return 0;
    }
  } catch (const std::exception& e) {
    err << "rimseg: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace rimseg
