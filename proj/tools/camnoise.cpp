// Copyright (c) the camnoise authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// camnoise command-line tool. Exit codes: 0 success, 1 runtime failure,
// 2 usage or validation error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "camnoise/dataset.hpp"
#include "camnoise/estimator.hpp"
#include "camnoise/eval.hpp"
#include "camnoise/hash.hpp"
#include "camnoise/image_io.hpp"
#include "camnoise/kv_text.hpp"
#include "camnoise/metadata.hpp"
#include "camnoise/nn/checkpoint.hpp"
#include "camnoise/noise_model.hpp"
#include "camnoise/realnoise.hpp"
#include "camnoise/rng.hpp"

namespace fs = std::filesystem;
using namespace camnoise;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string log_path;
};

std::string dashed(std::string_view name) {
  std::string s(name);
  for (char& c : s)
    if (c == '_') c = '-';
  return s;
}

/// Inline metadata flags (--camera-gain ...) plus --meta FILE.
struct MetaFlags {
  std::string file;
  std::map<MetaField, double> values;
  std::string sensor_type;

  void attach(CLI::App* cmd, bool with_inline) {
    cmd->add_option("--meta", file, "Metadata file (key = value)")->check(CLI::ExistingFile);
    if (!with_inline) return;
    for (const auto& info : kMetaFields) {
      if (info.field == MetaField::SensorType) {
        cmd->add_option("--sensor-type", sensor_type, "ccd or cmos");
        continue;
      }
      cmd->add_option_function<double>("--" + dashed(info.name), [this, f = info.field](double v) { values[f] = v; },
                                       std::string(info.name));
    }
  }

  CameraMetadata resolve(const CameraMetadata& base) const {
    CameraMetadata m = base;
    if (!file.empty()) m = overlay_metadata(KvText::read(file), m);
    for (const auto& [f, v] : values) set_field(m, f, v);
    if (!sensor_type.empty()) m.sensor_type = sensor_type_from_string(sensor_type);
    return m;
  }
};

/// Global seed and thread count plus every option of the chosen subcommand.
std::string resolved_config(const CLI::App& cmd, const Common& common) {
  return "seed=" + std::to_string(common.seed) + "\nthreads=" + std::to_string(common.threads) + "\n" +
         cmd.config_to_str(true, false);
}

std::string config_hash(const CLI::App& cmd, const Common& common) {
  return hex64(fnv1a64(resolved_config(cmd, common)));
}

void write_run_log(const CLI::App& cmd, const Common& common) {
  std::string text = "# camnoise " + cmd.get_name() + "\n# config_hash=" + config_hash(cmd, common) + "\n" +
                     resolved_config(cmd, common);
  std::cerr << text;
  if (!common.log_path.empty()) {
    std::ofstream out(common.log_path);
    out << text;
    if (!out) throw std::runtime_error("cannot write run log " + common.log_path);
  }
}

void print_levels(const NoiseLevels& l) {
  std::printf("sigma_pn = %.6g\nsigma_dcsn = %.6g\nsigma_rn = %.6g\nxi = %.6g\nsigma_total = %.6g\n", l.sigma_pn,
              l.sigma_dcsn, l.sigma_rn, l.xi, l.sigma_total);
}

std::ofstream open_out(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera noise simulation and noise-source estimation"};
  app.set_config("--config", "", "Config file (key = value; [subcommand] sections)");
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--log", common.log_path, "Also write the resolved configuration to this file");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Predict noise levels for metadata and an intensity");
  MetaFlags sim_meta;
  sim_meta.attach(sim, true);
  double sim_intensity = 128.0;
  int sim_sample = 0;
  std::string sim_out;
  sim->add_option("--intensity", sim_intensity, "Mean intensity in DN")->capture_default_str();
  sim->add_option("--sample", sim_sample, "Also sample a noisy NxN uniform patch");
  sim->add_option("--out", sim_out, "PGM path for the sampled patch");

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "Generate a synthetic training dataset");
  std::string gen_clean, gen_out;
  std::size_t gen_count = 200, gen_synthetic = 256;
  double gen_mismatch = kDefaultMismatchProb;
  int gen_patch = 32;
  gen->add_option("--clean-dir", gen_clean, "Directory of clean PGM/PNG images (synthetic scenes if omitted)");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--count", gen_count, "Number of records")->capture_default_str();
  gen->add_option("--mismatch-prob", gen_mismatch, "Probability of a camera-gain mismatch")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen->add_option("--patch-size", gen_patch, "Patch size")->capture_default_str();
  gen->add_option("--synthetic-count", gen_synthetic, "Synthetic clean patches when --clean-dir is omitted")
      ->capture_default_str();

  // synth-session
  auto* syn = app.add_subcommand("synth-session", "Write a synthetic dark-room capture session");
  SessionSpec spec;
  std::string syn_out;
  syn->add_option("--out", syn_out, "Session directory")->required();
  syn->add_option("--pairs", spec.pairs)->capture_default_str();
  syn->add_option("--width", spec.width)->capture_default_str();
  syn->add_option("--height", spec.height)->capture_default_str();
  syn->add_option("--bit-depth", spec.bit_depth)->capture_default_str();
  syn->add_option("--camera-gain", spec.camera_gain)->capture_default_str();
  syn->add_option("--rn-mu", spec.rn_mu)->capture_default_str();
  syn->add_option("--rn-sigma", spec.rn_sigma)->capture_default_str();
  syn->add_option("--dcsn-mu", spec.dcsn_mu)->capture_default_str();
  syn->add_option("--dcsn-sigma", spec.dcsn_sigma)->capture_default_str();
  syn->add_option("--fpn-sigma", spec.fpn_sigma)->capture_default_str();

  // process-realnoise
  auto* proc = app.add_subcommand("process-realnoise", "Fit, rectify, resample and FPN-correct a capture session");
  std::string proc_dir, proc_out;
  int proc_fpn = kDefaultFpnFrames;
  proc->add_option("--session-dir", proc_dir, "Session directory")->required()->check(CLI::ExistingDirectory);
  proc->add_option("--out", proc_out, "Output directory")->required();
  proc->add_option("--fpn-frames", proc_fpn, "Frames averaged for the fixed pattern")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train an estimator");
  std::string tr_dataset, tr_out, tr_variant = "full_meta", tr_loss;
  double tr_scale = 0.25, tr_xi_max = kDefaultXiMax;
  TrainConfig tr_cfg;
  tr->add_option("--dataset", tr_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--variant", tr_variant, "drne_cust, without_meta, min_meta or full_meta")->capture_default_str();
  tr->add_option("--scale", tr_scale, "Channel width scale")->capture_default_str();
  tr->add_option("--epochs", tr_cfg.epochs)->capture_default_str();
  tr->add_option("--batch-size", tr_cfg.batch_size)->capture_default_str();
  tr->add_option("--lr", tr_cfg.lr)->capture_default_str();
  tr->add_option("--xi-max", tr_xi_max, "xi normalization in DN")->capture_default_str();
  tr->add_option("--loss-csv", tr_loss, "Per-epoch loss CSV (default <out>.loss.csv)");

  // estimate
  auto* est = app.add_subcommand("estimate", "Estimate noise levels of an image");
  std::string est_model, est_image, est_patches;
  MetaFlags est_meta;
  est->add_option("--model", est_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  est->add_option("--image", est_image, "PGM or PNG image")->required()->check(CLI::ExistingFile);
  est_meta.attach(est, false);
  est->add_option("--patch-csv", est_patches, "Per-patch estimates CSV");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a model on a dataset");
  std::string ev_model, ev_dataset, ev_scenario = "none", ev_out;
  double ev_sigma_n = kScenarioNoiseSigma;
  ev->add_option("--model", ev_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", ev_dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--scenario", ev_scenario, "none, add-gaussian, double-thermal or double-temperature")
      ->check(CLI::IsMember({"none", "add-gaussian", "double-thermal", "double-temperature"}))
      ->capture_default_str();
  ev->add_option("--sigma-n", ev_sigma_n, "Added noise for add-gaussian")->capture_default_str();
  ev->add_option("--out", ev_out, "Metrics CSV (stdout if omitted)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "One-at-a-time sensitivity sweep");
  std::string sw_model, sw_out;
  int sw_points = kSensitivityPoints;
  double sw_intensity = kSensitivityIntensity;
  sw->add_option("--model", sw_model, "Checkpoint (physical rows only if omitted)")->check(CLI::ExistingFile);
  sw->add_option("--points", sw_points)->capture_default_str();
  sw->add_option("--intensity", sw_intensity)->capture_default_str();
  sw->add_option("--out", sw_out, "CSV path (stdout if omitted)");

  // bench
  auto* be = app.add_subcommand("bench", "Per-patch inference runtime");
  std::string be_model, be_out;
  std::size_t be_patches = 1000;
  int be_reps = kBenchRepetitions;
  be->add_option("--model", be_model, "Checkpoint")->required()->check(CLI::ExistingFile);
  be->add_option("--patches", be_patches)->capture_default_str();
  be->add_option("--repetitions", be_reps)->capture_default_str();
  be->add_option("--out", be_out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    write_run_log(*cmd, common);
    const std::string hash = config_hash(*cmd, common);

    if (cmd == sim) {
      const CameraMetadata meta = sim_meta.resolve(max_metadata());
      validate_ranges(meta);
      const NoiseLevels l = predict_sigmas(meta, sim_intensity);
      print_levels(l);
      std::printf("observed_total = %.6g\n", clipped_std(sim_intensity, l.sigma_total));
      if (sim_sample > 0) {
        if (sim_out.empty()) throw UsageError("--sample needs --out");
        const Patch clean(sim_sample, sim_sample, static_cast<float>(sim_intensity));
        const auto noisy = corrupt_patch(clean, meta, common.seed);
        write_pgm(sim_out, noisy.noisy, 8);
        std::printf("sample_std = %.6g\n", noisy.noisy.stddev());
      }
    } else if (cmd == gen) {
      const auto corpus = gen_clean.empty() ? synthetic_corpus(gen_synthetic, gen_patch, derive_seed(common.seed, 1))
                                            : load_clean_corpus(gen_clean, gen_patch);
      if (corpus.empty()) throw UsageError("no clean patches found");
      const Dataset ds = generate_dataset(corpus, gen_count, gen_mismatch, common.seed, common.threads);
      for (std::size_t i = 0; i < ds.records.size(); ++i) validate_record(ds.records[i], i);
      write_dataset(ds, gen_out);
      std::printf("records = %zu\nhash = %s\n", ds.records.size(), hex64(hash_directory(gen_out)).c_str());
    } else if (cmd == syn) {
      write_session(synthesize_session(spec, common.seed), syn_out);
      std::printf("pairs = %d\n", spec.pairs);
    } else if (cmd == proc) {
      const NoiseSession session = read_session(proc_dir);
      const ProcessedSession out = process_session(session, common.seed, proc_fpn, common.threads);
      write_processed(out, proc_out);
      std::printf("pairs = %zu\nframes = %zu\n", out.fits.size(), out.rn.size());
    } else if (cmd == tr) {
      const Dataset ds = read_dataset(tr_dataset);
      if (ds.info.patch_width != ds.info.patch_height) throw UsageError("dataset patches must be square");
      ModelVariant variant{variant_from_string(tr_variant), tr_scale, ds.info.patch_width};
      tr_cfg.threads = common.threads;
      const auto result = train(variant, ds.records, tr_cfg, common.seed, tr_xi_max, [](int epoch, double loss) {
        std::fprintf(stderr, "epoch %d loss %.6g\n", epoch, loss);
      });
      if (const auto parent = fs::path(tr_out).parent_path(); !parent.empty()) fs::create_directories(parent);
      result.model.save(tr_out);
      auto loss = open_out(tr_loss.empty() ? tr_out + ".loss.csv" : tr_loss);
      loss << "# config_hash=" << hash << "\nepoch,loss\n";
      for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        loss << e + 1 << ',' << format_exact(result.epoch_loss[e]) << '\n';
      std::printf("parameters = %zu\nfinal_loss = %.6g\nhash = %s\n", result.model.parameter_count(),
                  result.epoch_loss.back(), hex64(hash_file(tr_out)).c_str());
    } else if (cmd == est) {
      const Model model = Model::load(est_model);
      std::optional<CameraMetadata> meta;
      if (!est_meta.file.empty()) meta = read_metadata(KvText::read(est_meta.file));
      if (model.variant().uses_metadata() && !meta) throw UsageError("this model needs --meta");
      if (meta) validate_physical(*meta);
      const Image image = read_image(est_image).image;
      const ImageEstimate e = estimate_image(model, image, meta, common.threads);
      for (const auto& p : e.patches)
        if (p.metadata_clamped) {
          std::fprintf(stderr, "warning: metadata outside the trained range was clamped\n");
          break;
        }
      if (e.total_only) {
        std::printf("sigma_total = %.6g\n", e.mean.sigma_total);
      } else {
        print_levels(NoiseLevels::compose(e.mean.sigma_pn, e.mean.sigma_dcsn, e.mean.sigma_rn, e.mean.xi));
      }
      std::printf("patches = %zu\n", e.patches.size());
      if (!est_patches.empty()) {
        auto out = open_out(est_patches);
        out << "# config_hash=" << hash << "\npatch,sigma_pn,sigma_dcsn,sigma_rn,xi,sigma_total\n";
        for (std::size_t i = 0; i < e.patches.size(); ++i) {
          const auto& l = e.patches[i].levels;
          out << i << ',' << format_exact(l.sigma_pn) << ',' << format_exact(l.sigma_dcsn) << ','
              << format_exact(l.sigma_rn) << ',' << format_exact(l.xi) << ',' << format_exact(l.sigma_total) << '\n';
        }
      }
    } else if (cmd == ev) {
      const Model model = Model::load(ev_model);
      const Dataset ds = read_dataset(ev_dataset);
      std::vector<TrainingRecord> records = ds.records;
      if (ev_scenario == "add-gaussian") {
        std::vector<TrainingRecord> matched;
        for (const auto& r : records)
          if (!r.mismatched()) matched.push_back(r);
        records = scenario_add_gaussian(matched, ev_sigma_n, common.seed);
      } else if (ev_scenario == "double-thermal") {
        records = scenario_double_param(records, "thermal_white_noise");
      } else if (ev_scenario == "double-temperature") {
        records = scenario_double_param(records, "sensor_temperature");
      }
      const MetricReport report = evaluate_model(model, records, common.threads);
      if (ev_out.empty()) {
        write_metrics_csv(std::cout, report, hash);
      } else {
        auto out = open_out(ev_out);
        write_metrics_csv(out, report, hash);
      }
    } else if (cmd == sw) {
      std::optional<Model> model;
      if (!sw_model.empty()) model = Model::load(sw_model);
      const auto rows = compare_sensitivity(model ? &*model : nullptr, sw_points, sw_intensity, common.threads);
      if (sw_out.empty()) {
        write_sensitivity_csv(std::cout, rows, hash);
      } else {
        auto out = open_out(sw_out);
        write_sensitivity_csv(out, rows, hash);
      }
    } else if (cmd == be) {
      const Model model = Model::load(be_model);
      const BenchResult r = runtime_bench(model, be_patches, common.threads, be_reps, common.seed);
      if (be_out.empty()) {
        write_bench_csv(std::cout, r, hash);
      } else {
        auto out = open_out(be_out);
        write_bench_csv(out, r, hash);
      }
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const KvParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
