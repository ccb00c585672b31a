// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

// resdiff: dataset generation, training, sampling, evaluation and schedule
// inspection. Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "resdiff/checkpoint.hpp"
#include "resdiff/config.hpp"
#include "resdiff/crif.hpp"
#include "resdiff/data.hpp"
#include "resdiff/diffusion.hpp"
#include "resdiff/model.hpp"
#include "resdiff/parallel.hpp"
#include "resdiff/report.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/train.hpp"

namespace fs = std::filesystem;
using namespace resdiff;
using resdiff::cli::Options;

namespace {

void prepare_output_dir(const fs::path& out, bool force, const std::vector<std::string>& owned) {
  if (out.empty()) throw std::invalid_argument("--out is required");
  if (fs::exists(out) && !fs::is_directory(out))
    throw std::invalid_argument(out.string() + " exists and is not a directory");
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!force)
      throw std::invalid_argument("output directory " + out.string() +
                                  " is not empty (use --force to overwrite)");
    for (const auto& name : owned) fs::remove_all(out / name);
  }
  fs::create_directories(out);
}

// Stable per-record stream index.
std::uint64_t id_stream(const std::string& id) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

TrainingExample to_example(const SampleRecord& r) {
  TrainingExample ex;
  ex.target = concat_channels(r.fluo, r.seg).remapped(kSignedRange);
  ex.condition = r.bf.remapped(kSignedRange);
  return ex;
}

void report_load_issues(const LoadedDataset& d) {
  for (const auto& w : d.warnings) std::cerr << "warning: " << w.id << ": " << w.message << "\n";
  for (const auto& e : d.errors) std::cerr << "error: " << e.message << "\n";
}

LoadedDataset load_checked(const std::string& path, const std::string& split) {
  if (path.empty()) throw std::invalid_argument("dataset path is required");
  if (!fs::is_directory(path)) throw std::invalid_argument("dataset directory not found: " + path);
  LoadedDataset d = load_directory(path, split);
  report_load_issues(d);
  if (!d.errors.empty())
    throw std::runtime_error(std::to_string(d.errors.size()) + " record(s) in " + path +
                             " could not be loaded");
  if (d.records.empty())
    throw std::invalid_argument("no records found in " + path +
                                (split.empty() ? "" : " for split '" + split + "'"));
  return d;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenData {
  std::string out;
  bool force = false;
  int n = 200;
  int size = 64;
  std::uint64_t seed = 0;
  double train_frac = 0.7;
  double val_frac = 0.15;
  bool png = false;
  SyntheticParams params;

  void add(Options& o) {
    o.add_unrecorded("out", out, "Output dataset directory")->required();
    o.flag_unrecorded("force", force, "Overwrite an existing dataset");
    o.add("n", n, "Number of records");
    o.add("size", size, "Image height and width in pixels");
    o.add("seed", seed, "Random seed");
    o.add("train-frac", train_frac, "Fraction of records in the train split");
    o.add("val-frac", val_frac, "Fraction of records in the val split");
    o.flag("png", png, "Also write 16-bit PNG previews");
    o.add("min-cells", params.min_cells, "Minimum cells per image");
    o.add("max-cells", params.max_cells, "Maximum cells per image");
    o.add("cell-radius-min", params.cell_radius_min, "Smallest cell semi-axis (px)");
    o.add("cell-radius-max", params.cell_radius_max, "Largest cell semi-axis (px)");
    o.add("min-separation", params.min_separation, "Background pixels between cells");
    o.add("agp-rim", params.agp_rim, "AGP rim brightness");
  }

  int run(const Options& o) const {
    if (n < 1) throw std::invalid_argument("--n must be >= 1");
    if (!(train_frac >= 0 && val_frac >= 0 && train_frac + val_frac <= 1))
      throw std::invalid_argument("split fractions must be >= 0 and sum to at most 1");
    params.validate();
    prepare_output_dir(out, force, {"train", "val", "test", "manifest.tsv", "run.json"});
    cli::write_run_json(out, o);
    auto records = generate_synthetic(std::size_t(n), size, seed, params);
    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * n));
    const auto n_val = static_cast<std::size_t>(std::floor(val_frac * n));
    for (std::size_t i = 0; i < records.size(); ++i)
      records[i].split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    write_dataset(out, records, png);
    std::cerr << "wrote " << records.size() << " records to " << out << " (" << n_train
              << " train, " << n_val << " val, " << records.size() - n_train - n_val << " test)\n";
    return 0;
  }
};

// ---------------------------------------------------------------------------
// train

struct ScheduleFlags {
  ScheduleConfig cfg;
  void add(Options& o) {
    o.add("T", cfg.steps, "Number of diffusion steps");
    o.add("p", cfg.p, "Schedule growth exponent");
    o.add("kappa", cfg.kappa, "Noise scale");
    o.add("eta1", cfg.eta_first, "First shifting coefficient");
    o.add("etaT", cfg.eta_last, "Last shifting coefficient");
  }
};

struct Train {
  std::string data;
  std::string split = "train";
  std::string out;
  bool force = false;
  std::string resume;
  std::string baseline = "none";
  int max_records = 0;
  int log_every = 50;
  TrainConfig tc;
  DenoiserConfig model;
  ScheduleFlags schedule;
  int ddpm_steps = 1000;

  void add(Options& o) {
    o.add("data", data, "Dataset root (from gen-data) or directory of records")->required();
    o.add("split", split, "Split to train on (empty: all records)");
    o.add_unrecorded("out", out, "Output directory for logs and checkpoints")->required();
    o.flag_unrecorded("force", force, "Overwrite an existing output directory");
    o.add("resume", resume, "Checkpoint to resume from");
    o.add("baseline", baseline, "none (residual, x0 objective) or ddpm (epsilon objective)")
        ->check(CLI::IsMember({"none", "ddpm"}));
    o.add("max-records", max_records, "Use at most this many records (0: all)");
    o.add("steps", tc.max_steps, "Total optimization steps");
    o.add("batch", tc.batch_size, "Batch size");
    o.add("lr", tc.learning_rate, "Adam learning rate");
    o.add("seed", tc.seed, "Random seed");
    o.flag("weighted", tc.weighted, "Use per-step x0-matching loss weights");
    o.add("augment", tc.augment, "Random flips and quarter turns");
    o.add("grad-clip", tc.grad_clip, "Global gradient norm clip (0: off)");
    o.add("checkpoint-every", tc.checkpoint_every, "Checkpoint cadence in steps (0: final only)");
    o.add("freeze", tc.frozen_prefixes, "Freeze parameters with this name prefix")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    o.add("base-width", model.base_width, "Channels at the first level");
    o.add("levels", model.num_levels, "Resolution levels");
    o.add("blocks", model.blocks_per_level, "Residual blocks per level");
    o.add("time-dim", model.time_embed_dim, "Timestep embedding width");
    o.add("attention", model.attention, "Bottleneck self-attention");
    schedule.add(o);
    o.add("ddpm-steps", ddpm_steps, "Steps of the DDPM baseline");
    o.add("log-every", log_every, "Progress message cadence (0: silent)");
  }

  int run(const Options& o) const {
    TrainConfig cfg = tc;
    cfg.validate();
    const bool ddpm_mode = baseline == "ddpm";
    std::optional<Checkpoint> ck;
    if (!resume.empty()) {
      if (!fs::exists(resume)) throw std::invalid_argument("checkpoint not found: " + resume);
      ck = load_checkpoint(resume);
      if (!ck->training)
        throw std::invalid_argument(resume + " holds no training state; cannot resume");
      if ((ck->params.config.objective == Objective::Epsilon) != ddpm_mode)
        throw std::invalid_argument("checkpoint objective is " +
                                    objective_name(ck->params.config.objective) +
                                    ", which does not match --baseline " + baseline);
    }
    const LoadedDataset d = load_checked(data, split);
    std::vector<TrainingExample> examples;
    for (const auto& r : d.records) {
      if (max_records > 0 && int(examples.size()) >= max_records) break;
      examples.push_back(to_example(r));
    }

    DenoiserConfig mc = ck ? ck->params.config : model;
    if (!ck) mc.objective = ddpm_mode ? Objective::Epsilon : Objective::X0;
    mc.target_channels = examples[0].target.channels();
    mc.condition_channels = examples[0].condition.channels();
    mc.validate();
    const int mult = mc.size_multiple();
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (examples[i].target.height() % mult != 0 || examples[i].target.width() % mult != 0)
        throw std::invalid_argument("record " + d.records[i].id + " is " +
                                    std::to_string(examples[i].target.height()) + "x" +
                                    std::to_string(examples[i].target.width()) +
                                    "; sizes must be divisible by " + std::to_string(mult));
    const ScheduleConfig sc = ck ? ck->schedule : schedule.cfg;
    DdpmConfig dc = ck ? ck->ddpm : DdpmConfig{};
    if (!ck) dc.steps = ddpm_steps;
    const NoiseSchedule ns(sc);
    const DdpmSchedule ds(dc);

    prepare_output_dir(out, force, {"checkpoints", "loss.tsv", "model.rdck", "run.json"});
    cli::write_run_json(out, o);
    fs::create_directories(fs::path(out) / "checkpoints");

    TrainState state = ck ? *ck->training : initial_state(mc, cfg);
    if (state.step >= cfg.max_steps)
      throw std::invalid_argument("checkpoint is already at step " + std::to_string(state.step) +
                                  " >= --steps " + std::to_string(cfg.max_steps));
    std::ofstream loss_log(fs::path(out) / "loss.tsv");
    loss_log << "step\tloss\n";
    auto save = [&](const TrainState& st, const fs::path& path) {
      Checkpoint c;
      c.params = st.params;
      c.schedule = sc;
      c.ddpm = dc;
      c.training = st;
      save_checkpoint(path.string(), c);
    };
    std::cerr << "training " << parameter_count(mc) << " parameters on " << examples.size()
              << " records, " << worker_count() << " worker(s)\n";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      train(examples, cfg, ns, ds, std::move(state),
            [&](int step, double loss) {
              char buf[64];
              std::snprintf(buf, sizeof buf, "%d\t%.9g\n", step, loss);
              loss_log << buf;
              if (log_every > 0 && step % log_every == 0) {
                const double sec =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::cerr << "step " << step << " loss " << loss << " (" << sec << " s)\n";
              }
            },
            [&](const TrainState& st) {
              char name[32];
              std::snprintf(name, sizeof name, "step_%06d.rdck", st.step);
              if (st.step >= cfg.max_steps)
                save(st, fs::path(out) / "model.rdck");
              else
                save(st, fs::path(out) / "checkpoints" / name);
            });
    } catch (const NumericError& e) {
      std::string batch;
      for (auto i : e.batch())
        batch += (batch.empty() ? "" : ",") + (i < d.records.size() ? d.records[i].id : std::to_string(i));
      throw std::runtime_error(std::string(e.what()) + " (step " + std::to_string(e.step()) +
                               ", records " + batch + ")");
    }
    if (!loss_log) throw std::runtime_error("cannot write loss log");
    return 0;
  }
};

// ---------------------------------------------------------------------------
// sample

struct Sample {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
  bool force = false;
  std::string baseline = "none";
  int steps = 0;
  std::uint64_t seed = 0;
  int limit = 0;
  bool png = false;
  std::string posterior_noise = "variance";

  void add(Options& o) {
    o.add("checkpoint", checkpoint, "Model checkpoint")->required();
    o.add("data", data, "Dataset with the brightfield inputs")->required();
    o.add("split", split, "Split to sample (empty: all records)");
    o.add_unrecorded("out", out, "Output directory")->required();
    o.flag_unrecorded("force", force, "Overwrite an existing output directory");
    o.add("baseline", baseline, "none (residual sampler) or ddpm")
        ->check(CLI::IsMember({"none", "ddpm"}));
    o.add("steps", steps, "Sampling steps (0: value stored in the checkpoint)");
    o.add("seed", seed, "Random seed");
    o.add("limit", limit, "Sample at most this many records (0: all)");
    o.flag("png", png, "Also write 16-bit PNG previews");
    o.add("posterior-noise", posterior_noise, "variance or literal")
        ->check(CLI::IsMember({"variance", "literal"}));
  }

  int run(const Options& o) const {
    if (steps < 0) throw std::invalid_argument("--steps must be >= 0");
    if (!fs::exists(checkpoint)) throw std::invalid_argument("checkpoint not found: " + checkpoint);
    const Checkpoint ck = load_checkpoint(checkpoint);
    const bool ddpm_mode = baseline == "ddpm";
    const Objective want = ddpm_mode ? Objective::Epsilon : Objective::X0;
    if (ck.params.config.objective != want)
      throw std::invalid_argument("checkpoint predicts " + objective_name(ck.params.config.objective) +
                                  "; --baseline " + baseline + " needs " + objective_name(want));
    LoadedDataset d = load_checked(data, split);
    if (limit > 0 && d.records.size() > std::size_t(limit)) d.records.resize(std::size_t(limit));
    const DenoiserConfig& mc = ck.params.config;
    for (const auto& r : d.records) {
      if (r.bf.channels() != mc.condition_channels)
        throw std::invalid_argument("record " + r.id + " has " + std::to_string(r.bf.channels()) +
                                    " condition channel(s); the checkpoint expects " +
                                    std::to_string(mc.condition_channels));
      if (r.height() % mc.size_multiple() != 0 || r.width() % mc.size_multiple() != 0)
        throw std::invalid_argument("record " + r.id + " size is not divisible by " +
                                    std::to_string(mc.size_multiple()));
    }

    ScheduleConfig sc = ck.schedule;
    DdpmConfig dc = ck.ddpm;
    if (steps > 0) (ddpm_mode ? dc.steps : sc.steps) = steps;
    const NoiseSchedule ns(sc);
    const DdpmSchedule ds(dc);
    const PosteriorNoise mode =
        posterior_noise == "literal" ? PosteriorNoise::Literal : PosteriorNoise::Variance;

    prepare_output_dir(out, force,
                       {"run.json", "manifest.tsv", "steps.tsv", "timing.tsv", split.empty() ? "all" : split});
    cli::write_run_json(out, o);

    const Denoiser<float> net(mc);
    const Predictor model = [&](const ImageTensor& x, const ImageTensor& y, int t) {
      return predict(net, ck.params, x, y, t);
    };
    std::vector<SampleRecord> outputs(d.records.size());
    std::vector<SampleStats> stats(d.records.size());
    const RngState root(seed);
    parallel_for(d.records.size(), [&](std::size_t i) {
      const SampleRecord& r = d.records[i];
      RngState rng = root.substream(id_stream(r.id));
      const ImageTensor y0 = r.bf.remapped(kSignedRange);
      const ImageTensor x = ddpm_mode
                                ? ddpm_sample(y0, model, mc.target_channels, ds, rng, &stats[i])
                                : sample(y0, model, mc.target_channels, ns, rng, &stats[i], mode);
      const ImageTensor unit = x.remapped(kUnitRange).clamped();
      SampleRecord p;
      p.id = r.id;
      p.split = r.split.empty() ? (split.empty() ? "all" : split) : r.split;
      p.plate = r.plate;
      p.well = r.well;
      p.bf = r.bf;
      p.fluo = unit.slice(0, 5);
      p.seg = unit.slice(5, unit.channels() - 5);
      outputs[i] = std::move(p);
    });
    write_dataset(out, outputs, png);

    std::string steps_tsv = "id\tsampler\tsteps\tdenoiser_calls\n";
    std::string timing_tsv = "id\tseconds\n";
    const char* sampler = ddpm_mode ? "ddpm" : "residual";
    const int nsteps = ddpm_mode ? dc.steps : sc.steps;
    double total = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      steps_tsv += outputs[i].id + "\t" + sampler + "\t" + std::to_string(nsteps) + "\t" +
                   std::to_string(stats[i].denoiser_calls) + "\n";
      char buf[64];
      std::snprintf(buf, sizeof buf, "\t%.6f\n", stats[i].seconds);
      timing_tsv += outputs[i].id + buf;
      total += stats[i].seconds;
    }
    cli::write_text(fs::path(out) / "steps.tsv", steps_tsv);
    cli::write_text(fs::path(out) / "timing.tsv", timing_tsv);
    std::cerr << "sampled " << outputs.size() << " records with " << nsteps << " " << sampler
              << " steps (" << total << " s denoising)\n";
    return 0;
  }
};

// ---------------------------------------------------------------------------
// eval

struct Eval {
  std::string gt;
  std::string split = "test";
  std::vector<std::string> preds;
  std::string out;
  bool force = false;
  std::string gt_instances = "boundary";
  EvalOptions opt;

  void add(Options& o) {
    o.add("gt", gt, "Ground-truth dataset")->required();
    o.add("split", split, "Split to score (empty: all records)");
    o.add("pred", preds, "Predictions as DIR or NAME=DIR; repeat to compare variants")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    o.add_unrecorded("out", out, "Output directory for reports")->required();
    o.flag_unrecorded("force", force, "Overwrite an existing output directory");
    o.add("tau", opt.tau, "IoU threshold for instance matching");
    o.add("threshold", opt.binarize_threshold, "Binarization threshold for boundary channels");
    o.add("exclusion-threshold", opt.exclusion_threshold,
          "Ground truth whose fluorescence stays below this fraction of range is skipped");
    o.add("gt-instances", gt_instances, "boundary (decode ground-truth masks) or maps")
        ->check(CLI::IsMember({"boundary", "maps"}));
    o.add("min-area", opt.decode.min_area, "Smallest decoded instance in pixels");
    o.add("reclaim", opt.decode.reclaim_boundary, "Return boundary pixels to adjacent instances");
  }

  int run(const Options& o) const {
    EvalOptions eo = opt;
    eo.gt_source = parse_gt_source(gt_instances);
    if (!(eo.tau > 0 && eo.tau <= 1)) throw std::invalid_argument("--tau must be in (0, 1]");
    const LoadedDataset truth = load_checked(gt, split);
    std::vector<std::pair<std::string, std::string>> variants;
    for (const auto& p : preds) {
      const auto eq = p.find('=');
      if (eq == std::string::npos)
        variants.emplace_back(preds.size() == 1 ? "model" : p, p);
      else
        variants.emplace_back(p.substr(0, eq), p.substr(eq + 1));
    }
    std::vector<VariantResult> results;
    for (const auto& [name, dir] : variants) {
      if (!fs::is_directory(dir)) throw std::invalid_argument("prediction directory not found: " + dir);
      const LoadedDataset pred = load_checked(dir, split);
      results.push_back(evaluate(name, truth.records, pred.records, eo));
      const auto& r = results.back();
      for (const auto& id : r.unmatched)
        std::cerr << "warning: " << name << ": record " << id << " has no counterpart; skipped\n";
      if (!r.excluded.empty())
        std::cerr << name << ": excluded " << r.excluded.size() << " black ground-truth record(s)\n";
      std::cerr << name << ": scored " << r.scored.size() << " record(s)\n";
    }
    prepare_output_dir(out, force, {"run.json", "image_metrics.tsv", "seg_metrics.tsv", "summary.json"});
    cli::write_run_json(out, o);
    cli::write_text(fs::path(out) / "image_metrics.tsv", image_tsv(results));
    cli::write_text(fs::path(out) / "seg_metrics.tsv", seg_tsv(results));
    cli::write_text(fs::path(out) / "summary.json", summary_json(results, eo));
    return 0;
  }
};

// ---------------------------------------------------------------------------
// schedule

struct Schedule {
  ScheduleFlags schedule;
  std::string out;
  bool force = false;

  void add(Options& o) {
    schedule.add(o);
    o.add("first-weight", schedule.cfg.first_step_weight, "Loss weight reported for t = 1");
    o.add_unrecorded("out", out, "Write schedule.csv and run.json here instead of stdout");
    o.flag_unrecorded("force", force, "Overwrite an existing output directory");
  }

  int run(const Options& o) const {
    const NoiseSchedule s = build_schedule(schedule.cfg);
    const std::string csv = schedule_csv(s);
    if (out.empty()) {
      std::cout << csv;
      return 0;
    }
    prepare_output_dir(out, force, {"run.json", "schedule.csv"});
    cli::write_run_json(out, o);
    cli::write_text(fs::path(out) / "schedule.csv", csv);
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual diffusion for brightfield-to-fluorescence synthesis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenData gen;
  Train train_cmd;
  Sample sample_cmd;
  Eval eval_cmd;
  Schedule sched;
  Options gen_o(app.add_subcommand("gen-data", "Generate a synthetic dataset"));
  Options train_o(app.add_subcommand("train", "Train a denoiser"));
  Options sample_o(app.add_subcommand("sample", "Synthesize fluorescence and boundaries"));
  Options eval_o(app.add_subcommand("eval", "Score predictions against ground truth"));
  Options sched_o(app.add_subcommand("schedule", "Print the noise schedule"));
  gen.add(gen_o);
  train_cmd.add(train_o);
  sample_cmd.add(sample_o);
  eval_cmd.add(eval_o);
  sched.add(sched_o);
  for (auto* sub : app.get_subcommands({})) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string unused;
    sub->add_option("--config", unused, "key = value or JSON (run.json) settings file");
  }

  try {
    std::vector<std::string> args(argv, argv + argc);
    std::size_t first = 1;
    while (first < args.size() && args[first].rfind("-", 0) == 0) ++first;
    args = expand_config_args(args, std::min(first + 1, args.size()));
    // CLI11 wants the arguments reversed when given as a vector.
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*gen_o.app()) return gen.run(gen_o);
    if (*train_o.app()) return train_cmd.run(train_o);
    if (*sample_o.app()) return sample_cmd.run(sample_o);
    if (*eval_o.app()) return eval_cmd.run(eval_o);
    if (*sched_o.app()) return sched.run(sched_o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
