// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "resdiff/data.hpp"
#include "resdiff/metrics.hpp"

namespace resdiff {

// Where ground-truth instances come from when scoring boundary channels.
enum class GtInstanceSource {
  Boundary,  // decode the ground-truth boundary mask like the prediction
  Maps,      // stored instance maps (falls back to Boundary when absent)
};

GtInstanceSource parse_gt_source(const std::string& name);
std::string gt_source_name(GtInstanceSource s);

struct EvalOptions {
  double tau = 0.5;
  double binarize_threshold = 0.5;
  double exclusion_threshold = kBlackThreshold;
  BoundaryDecodeOptions decode;
  GtInstanceSource gt_source = GtInstanceSource::Boundary;
  SsimOptions ssim;
};

struct ImageRow {
  std::string id;
  std::string channel;
  double mse = 0, psnr = 0, ssim = 0;
};

struct SegRow {
  std::string id;
  std::string channel;
  MatchReport match;
  int pred_count = 0;
  int true_count = 0;
};

// Scores of one prediction set against ground truth.
struct VariantResult {
  std::string name;
  std::vector<ImageRow> image;  // record-major, channel order fixed
  std::vector<SegRow> seg;
  std::vector<std::string> scored;
  std::vector<std::string> excluded;   // black ground truth
  std::vector<std::string> unmatched;  // ids present on one side only
  std::map<std::string, std::optional<double>> count_correlation;  // per boundary channel
};

// Pairs records by id, drops black ground truth, scores the 5 fluorescence
// channels with mse/psnr/ssim and both boundary channels with instance
// matching. Throws std::invalid_argument when no id is shared.
VariantResult evaluate(const std::string& name, const std::vector<SampleRecord>& gt,
                       const std::vector<SampleRecord>& pred, const EvalOptions& opt = {});

// Per-record TSV: one row per record and channel.
std::string image_tsv(const std::vector<VariantResult>& variants);
std::string seg_tsv(const std::vector<VariantResult>& variants);

// JSON summary: per variant and channel mean/std of every metric, plus
// Welch p-values for every pair of variants. Non-finite numbers are
// written as the strings "inf", "-inf" and "nan".
std::string summary_json(const std::vector<VariantResult>& variants, const EvalOptions& opt);

// %.10g formatting with "inf"/"-inf"/"nan".
std::string format_number(double v);

}  // namespace resdiff
