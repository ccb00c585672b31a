// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "resdiff/data.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

// Image metrics. Inputs are mapped from their declared value range onto
// [0, 255] first; multi-channel tensors are averaged over all values.
double mse(const ImageTensor& a, const ImageTensor& b);
// +infinity for identical images.
double psnr(const ImageTensor& a, const ImageTensor& b);
double psnr_from_mse(double mse, double peak = 255.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

// Mean local SSIM over all fully contained Gaussian windows of one plane.
double ssim_plane(std::span<const double> a, std::span<const double> b, int height, int width,
                  const SsimOptions& opt = {});
// Channel mean of ssim_plane.
double ssim(const ImageTensor& a, const ImageTensor& b, const SsimOptions& opt = {});

struct MatchReport {
  double tau = 0.5;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double sum_iou_matched = 0.0;

  int n_true() const { return tp + fn; }
  int n_pred() const { return tp + fp; }
  double precision() const;
  double recall() const;
  double f1() const;
  double mean_matched_score() const;
  double mean_true_score() const;
  double panoptic_quality() const;
};

// iou[p][g] for predicted label p + 1 and ground-truth label g + 1.
std::vector<std::vector<double>> iou_matrix(const InstanceMap& pred, const InstanceMap& gt);

// Assignment maximizing total score; entry [r][c] of a rectangular matrix.
// Returns the column assigned to each row, or -1.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& score);

// One-to-one matching maximizing summed IoU over pairs with IoU >= tau.
MatchReport match_instances(const InstanceMap& pred, const InstanceMap& gt, double tau = 0.5);

// Pearson correlation of per-image instance counts. Empty when either
// side has zero variance.
std::optional<double> count_correlation(const std::vector<InstanceMap>& preds,
                                        const std::vector<InstanceMap>& gts);
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(std::span<const double> v);

// Two-sided p-value of Welch's unequal-variance t-test. Empty when either
// sample has fewer than two values or both variances vanish.
std::optional<double> welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace resdiff
