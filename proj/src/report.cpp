// Copyright 2026 The resdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "resdiff/report.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "resdiff/parallel.hpp"

namespace resdiff {

GtInstanceSource parse_gt_source(const std::string& name) {
  if (name == "boundary") return GtInstanceSource::Boundary;
  if (name == "maps") return GtInstanceSource::Maps;
  throw std::invalid_argument("unknown ground-truth instance source '" + name +
                              "' (expected boundary or maps)");
}

std::string gt_source_name(GtInstanceSource s) {
  return s == GtInstanceSource::Boundary ? "boundary" : "maps";
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

struct RecordScores {
  std::vector<ImageRow> image;
  std::vector<SegRow> seg;
  std::array<int, 2> pred_counts{}, true_counts{};
};

RecordScores score_record(const SampleRecord& g, const SampleRecord& p, const EvalOptions& opt) {
  if (p.fluo.channels() != g.fluo.channels() || p.fluo.height() != g.fluo.height() ||
      p.fluo.width() != g.fluo.width())
    throw std::invalid_argument("record " + g.id + ": prediction is " + p.fluo.shape_string() +
                                ", ground truth " + g.fluo.shape_string());
  RecordScores out;
  for (int c = 0; c < g.fluo.channels(); ++c) {
    const ImageTensor a = g.fluo.slice(c, 1), b = p.fluo.slice(c, 1);
    ImageRow row;
    row.id = g.id;
    row.channel = kFluorescenceChannels[std::size_t(c)];
    row.mse = mse(a, b);
    row.psnr = psnr_from_mse(row.mse);
    row.ssim = ssim(a, b, opt.ssim);
    out.image.push_back(row);
  }
  for (int c = 0; c < 2; ++c) {
    const InstanceMap pred =
        boundary_to_instances(p.boundary(c, opt.binarize_threshold), opt.decode);
    const std::optional<InstanceMap>& stored = c == 0 ? g.nuclei : g.cells;
    const InstanceMap truth = (opt.gt_source == GtInstanceSource::Maps && stored)
                                  ? relabel_contiguous(*stored)
                                  : boundary_to_instances(g.boundary(c, 0.5), opt.decode);
    SegRow row;
    row.id = g.id;
    row.channel = kBoundaryChannels[std::size_t(c)];
    row.match = match_instances(pred, truth, opt.tau);
    row.pred_count = pred.count();
    row.true_count = truth.count();
    out.pred_counts[std::size_t(c)] = row.pred_count;
    out.true_counts[std::size_t(c)] = row.true_count;
    out.seg.push_back(row);
  }
  return out;
}

}  // namespace

VariantResult evaluate(const std::string& name, const std::vector<SampleRecord>& gt,
                       const std::vector<SampleRecord>& pred, const EvalOptions& opt) {
  VariantResult res;
  res.name = name;
  std::map<std::string, const SampleRecord*> by_id;
  for (const auto& p : pred) by_id[p.id] = &p;
  std::map<std::string, bool> gt_ids;
  std::vector<std::pair<const SampleRecord*, const SampleRecord*>> pairs;
  for (const auto& g : gt) {
    gt_ids[g.id] = true;
    auto it = by_id.find(g.id);
    if (it == by_id.end()) {
      res.unmatched.push_back(g.id);
      continue;
    }
    if (is_black(g.fluo, opt.exclusion_threshold)) {
      res.excluded.push_back(g.id);
      continue;
    }
    pairs.emplace_back(&g, it->second);
  }
  for (const auto& p : pred)
    if (!gt_ids.count(p.id)) res.unmatched.push_back(p.id);
  if (pairs.empty() && res.excluded.empty())
    throw std::invalid_argument("no record ids shared between ground truth and prediction '" +
                                name + "'");

  std::vector<RecordScores> scores(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    scores[i] = score_record(*pairs[i].first, *pairs[i].second, opt);
  });
  std::array<std::vector<double>, 2> pc, tc;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    res.scored.push_back(pairs[i].first->id);
    res.image.insert(res.image.end(), scores[i].image.begin(), scores[i].image.end());
    res.seg.insert(res.seg.end(), scores[i].seg.begin(), scores[i].seg.end());
    for (int c = 0; c < 2; ++c) {
      pc[std::size_t(c)].push_back(scores[i].pred_counts[std::size_t(c)]);
      tc[std::size_t(c)].push_back(scores[i].true_counts[std::size_t(c)]);
    }
  }
  for (int c = 0; c < 2; ++c)
    res.count_correlation[kBoundaryChannels[std::size_t(c)]] =
        pairs.size() >= 3 ? pearson(pc[std::size_t(c)], tc[std::size_t(c)]) : std::nullopt;
  return res;
}

std::string image_tsv(const std::vector<VariantResult>& variants) {
  std::ostringstream out;
  out << "variant\tid\tchannel\tmse\tpsnr\tssim\n";
  for (const auto& v : variants)
    for (const auto& r : v.image)
      out << v.name << '\t' << r.id << '\t' << r.channel << '\t' << format_number(r.mse) << '\t'
          << format_number(r.psnr) << '\t' << format_number(r.ssim) << '\n';
  return out.str();
}

std::string seg_tsv(const std::vector<VariantResult>& variants) {
  std::ostringstream out;
  out << "variant\tid\tchannel\ttau\ttp\tfp\tfn\tprecision\trecall\tf1\tmean_true_score"
         "\tmean_matched_score\tpanoptic_quality\tpred_count\ttrue_count\n";
  for (const auto& v : variants)
    for (const auto& r : v.seg) {
      const auto& m = r.match;
      out << v.name << '\t' << r.id << '\t' << r.channel << '\t' << format_number(m.tau) << '\t'
          << m.tp << '\t' << m.fp << '\t' << m.fn << '\t' << format_number(m.precision()) << '\t'
          << format_number(m.recall()) << '\t' << format_number(m.f1()) << '\t'
          << format_number(m.mean_true_score()) << '\t' << format_number(m.mean_matched_score())
          << '\t' << format_number(m.panoptic_quality()) << '\t' << r.pred_count << '\t'
          << r.true_count << '\n';
    }
  return out.str();
}

namespace {

nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? number_json(*v) : nlohmann::json(nullptr);
}

using Series = std::map<std::string, std::map<std::string, std::vector<double>>>;  // channel -> metric

Series collect(const VariantResult& v) {
  Series s;
  for (const auto& r : v.image) {
    s[r.channel]["mse"].push_back(r.mse);
    s[r.channel]["psnr"].push_back(r.psnr);
    s[r.channel]["ssim"].push_back(r.ssim);
  }
  for (const auto& r : v.seg) {
    auto& c = s[r.channel];
    c["precision"].push_back(r.match.precision());
    c["recall"].push_back(r.match.recall());
    c["f1"].push_back(r.match.f1());
    c["mean_true_score"].push_back(r.match.mean_true_score());
    c["mean_matched_score"].push_back(r.match.mean_matched_score());
    c["panoptic_quality"].push_back(r.match.panoptic_quality());
  }
  return s;
}

}  // namespace

std::string summary_json(const std::vector<VariantResult>& variants, const EvalOptions& opt) {
  nlohmann::ordered_json doc;
  doc["tau"] = opt.tau;
  doc["binarize_threshold"] = opt.binarize_threshold;
  doc["exclusion_threshold"] = opt.exclusion_threshold;
  doc["gt_instances"] = gt_source_name(opt.gt_source);
  doc["min_area"] = opt.decode.min_area;
  doc["reclaim_boundary"] = opt.decode.reclaim_boundary;
  std::vector<Series> series;
  for (const auto& v : variants) {
    series.push_back(collect(v));
    nlohmann::ordered_json jv;
    jv["scored"] = v.scored.size();
    jv["excluded"] = v.excluded;
    jv["unmatched"] = v.unmatched;
    nlohmann::ordered_json channels;
    for (const auto& [channel, metrics] : series.back()) {
      nlohmann::ordered_json jc;
      for (const auto& [metric, values] : metrics)
        jc[metric] = {{"mean", number_json(mean(values))}, {"std", number_json(stddev(values))}};
      if (v.count_correlation.count(channel))
        jc["count_correlation"] = optional_json(v.count_correlation.at(channel));
      channels[channel] = jc;
    }
    jv["channels"] = channels;
    doc["variants"][v.name] = jv;
  }
  nlohmann::ordered_json comps = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < variants.size(); ++a)
    for (std::size_t b = a + 1; b < variants.size(); ++b)
      for (const auto& [channel, metrics] : series[a])
        for (const auto& [metric, values] : metrics) {
          if (!series[b].count(channel) || !series[b][channel].count(metric)) continue;
          comps.push_back({{"a", variants[a].name},
                           {"b", variants[b].name},
                           {"channel", channel},
                           {"metric", metric},
                           {"p_value", optional_json(welch_t_test(values, series[b][channel][metric]))}});
        }
  doc["comparisons"] = comps;
  return doc.dump(2) + "\n";
}

}  // namespace resdiff
