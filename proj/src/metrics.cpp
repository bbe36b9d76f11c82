#include "ptcrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ptcrack {

namespace {

long long sorted_intersection_size(const std::vector<std::uint32_t>& a,
                                   const std::vector<std::uint32_t>& b) {
  long long count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

}  // namespace

PointwiseScores pointwise(const std::vector<std::uint8_t>& predicted,
                          const std::vector<std::uint8_t>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("pointwise: " + std::to_string(predicted.size()) +
                                " predictions vs " + std::to_string(truth.size()) +
                                " labels");
  }
  PointwiseScores s;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred = predicted[i] != 0;
    const bool real = truth[i] != 0;
    if (pred && real) ++s.tp;
    else if (pred && !real) ++s.fp;
    else if (!pred && real) ++s.fn;
    else ++s.tn;
  }
  s.precision = s.tp + s.fp > 0 ? static_cast<double>(s.tp) / (s.tp + s.fp) : 0.0;
  s.recall = s.tp + s.fn > 0 ? static_cast<double>(s.tp) / (s.tp + s.fn) : 0.0;
  s.specificity = s.tn + s.fp > 0 ? static_cast<double>(s.tn) / (s.tn + s.fp) : 1.0;
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

MatchTable match_instances(const std::vector<CrackInstance>& predicted,
                           const std::vector<CrackInstance>& real,
                           const MatchConfig& config) {
  const auto violations = validate_match_config(config);
  if (!violations.empty()) throw data_error(violations.front());

  MatchTable table;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    const auto& pred = predicted[p];
    long long best_inter = 0;
    int best_real = -1;
    for (std::size_t r = 0; r < real.size(); ++r) {
      const long long inter =
          sorted_intersection_size(pred.member_ids, real[r].member_ids);
      if (static_cast<double>(inter) >=
          config.intersection_fraction * static_cast<double>(pred.member_ids.size())) {
        if (inter > best_inter) {
          best_inter = inter;
          best_real = static_cast<int>(r);
        }
      }
    }
    if (best_real >= 0) {
      table.push_back({static_cast<int>(p), best_real, best_inter});
    }
  }
  return table;
}

double crack_detection_rate(const MatchTable& table, int real_count) {
  if (real_count < 1) throw data_error("detection rate undefined without real instances");
  std::vector<char> hit(real_count, 0);
  for (const auto& m : table) hit[m.real_index] = 1;
  long long detected = 0;
  for (char h : hit) detected += h;
  return static_cast<double>(detected) / real_count;
}

double crack_continuity(const MatchTable& table, int real_count) {
  if (real_count < 1) throw data_error("continuity undefined without real instances");
  std::vector<long long> matches(real_count, 0);
  for (const auto& m : table) ++matches[m.real_index];
  double total = 0.0;
  for (long long c : matches) {
    if (c > 0) total += 1.0 / static_cast<double>(c);
  }
  return total / real_count;
}

double crack_precision(const MatchTable& table, int predicted_count) {
  if (predicted_count < 1) {
    throw data_error("crack precision undefined without predictions");
  }
  // each prediction appears at most once in the table
  return static_cast<double>(table.size()) / predicted_count;
}

std::vector<SizeRecord> detection_by_size(const MatchTable& table,
                                          const std::vector<CrackInstance>& real,
                                          const std::vector<double>* max_widths) {
  std::vector<char> hit(real.size(), 0);
  for (const auto& m : table) hit[m.real_index] = 1;
  std::vector<SizeRecord> out;
  out.reserve(real.size());
  for (std::size_t r = 0; r < real.size(); ++r) {
    SizeRecord rec;
    rec.instance_id = real[r].id;
    rec.point_count = static_cast<long long>(real[r].member_ids.size());
    rec.detected = hit[r] != 0;
    if (max_widths && r < max_widths->size()) rec.max_width = (*max_widths)[r];
    out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), [](const SizeRecord& a, const SizeRecord& b) {
    if (a.point_count != b.point_count) return a.point_count < b.point_count;
    return a.instance_id < b.instance_id;
  });
  return out;
}

SizeSummary summarize_by_size(const std::vector<SizeRecord>& records,
                              long long point_threshold) {
  SizeSummary s;
  for (const auto& rec : records) {
    if (rec.point_count <= point_threshold) {
      ++s.small_total;
      if (rec.detected) ++s.small_detected;
    } else {
      ++s.large_total;
      if (rec.detected) ++s.large_detected;
    }
  }
  s.small_rate = s.small_total > 0
                     ? static_cast<double>(s.small_detected) / s.small_total
                     : 0.0;
  s.large_rate = s.large_total > 0
                     ? static_cast<double>(s.large_detected) / s.large_total
                     : 0.0;
  return s;
}

std::vector<SweepPoint> threshold_sweep(
    const std::vector<AnnotationLayer>& layers,
    const std::vector<std::vector<std::uint8_t>>& truths,
    const std::vector<double>& thresholds) {
  if (layers.size() != truths.size()) {
    throw std::invalid_argument("threshold_sweep: layer/label count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].size() != truths[i].size()) {
      throw std::invalid_argument("threshold_sweep: layer " + std::to_string(i) +
                                  " size mismatch");
    }
  }
  for (std::size_t t = 1; t < thresholds.size(); ++t) {
    if (thresholds[t - 1] > thresholds[t]) {
      throw std::invalid_argument("threshold_sweep: thresholds must ascend");
    }
  }

  std::vector<SweepPoint> out;
  out.reserve(thresholds.size());
  std::vector<std::uint8_t> predicted, truth;
  for (double threshold : thresholds) {
    predicted.clear();
    truth.clear();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t i = 0; i < layers[l].size(); ++i) {
        predicted.push_back(layers[l].confidence[i] >= threshold ? 1 : 0);
        truth.push_back(truths[l][i]);
      }
    }
    const PointwiseScores s = pointwise(predicted, truth);
    out.push_back({threshold, s.precision, s.recall, s.specificity, s.f1});
  }
  return out;
}

MetricsReport compute_report(const std::vector<std::uint8_t>& predicted_labels,
                             const std::vector<std::uint8_t>& true_labels,
                             const std::vector<CrackInstance>& predicted,
                             const std::vector<CrackInstance>& real,
                             const MatchConfig& config) {
  MetricsReport report;
  report.points = pointwise(predicted_labels, true_labels);
  report.real_count = static_cast<int>(real.size());
  report.predicted_count = static_cast<int>(predicted.size());
  report.table = match_instances(predicted, real, config);
  report.cr_det = crack_detection_rate(report.table, report.real_count);
  report.cr_con = crack_continuity(report.table, report.real_count);
  report.cr_pre = report.predicted_count > 0
                      ? crack_precision(report.table, report.predicted_count)
                      : std::nan("");
  return report;
}

std::string report_text(const MetricsReport& r) {
  char buf[640];
  std::snprintf(buf, sizeof buf,
                "points: tp=%lld fp=%lld tn=%lld fn=%lld\n"
                "precision   %.6g\n"
                "recall      %.6g\n"
                "specificity %.6g\n"
                "f1          %.6g\n"
                "cr_det      %.6g   (%d real instances)\n"
                "cr_con      %.6g\n"
                "cr_pre      %.6g   (%d predicted instances)\n",
                r.points.tp, r.points.fp, r.points.tn, r.points.fn,
                r.points.precision, r.points.recall, r.points.specificity,
                r.points.f1, r.cr_det, r.real_count, r.cr_con, r.cr_pre,
                r.predicted_count);
  return buf;
}

std::string report_table_header() {
  return "delta_h\tdelta_r\tdelta_n\tprecision\trecall\tspecificity\tf1\t"
         "cr_det\tcr_con\tcr_pre\tn_real\tn_pred\n";
}

std::string report_table_row(double confidence_threshold, double link_distance,
                             int min_cluster_size, const MetricsReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%.6g\t%.6g\t%d\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%d\t%d\n",
                confidence_threshold, link_distance, min_cluster_size,
                r.points.precision, r.points.recall, r.points.specificity,
                r.points.f1, r.cr_det, r.cr_con, r.cr_pre, r.real_count,
                r.predicted_count);
  return buf;
}

}  // namespace ptcrack
