#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptcrack/cloud_io.hpp"
#include "ptcrack/instancer.hpp"
#include "ptcrack/types.hpp"

namespace ptcrack {

struct PointwiseScores {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0, recall = 0.0, specificity = 1.0, f1 = 0.0;
};

// Confusion counts and rates over binary labels. Conventions when a
// denominator is empty: precision 0, recall 0, specificity 1, f1 0.
PointwiseScores pointwise(const std::vector<std::uint8_t>& predicted,
                          const std::vector<std::uint8_t>& truth);

struct InstanceMatch {
  int pred_index = -1;  // into the predicted instance vector
  int real_index = -1;  // into the real instance vector
  long long intersection = 0;
};

using MatchTable = std::vector<InstanceMatch>;

// A predicted instance matches a real one when their intersection holds at
// least intersection_fraction of the predicted points. Each prediction is
// assigned to at most one real instance: largest intersection wins, ties go
// to the lowest real id.
MatchTable match_instances(const std::vector<CrackInstance>& predicted,
                           const std::vector<CrackInstance>& real,
                           const MatchConfig& config);

// Fraction of real instances hit by at least one prediction.
double crack_detection_rate(const MatchTable& table, int real_count);

// Mean over real instances of 1 / (number of predictions matching it);
// undetected instances contribute 0. Lower values mean fragmented detections.
double crack_continuity(const MatchTable& table, int real_count);

// Fraction of predicted instances that match a real instance.
double crack_precision(const MatchTable& table, int predicted_count);

struct SizeRecord {
  int instance_id = 0;
  long long point_count = 0;
  bool detected = false;
  double max_width = -1.0;  // from generator ground truth when known, else -1
};

// Per-real-instance detection outcome, sorted by point count ascending.
// max_widths, when given, is indexed like the real instance vector.
std::vector<SizeRecord> detection_by_size(const MatchTable& table,
                                          const std::vector<CrackInstance>& real,
                                          const std::vector<double>* max_widths = nullptr);

struct SizeSummary {
  long long small_total = 0, small_detected = 0;  // point count <= threshold
  long long large_total = 0, large_detected = 0;
  double small_rate = 0.0, large_rate = 0.0;
};

SizeSummary summarize_by_size(const std::vector<SizeRecord>& records,
                              long long point_threshold = 500);

struct SweepPoint {
  double threshold = 0.0;
  double precision = 0.0, recall = 0.0, specificity = 0.0, f1 = 0.0;
};

// Point-wise scores of the raw confidences thresholded at each value,
// aggregated over all layers. Thresholds must ascend.
std::vector<SweepPoint> threshold_sweep(
    const std::vector<AnnotationLayer>& layers,
    const std::vector<std::vector<std::uint8_t>>& truths,
    const std::vector<double>& thresholds);

struct MetricsReport {
  PointwiseScores points;
  double cr_det = 0.0, cr_con = 0.0, cr_pre = 0.0;
  int real_count = 0;
  int predicted_count = 0;
  MatchTable table;
};

// Assembles the full report. Requires at least one real instance; with zero
// predicted instances cr_pre is reported as NaN.
MetricsReport compute_report(const std::vector<std::uint8_t>& predicted_labels,
                             const std::vector<std::uint8_t>& true_labels,
                             const std::vector<CrackInstance>& predicted,
                             const std::vector<CrackInstance>& real,
                             const MatchConfig& config);

std::string report_text(const MetricsReport& report);

// One header plus one row per configuration, tab-separated.
std::string report_table_header();
std::string report_table_row(double confidence_threshold, double link_distance,
                             int min_cluster_size, const MetricsReport& report);

}  // namespace ptcrack
