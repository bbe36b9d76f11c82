#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ptcrack/dataset.hpp"
#include "ptcrack/mat.hpp"
#include "ptcrack/types.hpp"

namespace ptcrack {

struct TrainingConfig {
  double focal_gamma = 4.0;
  double focal_alpha = 0.75;      // positive-class weight, in (0,1)
  int epochs = 101;
  double learning_rate = 0.01;
  int lr_halve_every = 10;        // epochs between halvings
  int batch_size = 5;             // voxels per optimizer step
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-7;
  double dropout = 0.5;           // on the activation feeding the last hidden layer
  std::vector<int> hidden_widths = {64, 64, 32};
  std::uint64_t seed = 1;
};

struct TrainingEpoch {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double val_f1 = 0.0;
};

using TrainingHistory = std::vector<TrainingEpoch>;

// Per-point confidence function: a fully connected stack over hand-crafted
// point + neighborhood features, sigmoid output.
struct ScorerModel {
  std::vector<Mat> weights;                 // weights[l] is (out x in)
  std::vector<std::vector<double>> biases;  // biases[l] is (out)
  FeatureMask mask;
  NormalizationStats stats;
  TrainingConfig config;

  int input_dim() const { return weights.empty() ? 0 : weights.front().cols; }
  int layer_count() const { return static_cast<int>(weights.size()); }
};

// Number of feature columns for a mask: 3 coordinates, the selected
// channels, and 6 local-neighborhood descriptors.
int feature_dim(const FeatureMask& mask);

// Per-point rows: normalized coordinates, selected channels, then local
// descriptors computed over the neighborhood within radius 0.1 (normalized
// units): linearity, planarity, sphericity from the covariance eigenvalues,
// neighbor count, mean neighbor distance, and darkness contrast (point
// brightness minus neighborhood mean). Isolated points get zeros.
Mat extract_features(const NormalizedVoxel& voxel);

// 1/(1+exp(-z)), stable for large |z|.
double sigmoid_confidence(double z);

// Mean focal loss. Probabilities are clamped to [1e-7, 1-1e-7]; gamma = 0
// with alpha = 0.5 reduces to half the mean binary cross-entropy.
double focal_loss(const std::vector<double>& confidences,
                  const std::vector<std::uint8_t>& labels, double gamma,
                  double alpha);

// Analytic d(mean focal loss)/d(logit), matching finite differences.
std::vector<double> focal_loss_gradient(const std::vector<double>& confidences,
                                        const std::vector<std::uint8_t>& labels,
                                        double gamma, double alpha);

// Hidden weights scaled-uniform by fan-in; final layer weights zero with
// bias log(n_pos/n_neg), so the untrained model predicts the class prior.
ScorerModel init_model(const TrainingConfig& config, const DatasetStats& dataset,
                       const NormalizationStats& stats, const FeatureMask& mask,
                       std::uint64_t seed);

// Logits for pre-extracted feature rows, no dropout.
std::vector<double> forward_logits(const ScorerModel& model, const Mat& features);

// Confidences for every point of the voxel. Pure; row order in, row order out.
std::vector<double> predict(const ScorerModel& model, const NormalizedVoxel& voxel);

struct ModelGradients {
  std::vector<Mat> d_weights;
  std::vector<std::vector<double>> d_biases;
};

// Mean focal loss over the feature rows plus its gradient in every
// parameter; evaluation mode (no dropout). Used by training and by the
// finite-difference checks.
double loss_and_gradients(const ScorerModel& model, const Mat& features,
                          const std::vector<std::uint8_t>& labels, double gamma,
                          double alpha, ModelGradients* out);

// Full schedule: shuffled 5-voxel batches, per-epoch coordinate jitter,
// Adam updates, learning rate halved on schedule. Returns the snapshot with
// the best validation F1 (threshold 0.5) and the per-epoch history.
// Throws training_error when the loss stops being finite.
std::pair<ScorerModel, TrainingHistory> train(
    const ScorerModel& model, const std::vector<NormalizedVoxel>& train_voxels,
    const std::vector<NormalizedVoxel>& val_voxels, const TrainingConfig& config);

void save_model(const ScorerModel& model, const std::string& path);
ScorerModel load_model(const std::string& path);

}  // namespace ptcrack
