#include "ptcrack/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "ptcrack/rng.hpp"

namespace ptcrack {

namespace {

constexpr double kProbClamp = 1e-7;
constexpr double kDescriptorRadius = 0.1;  // normalized units
constexpr int kDescriptorCount = 6;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double sample_loss(double p, bool positive, double gamma, double alpha) {
  p = clamp_prob(p);
  if (positive) {
    if (gamma == 0.0) return -alpha * std::log(p);
    return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  }
  if (gamma == 0.0) return -(1.0 - alpha) * std::log(1.0 - p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

double sample_dloss_dz(double p, bool positive, double gamma, double alpha) {
  p = clamp_prob(p);
  if (positive) {
    if (gamma == 0.0) return alpha * (p - 1.0);
    const double q = 1.0 - p;
    return alpha * (gamma * p * std::pow(q, gamma) * std::log(p) -
                    std::pow(q, gamma + 1.0));
  }
  if (gamma == 0.0) return (1.0 - alpha) * p;
  return (1.0 - alpha) * (std::pow(p, gamma + 1.0) -
                          gamma * std::pow(p, gamma) * (1.0 - p) * std::log(1.0 - p));
}

// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi sweeps,
// descending, clamped to be non-negative.
std::array<double, 3> eigenvalues_sym3(double a00, double a01, double a02,
                                       double a11, double a12, double a22) {
  double a[3][3] = {{a00, a01, a02}, {a01, a11, a12}, {a02, a12, a22}};
  const double scale = std::abs(a00) + std::abs(a11) + std::abs(a22) + 1e-300;
  for (int sweep = 0; sweep < 32; ++sweep) {
    const double off =
        a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (off < 1e-28 * scale * scale) break;
    static const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (const auto& pq : pairs) {
      const int p = pq[0], q = pq[1];
      if (std::abs(a[p][q]) < 1e-300) continue;
      const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
      const double t =
          (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
      const double c = 1.0 / std::sqrt(t * t + 1.0);
      const double s = t * c;
      const double app = a[p][p], aqq = a[q][q], apq = a[p][q];
      a[p][p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
      a[q][q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
      a[p][q] = a[q][p] = 0.0;
      for (int r = 0; r < 3; ++r) {
        if (r == p || r == q) continue;
        const double arp = a[r][p], arq = a[r][q];
        a[r][p] = a[p][r] = c * arp - s * arq;
        a[r][q] = a[q][r] = s * arp + c * arq;
      }
    }
  }
  std::array<double, 3> ev = {a[0][0], a[1][1], a[2][2]};
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  for (double& v : ev) v = std::max(v, 0.0);
  return ev;
}

struct BinKey {
  int x, y, z;
  bool operator==(const BinKey& o) const { return x == o.x && y == o.y && z == o.z; }
};
struct BinKeyHash {
  std::size_t operator()(const BinKey& k) const {
    return static_cast<std::size_t>(hash_combine(
        static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)),
        hash_combine(static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)),
                     static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z)))));
  }
};

int drop_activation_index(const TrainingConfig& config) {
  // activation feeding the last hidden layer; none when the stack is shallow
  return static_cast<int>(config.hidden_widths.size()) >= 2
             ? static_cast<int>(config.hidden_widths.size()) - 1
             : -1;
}

struct ForwardState {
  std::vector<Mat> inputs;  // inputs[l] fed layer l; inputs[0] is the features
  std::vector<Mat> pre;     // pre-activation outputs per layer
  Mat drop_scale;           // elementwise scale applied to the dropout target
  int drop_index = -1;      // which inputs[] got the dropout
};

// Forward through the stack. When rng is non-null, inverted dropout is
// applied at the configured activation.
std::vector<double> forward_pass(const ScorerModel& model, const Mat& features,
                                 ForwardState* state, Rng* rng) {
  const int layers = model.layer_count();
  const int n = features.rows;
  Mat cur = features;
  const int drop_at = drop_activation_index(model.config);

  if (state) {
    state->inputs.clear();
    state->pre.clear();
    state->drop_index = -1;
  }
  for (int l = 0; l < layers; ++l) {
    const Mat& w = model.weights[l];
    const auto& b = model.biases[l];
    Mat out(n, w.rows);
    for (int i = 0; i < n; ++i) {
      const double* x = cur.row(i);
      double* o = out.row(i);
      for (int r = 0; r < w.rows; ++r) {
        const double* wr = w.row(r);
        double acc = b[r];
        for (int c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
        o[r] = acc;
      }
    }
    if (state) {
      state->inputs.push_back(std::move(cur));
      state->pre.push_back(out);
    }
    if (l + 1 == layers) {
      std::vector<double> logits(n);
      for (int i = 0; i < n; ++i) logits[i] = out(i, 0);
      return logits;
    }
    Mat act(n, w.rows);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      act.data[i] = out.data[i] > 0.0 ? out.data[i] : 0.0;
    }
    if (rng && (l + 1) == drop_at && model.config.dropout > 0.0) {
      const double keep = 1.0 - model.config.dropout;
      Mat scale(n, w.rows);
      for (std::size_t i = 0; i < scale.data.size(); ++i) {
        scale.data[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
      }
      for (std::size_t i = 0; i < act.data.size(); ++i) act.data[i] *= scale.data[i];
      if (state) {
        state->drop_scale = std::move(scale);
        state->drop_index = drop_at;
      }
    }
    cur = std::move(act);
  }
  return {};
}

double backward_pass(const ScorerModel& model, const Mat& features,
                     const std::vector<std::uint8_t>& labels, double gamma,
                     double alpha, Rng* dropout_rng, ModelGradients* grads) {
  const int n = features.rows;
  ForwardState state;
  const std::vector<double> logits = forward_pass(model, features, &state, dropout_rng);

  std::vector<double> conf(n);
  for (int i = 0; i < n; ++i) conf[i] = sigmoid_confidence(logits[i]);
  double loss = 0.0;
  Mat delta(n, 1);
  for (int i = 0; i < n; ++i) {
    loss += sample_loss(conf[i], labels[i] != 0, gamma, alpha);
    delta(i, 0) = sample_dloss_dz(conf[i], labels[i] != 0, gamma, alpha) / n;
  }
  loss /= n;
  if (!grads) return loss;

  const int layers = model.layer_count();
  grads->d_weights.assign(layers, Mat());
  grads->d_biases.assign(layers, {});
  for (int l = layers - 1; l >= 0; --l) {
    const Mat& w = model.weights[l];
    const Mat& in = state.inputs[l];
    Mat dw(w.rows, w.cols);
    std::vector<double> db(w.rows, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* x = in.row(i);
      const double* d = delta.row(i);
      for (int r = 0; r < w.rows; ++r) {
        if (d[r] == 0.0) continue;
        double* dwr = dw.row(r);
        for (int c = 0; c < w.cols; ++c) dwr[c] += d[r] * x[c];
        db[r] += d[r];
      }
    }
    grads->d_weights[l] = std::move(dw);
    grads->d_biases[l] = std::move(db);

    if (l == 0) break;
    Mat next(n, w.cols);
    for (int i = 0; i < n; ++i) {
      const double* d = delta.row(i);
      double* nd = next.row(i);
      for (int r = 0; r < w.rows; ++r) {
        if (d[r] == 0.0) continue;
        const double* wr = w.row(r);
        for (int c = 0; c < w.cols; ++c) nd[c] += d[r] * wr[c];
      }
      if (state.drop_index == l) {
        const double* sc = state.drop_scale.row(i);
        for (int c = 0; c < w.cols; ++c) nd[c] *= sc[c];
      }
      const double* pr = state.pre[l - 1].row(i);
      for (int c = 0; c < w.cols; ++c) {
        if (pr[c] <= 0.0) nd[c] = 0.0;
      }
    }
    delta = std::move(next);
  }
  return loss;
}

struct AdamState {
  std::vector<Mat> m_w, v_w;
  std::vector<std::vector<double>> m_b, v_b;
  long long step = 0;

  explicit AdamState(const ScorerModel& model) {
    for (const Mat& w : model.weights) {
      m_w.emplace_back(w.rows, w.cols);
      v_w.emplace_back(w.rows, w.cols);
    }
    for (const auto& b : model.biases) {
      m_b.emplace_back(b.size(), 0.0);
      v_b.emplace_back(b.size(), 0.0);
    }
  }

  void update(ScorerModel& model, const ModelGradients& g, double lr,
              const TrainingConfig& cfg) {
    ++step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      auto& w = model.weights[l].data;
      auto& mw = m_w[l].data;
      auto& vw = v_w[l].data;
      const auto& gw = g.d_weights[l].data;
      for (std::size_t i = 0; i < w.size(); ++i) {
        mw[i] = b1 * mw[i] + (1.0 - b1) * gw[i];
        vw[i] = b2 * vw[i] + (1.0 - b2) * gw[i] * gw[i];
        w[i] -= lr * (mw[i] / corr1) / (std::sqrt(vw[i] / corr2) + cfg.adam_epsilon);
      }
      auto& b = model.biases[l];
      auto& mb = m_b[l];
      auto& vb = v_b[l];
      const auto& gb = g.d_biases[l];
      for (std::size_t i = 0; i < b.size(); ++i) {
        mb[i] = b1 * mb[i] + (1.0 - b1) * gb[i];
        vb[i] = b2 * vb[i] + (1.0 - b2) * gb[i] * gb[i];
        b[i] -= lr * (mb[i] / corr1) / (std::sqrt(vb[i] / corr2) + cfg.adam_epsilon);
      }
    }
  }
};

void validate_training_config(const TrainingConfig& c) {
  if (c.focal_gamma < 0.0) throw data_error("focal gamma must be >= 0");
  if (!(c.focal_alpha > 0.0 && c.focal_alpha < 1.0)) {
    throw data_error("focal alpha must be in (0,1)");
  }
  if (c.epochs < 1) throw data_error("epochs must be >= 1");
  if (!(c.learning_rate > 0.0)) throw data_error("learning rate must be > 0");
  if (c.lr_halve_every < 1) throw data_error("lr halving interval must be >= 1");
  if (c.batch_size < 1) throw data_error("batch size must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw data_error("dropout must be in [0,1)");
  if (c.hidden_widths.empty()) throw data_error("at least one hidden layer required");
  for (int w : c.hidden_widths) {
    if (w < 1) throw data_error("hidden widths must be positive");
  }
}

}  // namespace

int feature_dim(const FeatureMask& mask) { return 3 + mask.dim() + kDescriptorCount; }

Mat extract_features(const NormalizedVoxel& voxel) {
  const int n = voxel.point_count();
  const int dim_f = voxel.mask.dim();
  Mat out(n, feature_dim(voxel.mask));

  // brightness per point, from normalized rgb when present, else intensity
  std::vector<double> brightness(n, 0.0);
  const bool has_brightness = dim_f > 0;
  for (int i = 0; i < n; ++i) {
    if (voxel.mask.use_rgb) {
      brightness[i] =
          (voxel.features(i, 0) + voxel.features(i, 1) + voxel.features(i, 2)) / 3.0;
    } else if (voxel.mask.use_intensity) {
      brightness[i] = voxel.features(i, 0);
    }
  }

  std::unordered_map<BinKey, std::vector<int>, BinKeyHash> bins;
  bins.reserve(n);
  auto bin_of = [&](int row) {
    return BinKey{static_cast<int>(std::floor(voxel.coords(row, 0) / kDescriptorRadius)),
                  static_cast<int>(std::floor(voxel.coords(row, 1) / kDescriptorRadius)),
                  static_cast<int>(std::floor(voxel.coords(row, 2) / kDescriptorRadius))};
  };
  for (int i = 0; i < n; ++i) bins[bin_of(i)].push_back(i);

  const double r2 = kDescriptorRadius * kDescriptorRadius;
  std::vector<int> hood;
  for (int i = 0; i < n; ++i) {
    const Vec3 p{voxel.coords(i, 0), voxel.coords(i, 1), voxel.coords(i, 2)};
    const BinKey base = bin_of(i);
    hood.clear();
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const auto it = bins.find({base.x + dx, base.y + dy, base.z + dz});
          if (it == bins.end()) continue;
          for (int j : it->second) {
            const Vec3 q{voxel.coords(j, 0), voxel.coords(j, 1), voxel.coords(j, 2)};
            if (distance2(p, q) <= r2) hood.push_back(j);
          }
        }
      }
    }
    // canonical accumulation order keeps results independent of row order
    std::sort(hood.begin(), hood.end(),
              [&](int a, int b) { return voxel.ids[a] < voxel.ids[b]; });

    double* row = out.row(i);
    for (int c = 0; c < 3; ++c) row[c] = voxel.coords(i, c);
    for (int c = 0; c < dim_f; ++c) row[3 + c] = voxel.features(i, c);

    double linearity = 0.0, planarity = 0.0, sphericity = 0.0;
    double mean_dist = 0.0, contrast = 0.0;
    const int neighbor_count = static_cast<int>(hood.size()) - 1;  // excluding self

    if (hood.size() >= 3) {
      Vec3 mean{};
      for (int j : hood) {
        mean += Vec3{voxel.coords(j, 0), voxel.coords(j, 1), voxel.coords(j, 2)};
      }
      mean = mean / static_cast<double>(hood.size());
      double cxx = 0, cxy = 0, cxz = 0, cyy = 0, cyz = 0, czz = 0;
      for (int j : hood) {
        const double dx = voxel.coords(j, 0) - mean.x;
        const double dy = voxel.coords(j, 1) - mean.y;
        const double dz = voxel.coords(j, 2) - mean.z;
        cxx += dx * dx;
        cxy += dx * dy;
        cxz += dx * dz;
        cyy += dy * dy;
        cyz += dy * dz;
        czz += dz * dz;
      }
      const double inv = 1.0 / static_cast<double>(hood.size());
      const auto ev = eigenvalues_sym3(cxx * inv, cxy * inv, cxz * inv, cyy * inv,
                                       cyz * inv, czz * inv);
      if (ev[0] > 1e-12) {
        linearity = (ev[0] - ev[1]) / ev[0];
        planarity = (ev[1] - ev[2]) / ev[0];
        sphericity = ev[2] / ev[0];
      }
    }
    if (neighbor_count > 0) {
      double sum_dist = 0.0, sum_brightness = 0.0;
      for (int j : hood) {
        if (j == i) continue;
        const Vec3 q{voxel.coords(j, 0), voxel.coords(j, 1), voxel.coords(j, 2)};
        sum_dist += distance(p, q);
        sum_brightness += brightness[j];
      }
      mean_dist = sum_dist / neighbor_count;
      if (has_brightness) {
        contrast = brightness[i] - sum_brightness / neighbor_count;
      }
    }

    const int base_col = 3 + dim_f;
    row[base_col + 0] = linearity;
    row[base_col + 1] = planarity;
    row[base_col + 2] = sphericity;
    row[base_col + 3] = n > 1 ? static_cast<double>(neighbor_count) / (n - 1) : 0.0;
    row[base_col + 4] = mean_dist / kDescriptorRadius;
    row[base_col + 5] = contrast;
  }
  return out;
}

double sigmoid_confidence(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double focal_loss(const std::vector<double>& confidences,
                  const std::vector<std::uint8_t>& labels, double gamma,
                  double alpha) {
  if (confidences.size() != labels.size()) {
    throw std::invalid_argument("focal loss: " + std::to_string(confidences.size()) +
                                " confidences vs " + std::to_string(labels.size()) +
                                " labels");
  }
  if (confidences.empty()) throw std::invalid_argument("focal loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    total += sample_loss(confidences[i], labels[i] != 0, gamma, alpha);
  }
  return total / static_cast<double>(confidences.size());
}

std::vector<double> focal_loss_gradient(const std::vector<double>& confidences,
                                        const std::vector<std::uint8_t>& labels,
                                        double gamma, double alpha) {
  if (confidences.size() != labels.size()) {
    throw std::invalid_argument("focal loss gradient: length mismatch");
  }
  std::vector<double> grad(confidences.size());
  const double inv_n = 1.0 / static_cast<double>(confidences.size());
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    grad[i] = sample_dloss_dz(confidences[i], labels[i] != 0, gamma, alpha) * inv_n;
  }
  return grad;
}

ScorerModel init_model(const TrainingConfig& config, const DatasetStats& dataset,
                       const NormalizationStats& stats, const FeatureMask& mask,
                       std::uint64_t seed) {
  validate_training_config(config);
  if (dataset.n_pos <= 0 || dataset.n_neg <= 0) {
    throw data_error("bias initialization needs points of both classes (pos=" +
                     std::to_string(dataset.n_pos) + ", neg=" +
                     std::to_string(dataset.n_neg) + ")");
  }

  ScorerModel model;
  model.mask = mask;
  model.stats = stats;
  model.config = config;

  std::vector<int> sizes;
  sizes.push_back(feature_dim(mask));
  for (int w : config.hidden_widths) sizes.push_back(w);
  sizes.push_back(1);

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    Mat w(fan_out, fan_in);
    const bool final_layer = l + 2 == sizes.size();
    if (!final_layer) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : w.data) v = rng.uniform(-scale, scale);
    }
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  model.biases.back()[0] = std::log(static_cast<double>(dataset.n_pos) /
                                    static_cast<double>(dataset.n_neg));
  return model;
}

std::vector<double> forward_logits(const ScorerModel& model, const Mat& features) {
  if (features.cols != model.input_dim()) {
    throw data_error("feature dimension " + std::to_string(features.cols) +
                     " does not match model input " + std::to_string(model.input_dim()));
  }
  return forward_pass(model, features, nullptr, nullptr);
}

std::vector<double> predict(const ScorerModel& model, const NormalizedVoxel& voxel) {
  const Mat features = extract_features(voxel);
  std::vector<double> logits = forward_logits(model, features);
  for (double& z : logits) z = sigmoid_confidence(z);
  return logits;
}

double loss_and_gradients(const ScorerModel& model, const Mat& features,
                          const std::vector<std::uint8_t>& labels, double gamma,
                          double alpha, ModelGradients* out) {
  if (static_cast<int>(labels.size()) != features.rows) {
    throw std::invalid_argument("loss_and_gradients: label count mismatch");
  }
  return backward_pass(model, features, labels, gamma, alpha, nullptr, out);
}

std::pair<ScorerModel, TrainingHistory> train(
    const ScorerModel& model, const std::vector<NormalizedVoxel>& train_voxels,
    const std::vector<NormalizedVoxel>& val_voxels, const TrainingConfig& config) {
  validate_training_config(config);
  if (train_voxels.empty() || val_voxels.empty()) {
    throw data_error("training needs non-empty train and validation sets");
  }

  ScorerModel current = model;
  current.config = config;
  AdamState adam(current);
  TrainingHistory history;
  history.reserve(config.epochs);

  // validation features never change; extract once
  std::vector<Mat> val_features;
  std::vector<const std::vector<std::uint8_t>*> val_labels;
  val_features.reserve(val_voxels.size());
  for (const auto& v : val_voxels) {
    val_features.push_back(extract_features(v));
    val_labels.push_back(&v.labels);
  }

  ScorerModel best = current;
  double best_f1 = -1.0;
  Rng shuffle_rng = Rng(config.seed).child(0x73687566ULL);

  std::vector<std::size_t> order(train_voxels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * std::pow(0.5, epoch / config.lr_halve_every);
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    long long epoch_points = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));

      int rows = 0;
      for (std::size_t k = start; k < stop; ++k) {
        rows += train_voxels[order[k]].point_count();
      }
      Mat features(rows, feature_dim(current.mask));
      std::vector<std::uint8_t> labels(rows);
      int cursor = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const NormalizedVoxel& voxel = train_voxels[order[k]];
        const NormalizedVoxel jittered = perturb(
            voxel, hash_combine(config.seed,
                                hash_combine(0x7065727455ULL,
                                             hash_combine(static_cast<std::uint64_t>(epoch),
                                                          static_cast<std::uint64_t>(order[k])))));
        const Mat f = extract_features(jittered);
        std::memcpy(features.row(cursor), f.data.data(), f.data.size() * sizeof(double));
        std::memcpy(labels.data() + cursor, voxel.labels.data(), voxel.labels.size());
        cursor += f.rows;
      }

      Rng dropout_rng = Rng(config.seed).child(
          hash_combine(0x64726f70ULL, hash_combine(static_cast<std::uint64_t>(epoch),
                                                   static_cast<std::uint64_t>(start))));
      ModelGradients grads;
      const double loss = backward_pass(current, features, labels, config.focal_gamma,
                                        config.focal_alpha, &dropout_rng, &grads);
      if (!std::isfinite(loss)) {
        throw training_error("training diverged at epoch " + std::to_string(epoch));
      }
      adam.update(current, grads, lr, config);
      epoch_loss += loss * rows;
      epoch_points += rows;
    }

    // validation: loss plus confusion at threshold 0.5
    double val_loss = 0.0;
    long long val_points = 0, tp = 0, fp = 0, fn = 0;
    for (std::size_t v = 0; v < val_features.size(); ++v) {
      const std::vector<double> logits = forward_pass(current, val_features[v], nullptr, nullptr);
      std::vector<double> conf(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        conf[i] = sigmoid_confidence(logits[i]);
      }
      val_loss += focal_loss(conf, *val_labels[v], config.focal_gamma,
                             config.focal_alpha) *
                  static_cast<double>(conf.size());
      val_points += static_cast<long long>(conf.size());
      for (std::size_t i = 0; i < conf.size(); ++i) {
        const bool pred = conf[i] >= 0.5;
        const bool truth = (*val_labels[v])[i] != 0;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && truth) ++fn;
      }
    }

    TrainingEpoch row;
    row.train_loss = epoch_points > 0 ? epoch_loss / epoch_points : 0.0;
    row.val_loss = val_points > 0 ? val_loss / val_points : 0.0;
    row.val_precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    row.val_recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    row.val_f1 = row.val_precision + row.val_recall > 0.0
                     ? 2.0 * row.val_precision * row.val_recall /
                           (row.val_precision + row.val_recall)
                     : 0.0;
    history.push_back(row);

    if (row.val_f1 > best_f1) {
      best_f1 = row.val_f1;
      best = current;
    }
  }
  best.config = config;
  return {std::move(best), std::move(history)};
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}
void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) {
      throw data_error("truncated model file " + path);
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | p[i];
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
    p += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

constexpr char kModelMagic[8] = {'P', 'T', 'C', 'R', 'K', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

void save_model(const ScorerModel& model, const std::string& path) {
  std::string out;
  out.append(kModelMagic, sizeof kModelMagic);
  put_u32(out, kModelVersion);
  put_u32(out, (model.mask.use_rgb ? 1u : 0u) | (model.mask.use_intensity ? 2u : 0u));
  put_u32(out, static_cast<std::uint32_t>(model.weights.size()));
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const Mat& w = model.weights[l];
    put_u32(out, static_cast<std::uint32_t>(w.rows));
    put_u32(out, static_cast<std::uint32_t>(w.cols));
    for (double v : w.data) put_f64(out, v);
    for (double v : model.biases[l]) put_f64(out, v);
  }
  for (double v : model.stats.feature_min) put_f64(out, v);
  for (double v : model.stats.feature_max) put_f64(out, v);
  put_f64(out, model.stats.voxel_edge);
  const TrainingConfig& c = model.config;
  put_f64(out, c.focal_gamma);
  put_f64(out, c.focal_alpha);
  put_f64(out, c.learning_rate);
  put_f64(out, c.adam_beta1);
  put_f64(out, c.adam_beta2);
  put_f64(out, c.adam_epsilon);
  put_f64(out, c.dropout);
  put_u32(out, static_cast<std::uint32_t>(c.epochs));
  put_u32(out, static_cast<std::uint32_t>(c.lr_halve_every));
  put_u32(out, static_cast<std::uint32_t>(c.batch_size));
  put_u32(out, static_cast<std::uint32_t>(c.hidden_widths.size()));
  for (int w : c.hidden_widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u64(out, c.seed);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw data_error("write failed for " + path);
}

ScorerModel load_model(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw data_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(file)),
                    std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()),
           reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size(), path};

  r.need(sizeof kModelMagic);
  if (std::memcmp(r.p, kModelMagic, sizeof kModelMagic) != 0) {
    throw data_error(path + " is not a model file");
  }
  r.p += sizeof kModelMagic;
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) {
    throw data_error(path + " has unsupported model version " + std::to_string(version));
  }

  ScorerModel model;
  const std::uint32_t mask_bits = r.u32();
  model.mask.use_rgb = (mask_bits & 1u) != 0;
  model.mask.use_intensity = (mask_bits & 2u) != 0;
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 64) throw data_error(path + " has a bad layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows == 0 || cols == 0 || rows > 1u << 20 || cols > 1u << 20) {
      throw data_error(path + " has a bad layer shape");
    }
    Mat w(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : w.data) v = r.f64();
    std::vector<double> b(rows);
    for (double& v : b) v = r.f64();
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  for (double& v : model.stats.feature_min) v = r.f64();
  for (double& v : model.stats.feature_max) v = r.f64();
  model.stats.voxel_edge = r.f64();
  TrainingConfig& c = model.config;
  c.focal_gamma = r.f64();
  c.focal_alpha = r.f64();
  c.learning_rate = r.f64();
  c.adam_beta1 = r.f64();
  c.adam_beta2 = r.f64();
  c.adam_epsilon = r.f64();
  c.dropout = r.f64();
  c.epochs = static_cast<int>(r.u32());
  c.lr_halve_every = static_cast<int>(r.u32());
  c.batch_size = static_cast<int>(r.u32());
  const std::uint32_t hidden = r.u32();
  if (hidden > 64) throw data_error(path + " has a bad hidden layer count");
  c.hidden_widths.clear();
  for (std::uint32_t i = 0; i < hidden; ++i) {
    c.hidden_widths.push_back(static_cast<int>(r.u32()));
  }
  c.seed = r.u64();
  return model;
}

}  // namespace ptcrack
