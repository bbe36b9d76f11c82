#include "ptcrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ptcrack/instancer.hpp"
#include "ptcrack/metrics.hpp"
#include "ptcrack/rng.hpp"
#include "ptcrack/voxelizer.hpp"

namespace fs = std::filesystem;

namespace ptcrack {

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw data_error("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}
void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(bits >> (8 * i) & 0xff));
}

struct ByteReader {
  const unsigned char* p;
  const unsigned char* end;
  std::string path;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) throw data_error("truncated file " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | p[i];
    p += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = bits << 8 | p[i];
    p += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(p), len);
    p += len;
    return s;
  }
};

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

constexpr char kVoxelSetMagic[8] = {'P', 'T', 'C', 'R', 'K', 'V', 'X', 'S'};

// Voxelizes one split and appends the retained voxels to the set file.
void voxelize_into(VoxelSetFile& set, const PointCloud& cloud,
                   const std::string& cloud_file, const VoxelizationConfig& config,
                   std::uint64_t seed) {
  const auto grid = build_grid(cloud, config);
  const auto filled = filter_and_fill(grid, cloud, config.points_per_voxel, seed);
  const auto cloud_index = static_cast<std::uint32_t>(set.cloud_files.size());
  set.cloud_files.push_back(cloud_file);
  for (const Voxel& v : filled) {
    set.entries.push_back({cloud_index, v.index, v.origin, v.member_ids});
  }
}

struct LoadedSplit {
  std::vector<PointCloud> clouds;
  std::vector<NormalizedVoxel> voxels;
};

LoadedSplit load_split(const std::string& dir, const std::string& name,
                       const NormalizationStats& stats, const FeatureMask& mask) {
  LoadedSplit split;
  const VoxelSetFile set = read_voxel_set(join(dir, name + ".vxs"));
  split.clouds.reserve(set.cloud_files.size());
  for (const auto& file : set.cloud_files) {
    split.clouds.push_back(read_cloud(join(dir, file)));
  }
  split.voxels.reserve(set.entries.size());
  for (const auto& entry : set.entries) {
    Voxel v;
    v.index = entry.index;
    v.origin = entry.origin;
    v.member_ids = entry.member_ids;
    v.source_tag = split.clouds[entry.cloud_index].tag;
    split.voxels.push_back(
        normalize_voxel(split.clouds[entry.cloud_index], v, stats, mask));
  }
  return split;
}

void write_history(const TrainingHistory& history, const std::string& path) {
  std::string out = "epoch\ttrain_loss\tval_loss\tval_precision\tval_recall\tval_f1\n";
  char buf[200];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\n", e,
                  history[e].train_loss, history[e].val_loss,
                  history[e].val_precision, history[e].val_recall,
                  history[e].val_f1);
    out += buf;
  }
  write_file(path, out);
}

double best_f1(const TrainingHistory& history) {
  double best = 0.0;
  for (const auto& row : history) best = std::max(best, row.val_f1);
  return best;
}

// Aggregated crack-wise metrics across clouds (point ids are only unique
// within one cloud, so matching runs per cloud and counts are pooled).
struct CrackwiseTotals {
  long long real_total = 0;
  long long real_detected = 0;
  double continuity_sum = 0.0;
  long long pred_total = 0;
  long long pred_matched = 0;
  std::vector<SizeRecord> by_size;

  void add(const MatchTable& table, const std::vector<CrackInstance>& real,
           long long predicted_count, const std::vector<double>* widths) {
    real_total += static_cast<long long>(real.size());
    std::vector<long long> matches(real.size(), 0);
    for (const auto& m : table) ++matches[m.real_index];
    for (long long c : matches) {
      if (c > 0) {
        ++real_detected;
        continuity_sum += 1.0 / static_cast<double>(c);
      }
    }
    pred_total += predicted_count;
    pred_matched += static_cast<long long>(table.size());
    for (const auto& rec : detection_by_size(table, real, widths)) {
      by_size.push_back(rec);
    }
  }

  double cr_det() const {
    return real_total > 0 ? static_cast<double>(real_detected) / real_total : 0.0;
  }
  double cr_con() const {
    return real_total > 0 ? continuity_sum / static_cast<double>(real_total) : 0.0;
  }
  double cr_pre() const {
    return pred_total > 0 ? static_cast<double>(pred_matched) / pred_total
                          : std::nan("");
  }
};

std::vector<CrackInstance> instances_from_annotations(const PointCloud& cloud,
                                                      const AnnotationLayer& ann) {
  std::map<std::int32_t, std::vector<std::uint32_t>> by_cluster;
  for (std::size_t i = 0; i < ann.size(); ++i) {
    if (ann.cluster_id[i] >= 0) {
      by_cluster[ann.cluster_id[i]].push_back(static_cast<std::uint32_t>(i));
    }
  }
  std::vector<CrackInstance> out;
  int next_id = 1;
  for (auto& [cid, members] : by_cluster) {
    CrackInstance inst;
    inst.id = next_id++;
    std::sort(members.begin(), members.end());
    inst.member_ids = std::move(members);
    Vec3 c{};
    for (std::uint32_t id : inst.member_ids) c += position(cloud.points[id]);
    inst.centroid = c / static_cast<double>(inst.member_ids.size());
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

void write_voxel_set(const VoxelSetFile& set, const std::string& path) {
  std::string out;
  out.append(kVoxelSetMagic, sizeof kVoxelSetMagic);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<std::uint32_t>(set.cloud_files.size()));
  for (const auto& file : set.cloud_files) {
    put_u32(out, static_cast<std::uint32_t>(file.size()));
    out += file;
  }
  put_u32(out, static_cast<std::uint32_t>(set.entries.size()));
  for (const auto& e : set.entries) {
    put_u32(out, e.cloud_index);
    put_u32(out, static_cast<std::uint32_t>(e.index[0]));
    put_u32(out, static_cast<std::uint32_t>(e.index[1]));
    put_u32(out, static_cast<std::uint32_t>(e.index[2]));
    put_f64(out, e.origin.x);
    put_f64(out, e.origin.y);
    put_f64(out, e.origin.z);
    put_u32(out, static_cast<std::uint32_t>(e.member_ids.size()));
    for (std::uint32_t id : e.member_ids) put_u32(out, id);
  }
  write_file(path, out);
}

VoxelSetFile read_voxel_set(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()),
               reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size(),
               path};
  r.need(sizeof kVoxelSetMagic);
  if (std::memcmp(r.p, kVoxelSetMagic, sizeof kVoxelSetMagic) != 0) {
    throw data_error(path + " is not a voxel set file");
  }
  r.p += sizeof kVoxelSetMagic;
  if (r.u32() != 1) throw data_error(path + " has an unsupported voxel set version");

  VoxelSetFile set;
  const std::uint32_t cloud_count = r.u32();
  for (std::uint32_t i = 0; i < cloud_count; ++i) set.cloud_files.push_back(r.str());
  const std::uint32_t entry_count = r.u32();
  set.entries.reserve(entry_count);
  for (std::uint32_t i = 0; i < entry_count; ++i) {
    VoxelSetEntry e;
    e.cloud_index = r.u32();
    if (e.cloud_index >= cloud_count) throw data_error(path + " has a bad cloud index");
    e.index = {r.i32(), r.i32(), r.i32()};
    e.origin = {r.f64(), r.f64(), r.f64()};
    const std::uint32_t members = r.u32();
    e.member_ids.resize(members);
    for (std::uint32_t m = 0; m < members; ++m) e.member_ids[m] = r.u32();
    set.entries.push_back(std::move(e));
  }
  return set;
}

void write_stats(const NormalizationStats& stats, const std::string& path) {
  nlohmann::json j;
  j["feature_min"] = stats.feature_min;
  j["feature_max"] = stats.feature_max;
  j["voxel_edge"] = stats.voxel_edge;
  write_file(path, j.dump(2) + "\n");
}

NormalizationStats read_stats(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("cannot parse " + path + ": " + e.what());
  }
  NormalizationStats stats;
  try {
    for (int i = 0; i < 4; ++i) {
      stats.feature_min[i] = j.at("feature_min").at(i).get<double>();
      stats.feature_max[i] = j.at("feature_max").at(i).get<double>();
    }
    stats.voxel_edge = j.at("voxel_edge").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw data_error("bad stats file " + path + ": " + e.what());
  }
  return stats;
}

std::string default_output_dir(const std::string& command) {
  const char* base = std::getenv("PTCRACK_RUN_DIR");
  return (fs::path(base ? base : "runs") / command).string();
}

int run_synth(const SynthOptions& options, std::ostream& log) {
  log << "command=synth\n"
      << "output_dir=" << options.output_dir << "\n"
      << "surfaces=" << options.spec.surfaces
      << " cracks_per_surface=" << options.spec.cracks_per_surface << "\n"
      << "extent=" << format_g(options.spec.surface.extent_x) << "x"
      << format_g(options.spec.surface.extent_y)
      << " density=" << format_g(options.spec.surface.density) << "\n"
      << "widths=[" << format_g(options.spec.width_min) << ","
      << format_g(options.spec.width_max) << "]"
      << " keep_ratio=" << format_g(options.spec.keep_ratio) << "\n"
      << "seed=" << options.spec.seed << "\n";

  // generate fully in memory before touching the disk, so failures leave no
  // partial outputs
  const SyntheticDataset dataset = generate_dataset(options.spec);

  ensure_dir(options.output_dir);
  const std::string clouds_dir = join(options.output_dir, "clouds");
  ensure_dir(clouds_dir);
  for (const auto& cloud : dataset.clouds) {
    write_cloud(cloud, join(clouds_dir, cloud.tag + ".ply"), nullptr, options.format);
  }
  write_manifest(dataset.manifest, join(options.output_dir, "manifest.tsv"));

  const long long total = dataset.total_points();
  const long long cracks = dataset.crack_points();
  log << "clouds=" << dataset.clouds.size() << " points=" << total
      << " crack_points=" << cracks << " crack_fraction="
      << format_g(total > 0 ? static_cast<double>(cracks) / total : 0.0) << "\n";
  return 0;
}

int run_prepare(const PrepareOptions& options, std::ostream& log) {
  log << "command=prepare\n"
      << "output_dir=" << options.output_dir << "\n"
      << "voxel_edge=" << format_g(options.voxel.edge)
      << " points_per_voxel=" << options.voxel.points_per_voxel
      << " stride=" << format_g(options.voxel.stride) << "\n"
      << "band_width=" << format_g(options.band_width)
      << " augment_copies=" << options.augment_copies << "\n"
      << "seed=" << options.seed << "\n";

  const auto violations = validate_voxel_config(options.voxel);
  if (!violations.empty()) throw data_error(violations.front());

  const auto paths = expand_globs(options.inputs);
  if (paths.empty()) throw data_error("no input clouds given");
  std::vector<PointCloud> clouds;
  for (const auto& path : paths) {
    CloudFile file = read_cloud_file(path);
    for (const auto& w : file.warnings) log << "warning: " << path << ": " << w << "\n";
    clouds.push_back(std::move(file.cloud));
  }

  SplitResult split = split_by_crack(clouds, options.seed, options.band_width,
                                     options.gt_link_distance);
  log << "instances: train="
      << std::count_if(split.manifest.begin(), split.manifest.end(),
                       [](const SplitRecord& r) { return r.partition == "train"; })
      << " val="
      << std::count_if(split.manifest.begin(), split.manifest.end(),
                       [](const SplitRecord& r) { return r.partition == "val"; })
      << " test="
      << std::count_if(split.manifest.begin(), split.manifest.end(),
                       [](const SplitRecord& r) { return r.partition == "test"; })
      << "\n";

  // translation augmentation applies to training clouds only
  if (options.augment_copies > 0) {
    std::vector<PointCloud> augmented;
    for (const auto& cloud : split.train) {
      for (auto& copy : translate_augment(cloud, options.augment_copies,
                                          options.augment_max_offset,
                                          hash_combine(options.seed, hash_string(cloud.tag)))) {
        augmented.push_back(std::move(copy));
      }
    }
    for (auto& cloud : augmented) split.train.push_back(std::move(cloud));
  }

  ensure_dir(options.output_dir);
  write_split_manifest(split.manifest, join(options.output_dir, "split_manifest.tsv"));

  const NormalizationStats stats = compute_stats(split.train, options.voxel.edge);
  write_stats(stats, join(options.output_dir, "stats.json"));

  const std::string clouds_dir = join(options.output_dir, "clouds");
  ensure_dir(clouds_dir);

  struct SplitJob {
    const std::vector<PointCloud>* clouds;
    const char* name;
    VoxelizationConfig config;
  };
  VoxelizationConfig test_config = options.voxel;
  test_config.stride = options.voxel.edge;  // held-out data: no overlap
  const SplitJob jobs[3] = {{&split.train, "train", options.voxel},
                            {&split.val, "val", options.voxel},
                            {&split.test, "test", test_config}};
  for (const auto& job : jobs) {
    VoxelSetFile set;
    for (const auto& cloud : *job.clouds) {
      const std::string file = "clouds/" + cloud.tag + ".ply";
      write_cloud(cloud, join(options.output_dir, file));
      voxelize_into(set, cloud, file, job.config,
                    hash_combine(options.seed, hash_string(cloud.tag)));
    }
    write_voxel_set(set, join(options.output_dir, std::string(job.name) + ".vxs"));
    log << job.name << ": clouds=" << job.clouds->size()
        << " voxels=" << set.entries.size() << "\n";
  }
  return 0;
}

int run_train(const TrainOptions& options, std::ostream& log) {
  log << "command=train\n"
      << "prepare_dir=" << options.prepare_dir << "\n"
      << "output_dir=" << options.output_dir << "\n"
      << "gamma=" << format_g(options.config.focal_gamma)
      << " alpha=" << format_g(options.config.focal_alpha)
      << " epochs=" << options.config.epochs
      << " lr=" << format_g(options.config.learning_rate)
      << " batch=" << options.config.batch_size << "\n"
      << "features=rgb:" << (options.mask.use_rgb ? 1 : 0)
      << " intensity:" << (options.mask.use_intensity ? 1 : 0) << "\n"
      << "seed=" << options.config.seed << "\n";

  const NormalizationStats stats = read_stats(join(options.prepare_dir, "stats.json"));
  const LoadedSplit train_split =
      load_split(options.prepare_dir, "train", stats, options.mask);
  const LoadedSplit val_split =
      load_split(options.prepare_dir, "val", stats, options.mask);
  if (train_split.voxels.empty() || val_split.voxels.empty()) {
    throw data_error("prepare produced no train or val voxels; check voxel size");
  }

  const DatasetStats dataset = count_voxel_labels(train_split.voxels);
  log << "train voxels=" << train_split.voxels.size()
      << " val voxels=" << val_split.voxels.size() << " pos=" << dataset.n_pos
      << " neg=" << dataset.n_neg << "\n";

  ensure_dir(options.output_dir);

  if (!options.sweep) {
    const ScorerModel initial = init_model(options.config, dataset, stats,
                                           options.mask, options.config.seed);
    auto [model, history] =
        train(initial, train_split.voxels, val_split.voxels, options.config);
    write_history(history, join(options.output_dir, "history.tsv"));
    save_model(model, join(options.output_dir, "model.bin"));
    log << "best_val_f1=" << format_g(best_f1(history)) << "\n";
    return 0;
  }

  std::string summary = "gamma\talpha\tbest_val_f1\n";
  double best = -1.0;
  for (double gamma : options.sweep_gammas) {
    for (double alpha : options.sweep_alphas) {
      TrainingConfig cell = options.config;
      cell.focal_gamma = gamma;
      cell.focal_alpha = alpha;
      const ScorerModel initial =
          init_model(cell, dataset, stats, options.mask, cell.seed);
      auto [model, history] =
          train(initial, train_split.voxels, val_split.voxels, cell);
      char name[96];
      std::snprintf(name, sizeof name, "history_g%.3g_a%.3g.tsv", gamma, alpha);
      write_history(history, join(options.output_dir, name));
      const double f1 = best_f1(history);
      char row[96];
      std::snprintf(row, sizeof row, "%.3g\t%.3g\t%.9g\n", gamma, alpha, f1);
      summary += row;
      log << "cell gamma=" << format_g(gamma) << " alpha=" << format_g(alpha)
          << " best_val_f1=" << format_g(f1) << "\n";
      if (f1 > best) {
        best = f1;
        save_model(model, join(options.output_dir, "model.bin"));
      }
    }
  }
  write_file(join(options.output_dir, "sweep_summary.tsv"), summary);
  return 0;
}

int run_detect(const DetectOptions& options, std::ostream& log) {
  log << "command=detect\n"
      << "model=" << options.model_path << "\n"
      << "output_dir=" << options.output_dir << "\n"
      << "confidence_threshold=" << format_g(options.clustering.confidence_threshold)
      << " link_distance=" << format_g(options.clustering.link_distance)
      << " min_cluster_size=" << options.clustering.min_cluster_size << "\n"
      << "seed=" << options.seed << "\n";

  const ScorerModel model = load_model(options.model_path);
  VoxelizationConfig voxel;
  voxel.edge = model.stats.voxel_edge;
  voxel.points_per_voxel = options.points_per_voxel;
  voxel.stride = options.stride > 0.0 ? options.stride : voxel.edge;

  const auto paths = expand_globs(options.inputs);
  if (paths.empty()) throw data_error("no input clouds given");

  ensure_dir(options.output_dir);
  std::string combined = "cloud\tinstances\tpoints_flagged\n";
  for (const auto& path : paths) {
    const PointCloud cloud = read_cloud(path);
    const DetectionResult result =
        detect(cloud, model, voxel, options.clustering, options.seed);
    write_cloud(cloud, join(options.output_dir, cloud.tag + "_detected.ply"),
                &result.annotations, options.format);
    write_file(join(options.output_dir, cloud.tag + "_instances.tsv"),
               instance_summary(result.instances, cloud));
    long long flagged = 0;
    for (auto label : result.annotations.predicted_label) flagged += label;
    char row[256];
    std::snprintf(row, sizeof row, "%s\t%zu\t%lld\n", cloud.tag.c_str(),
                  result.instances.size(), flagged);
    combined += row;
    log << cloud.tag << ": instances=" << result.instances.size()
        << " flagged=" << flagged << "\n";
  }
  write_file(join(options.output_dir, "detect_summary.tsv"), combined);
  return 0;
}

int run_evaluate(const EvaluateOptions& options, std::ostream& log) {
  log << "command=evaluate\n"
      << "output_dir=" << options.output_dir << "\n"
      << "link_distance=" << format_g(options.clustering.link_distance)
      << " min_cluster_size=" << options.clustering.min_cluster_size
      << " match_fraction=" << format_g(options.match.intersection_fraction) << "\n";

  const auto paths = expand_globs(options.inputs);
  if (paths.empty()) throw data_error("no input clouds given");

  std::vector<double> widths_by_instance;  // indexed by ground-truth instance id
  if (!options.manifest_path.empty()) {
    for (const auto& row : read_manifest(options.manifest_path)) {
      if (row.instance_id >= static_cast<int>(widths_by_instance.size())) {
        widths_by_instance.resize(row.instance_id + 1, -1.0);
      }
      widths_by_instance[row.instance_id] = row.width_max;
    }
  }

  struct LoadedCloud {
    PointCloud cloud;
    AnnotationLayer annotations;
    std::vector<CrackInstance> real;
    std::vector<double> real_widths;
  };
  std::vector<LoadedCloud> loaded;
  for (const auto& path : paths) {
    CloudFile file = read_cloud_file(path);
    if (!file.annotations) {
      throw data_error(path + " carries no annotations; run detect first");
    }
    LoadedCloud lc;
    lc.cloud = std::move(file.cloud);
    lc.annotations = std::move(*file.annotations);
    lc.real = ground_truth_instances(lc.cloud, options.clustering.link_distance);
    for (const auto& inst : lc.real) {
      lc.real_widths.push_back(inst.id < static_cast<int>(widths_by_instance.size())
                                   ? widths_by_instance[inst.id]
                                   : -1.0);
    }
    loaded.push_back(std::move(lc));
  }

  ensure_dir(options.output_dir);

  // metrics at the stored detection output
  std::vector<std::uint8_t> all_pred, all_true;
  CrackwiseTotals stored;
  for (const auto& lc : loaded) {
    for (std::size_t i = 0; i < lc.cloud.size(); ++i) {
      all_pred.push_back(lc.annotations.predicted_label[i]);
      all_true.push_back(lc.cloud.points[i].label);
    }
    const auto pred = instances_from_annotations(lc.cloud, lc.annotations);
    const auto table = match_instances(pred, lc.real, options.match);
    stored.add(table, lc.real, static_cast<long long>(pred.size()), &lc.real_widths);
  }
  const PointwiseScores stored_points = pointwise(all_pred, all_true);

  char buf[700];
  std::snprintf(buf, sizeof buf,
                "stored detection output\n"
                "points: tp=%lld fp=%lld tn=%lld fn=%lld\n"
                "precision   %.6g\nrecall      %.6g\nspecificity %.6g\nf1          %.6g\n"
                "cr_det      %.6g   (%lld real instances)\n"
                "cr_con      %.6g\ncr_pre      %.6g   (%lld predicted instances)\n",
                stored_points.tp, stored_points.fp, stored_points.tn,
                stored_points.fn, stored_points.precision, stored_points.recall,
                stored_points.specificity, stored_points.f1, stored.cr_det(),
                stored.real_total, stored.cr_con(), stored.cr_pre(),
                stored.pred_total);
  std::string report = buf;

  // by-size table for the stored output
  {
    std::string by_size = "instance\tpoints\tdetected\tmax_width\n";
    auto records = stored.by_size;
    std::sort(records.begin(), records.end(),
              [](const SizeRecord& a, const SizeRecord& b) {
                if (a.point_count != b.point_count) return a.point_count < b.point_count;
                return a.instance_id < b.instance_id;
              });
    for (const auto& rec : records) {
      std::snprintf(buf, sizeof buf, "%d\t%lld\t%d\t%.6g\n", rec.instance_id,
                    rec.point_count, rec.detected ? 1 : 0, rec.max_width);
      by_size += buf;
    }
    const SizeSummary summary = summarize_by_size(records);
    std::snprintf(buf, sizeof buf,
                  "# <=500 points: %lld/%lld detected (%.6g); >500 points: %lld/%lld "
                  "detected (%.6g)\n",
                  summary.small_detected, summary.small_total, summary.small_rate,
                  summary.large_detected, summary.large_total, summary.large_rate);
    by_size += buf;
    write_file(join(options.output_dir, "by_size.tsv"), by_size);
  }

  // re-thresholded comparison rows
  std::string compare = report_table_header();
  std::vector<double> thresholds = options.compare_thresholds;
  if (thresholds.empty()) {
    thresholds.push_back(options.clustering.confidence_threshold);
  }
  for (double threshold : thresholds) {
    CrackwiseTotals totals;
    std::vector<std::uint8_t> pred_labels, true_labels;
    for (const auto& lc : loaded) {
      const auto candidates = threshold_points(lc.annotations, threshold);
      const auto clusters =
          cluster(lc.cloud, candidates, options.clustering.link_distance);
      const auto instances =
          filter_clusters(clusters, lc.cloud, options.clustering.min_cluster_size);
      std::vector<std::uint8_t> pred(lc.cloud.size(), 0);
      for (const auto& inst : instances) {
        for (std::uint32_t id : inst.member_ids) pred[id] = 1;
      }
      for (std::size_t i = 0; i < lc.cloud.size(); ++i) {
        pred_labels.push_back(pred[i]);
        true_labels.push_back(lc.cloud.points[i].label);
      }
      const auto table = match_instances(instances, lc.real, options.match);
      totals.add(table, lc.real, static_cast<long long>(instances.size()), nullptr);
    }
    const PointwiseScores points = pointwise(pred_labels, true_labels);
    std::snprintf(buf, sizeof buf,
                  "%.6g\t%.6g\t%d\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%lld\t%lld\n",
                  threshold, options.clustering.link_distance,
                  options.clustering.min_cluster_size, points.precision,
                  points.recall, points.specificity, points.f1, totals.cr_det(),
                  totals.cr_con(), totals.cr_pre(), totals.real_total,
                  totals.pred_total);
    compare += buf;
  }
  write_file(join(options.output_dir, "compare.tsv"), compare);

  // point-wise curve over raw confidences
  if (!options.sweep_thresholds.empty()) {
    std::vector<AnnotationLayer> layers;
    std::vector<std::vector<std::uint8_t>> truths;
    for (const auto& lc : loaded) {
      layers.push_back(lc.annotations);
      std::vector<std::uint8_t> t;
      for (const auto& p : lc.cloud.points) t.push_back(p.label);
      truths.push_back(std::move(t));
    }
    std::string sweep = "threshold\tprecision\trecall\tspecificity\tf1\n";
    for (const auto& pt : threshold_sweep(layers, truths, options.sweep_thresholds)) {
      std::snprintf(buf, sizeof buf, "%.6g\t%.6g\t%.6g\t%.6g\t%.6g\n", pt.threshold,
                    pt.precision, pt.recall, pt.specificity, pt.f1);
      sweep += buf;
    }
    write_file(join(options.output_dir, "sweep.tsv"), sweep);
  }

  write_file(join(options.output_dir, "report.txt"), report);
  log << report;
  return 0;
}

int run_export_viz(const ExportVizOptions& options, std::ostream& log) {
  log << "command=export-viz\n"
      << "output_dir=" << options.output_dir << "\n";
  const auto paths = expand_globs(options.inputs);
  if (paths.empty()) throw data_error("no input clouds given");
  ensure_dir(options.output_dir);
  for (const auto& path : paths) {
    CloudFile file = read_cloud_file(path);
    if (!file.annotations) {
      throw data_error(path + " carries no annotations; run detect first");
    }
    const PointCloud colored =
        confusion_colored(file.cloud, file.annotations->predicted_label);
    write_cloud(colored, join(options.output_dir, file.cloud.tag + "_viz.ply"),
                &*file.annotations, options.format);
    log << file.cloud.tag << ": written\n";
  }
  return 0;
}

}  // namespace ptcrack
