#include "ptcrack/cloud_io.hpp"

#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace ptcrack {

namespace {

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8:
      return 1;
    case Scalar::i16:
    case Scalar::u16:
      return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32:
      return 4;
    case Scalar::f64:
      return 8;
  }
  return 0;
}

bool parse_scalar_type(const std::string& word, Scalar& out) {
  if (word == "char" || word == "int8") out = Scalar::i8;
  else if (word == "uchar" || word == "uint8") out = Scalar::u8;
  else if (word == "short" || word == "int16") out = Scalar::i16;
  else if (word == "ushort" || word == "uint16") out = Scalar::u16;
  else if (word == "int" || word == "int32") out = Scalar::i32;
  else if (word == "uint" || word == "uint32") out = Scalar::u32;
  else if (word == "float" || word == "float32") out = Scalar::f32;
  else if (word == "double" || word == "float64") out = Scalar::f64;
  else return false;
  return true;
}

// Fields a vertex property can feed. Unknown names are skipped with a warning.
enum class Target {
  x, y, z, red, green, blue, intensity, label,
  gt_instance, confidence, pred_label, cluster_id, skip
};

Target target_for(const std::string& name) {
  if (name == "x") return Target::x;
  if (name == "y") return Target::y;
  if (name == "z") return Target::z;
  if (name == "red") return Target::red;
  if (name == "green") return Target::green;
  if (name == "blue") return Target::blue;
  if (name == "intensity") return Target::intensity;
  if (name == "label") return Target::label;
  if (name == "gt_instance") return Target::gt_instance;
  if (name == "confidence") return Target::confidence;
  if (name == "pred_label") return Target::pred_label;
  if (name == "cluster_id") return Target::cluster_id;
  return Target::skip;
}

struct Property {
  Scalar type;
  Target target;
  std::string name;
};

[[noreturn]] void header_error(const std::string& path, const std::string& line) {
  throw data_error("malformed PLY header in " + path + ": \"" + line + "\"");
}

double decode_le(const unsigned char* p, Scalar type) {
  auto u16 = [&] { return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8; };
  auto u32 = [&] {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
           std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  };
  auto u64 = [&] {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
    return v;
  };
  switch (type) {
    case Scalar::i8: return static_cast<double>(static_cast<std::int8_t>(p[0]));
    case Scalar::u8: return static_cast<double>(p[0]);
    case Scalar::i16: return static_cast<double>(static_cast<std::int16_t>(u16()));
    case Scalar::u16: return static_cast<double>(u16());
    case Scalar::i32: return static_cast<double>(static_cast<std::int32_t>(u32()));
    case Scalar::u32: return static_cast<double>(u32());
    case Scalar::f32: {
      std::uint32_t bits = u32();
      float f;
      std::memcpy(&f, &bits, 4);
      return f;
    }
    case Scalar::f64: {
      std::uint64_t bits = u64();
      double d;
      std::memcpy(&d, &bits, 8);
      return d;
    }
  }
  return 0.0;
}

// Float properties must survive text round trips bit-exactly; %.9g prints
// enough digits for that, strtof parses straight to single precision.
double parse_ascii_value(const char*& cursor, Scalar type, const std::string& path,
                         std::size_t vertex) {
  char* end = nullptr;
  double v;
  if (type == Scalar::f32) {
    v = strtof(cursor, &end);
  } else {
    v = strtod(cursor, &end);
  }
  if (end == cursor) {
    throw data_error(path + ": truncated vertex record at index " +
                     std::to_string(vertex));
  }
  cursor = end;
  return v;
}

void store_value(LabeledPoint& pt, AnnotationLayer& ann, bool& saw_annotation,
                 std::size_t index, Target target, double v) {
  switch (target) {
    case Target::x: pt.x = static_cast<float>(v); break;
    case Target::y: pt.y = static_cast<float>(v); break;
    case Target::z: pt.z = static_cast<float>(v); break;
    case Target::red: pt.r = static_cast<std::uint8_t>(v); break;
    case Target::green: pt.g = static_cast<std::uint8_t>(v); break;
    case Target::blue: pt.b = static_cast<std::uint8_t>(v); break;
    case Target::intensity: pt.intensity = static_cast<float>(v); break;
    case Target::label: pt.label = v != 0.0 ? 1 : 0; break;
    case Target::gt_instance: pt.gt_instance = static_cast<std::int32_t>(v); break;
    case Target::confidence:
      ann.confidence[index] = static_cast<float>(v);
      saw_annotation = true;
      break;
    case Target::pred_label:
      ann.predicted_label[index] = v != 0.0 ? 1 : 0;
      saw_annotation = true;
      break;
    case Target::cluster_id:
      ann.cluster_id[index] = static_cast<std::int32_t>(v);
      saw_annotation = true;
      break;
    case Target::skip: break;
  }
}

std::string default_tag(const std::string& path) {
  const auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
  return base;
}

void append_le(std::string& out, std::uint64_t bits, std::size_t bytes) {
  for (std::size_t i = 0; i < bytes; ++i) {
    out.push_back(static_cast<char>(bits >> (8 * i) & 0xff));
  }
}

void append_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_le(out, bits, 4);
}

void append_float_text(std::string& out, float v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  out += buf;
}

}  // namespace

CloudFile read_cloud_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);

  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) header_error(path, "<unexpected end of header>");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") header_error(path, line);

  PlyFormat format = PlyFormat::ascii;
  bool have_format = false;
  std::size_t vertex_count = 0;
  bool have_vertex = false;
  std::vector<Property> props;
  CloudFile result;

  for (;;) {
    next_line();
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") format = PlyFormat::ascii;
      else if (fmt == "binary_little_endian") format = PlyFormat::binary_little_endian;
      else header_error(path, line);
      if (version != "1.0") header_error(path, line);
      have_format = true;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      if (!(ls >> name >> count)) header_error(path, line);
      if (name != "vertex" || have_vertex) header_error(path, line);
      vertex_count = count;
      have_vertex = true;
    } else if (word == "property") {
      if (!have_vertex) header_error(path, line);
      std::string type_word, name;
      if (!(ls >> type_word >> name)) header_error(path, line);
      if (type_word == "list") header_error(path, line);
      Scalar type;
      if (!parse_scalar_type(type_word, type)) header_error(path, line);
      const Target target = target_for(name);
      if (target == Target::skip) {
        result.warnings.push_back("ignoring unknown vertex property '" + name + "'");
      }
      props.push_back({type, target, name});
    } else {
      header_error(path, line);
    }
  }
  if (!have_format || !have_vertex) header_error(path, "<missing format or element line>");

  auto has_target = [&](Target t) {
    return std::any_of(props.begin(), props.end(),
                       [&](const Property& p) { return p.target == t; });
  };
  if (!has_target(Target::x) || !has_target(Target::y) || !has_target(Target::z)) {
    header_error(path, "<vertex element lacks x/y/z properties>");
  }
  for (Target t : {Target::intensity, Target::label}) {
    if (!has_target(t)) {
      result.warnings.push_back(std::string("property '") +
                                (t == Target::intensity ? "intensity" : "label") +
                                "' missing; defaulting to 0");
    }
  }

  result.cloud.tag = default_tag(path);
  result.cloud.points.resize(vertex_count);
  AnnotationLayer ann;
  ann.resize(vertex_count);
  bool saw_annotation = false;

  if (format == PlyFormat::ascii) {
    std::string record;
    for (std::size_t i = 0; i < vertex_count; ++i) {
      if (!std::getline(in, record)) {
        throw data_error(path + ": vertex records end early at index " +
                         std::to_string(i));
      }
      const char* cursor = record.c_str();
      for (const Property& p : props) {
        const double v = parse_ascii_value(cursor, p.type, path, i);
        store_value(result.cloud.points[i], ann, saw_annotation, i, p.target, v);
      }
    }
  } else {
    std::size_t record_size = 0;
    for (const Property& p : props) record_size += scalar_size(p.type);
    std::vector<unsigned char> record(record_size);
    for (std::size_t i = 0; i < vertex_count; ++i) {
      if (!in.read(reinterpret_cast<char*>(record.data()),
                   static_cast<std::streamsize>(record_size))) {
        throw data_error(path + ": vertex records end early at index " +
                         std::to_string(i));
      }
      std::size_t offset = 0;
      for (const Property& p : props) {
        const double v = decode_le(record.data() + offset, p.type);
        offset += scalar_size(p.type);
        store_value(result.cloud.points[i], ann, saw_annotation, i, p.target, v);
      }
    }
  }

  for (std::size_t i = 0; i < vertex_count; ++i) {
    LabeledPoint& pt = result.cloud.points[i];
    pt.id = static_cast<std::uint32_t>(i);
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z)) {
      throw data_error(path + ": non-finite coordinate at vertex " +
                       std::to_string(i));
    }
  }
  if (saw_annotation) result.annotations = std::move(ann);
  return result;
}

PointCloud read_cloud(const std::string& path) {
  return read_cloud_file(path).cloud;
}

void write_cloud(const PointCloud& cloud, const std::string& path,
                 const AnnotationLayer* annotations, PlyFormat format) {
  if (annotations && annotations->size() != cloud.size()) {
    throw data_error("annotation layer length " +
                     std::to_string(annotations->size()) +
                     " does not match cloud size " + std::to_string(cloud.size()));
  }
  const bool with_gt = std::any_of(
      cloud.points.begin(), cloud.points.end(),
      [](const LabeledPoint& p) { return p.gt_instance != 0; });

  std::string out;
  out.reserve(cloud.size() * 48 + 512);
  out += "ply\n";
  out += format == PlyFormat::ascii ? "format ascii 1.0\n"
                                    : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out +=
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      "property float intensity\nproperty uchar label\n";
  if (with_gt) out += "property int gt_instance\n";
  if (annotations) {
    out +=
        "property float confidence\nproperty uchar pred_label\n"
        "property int cluster_id\n";
  }
  out += "end_header\n";

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const LabeledPoint& p = cloud.points[i];
    if (format == PlyFormat::ascii) {
      append_float_text(out, p.x);
      out += ' ';
      append_float_text(out, p.y);
      out += ' ';
      append_float_text(out, p.z);
      out += ' ';
      out += std::to_string(p.r) + ' ' + std::to_string(p.g) + ' ' +
             std::to_string(p.b) + ' ';
      append_float_text(out, p.intensity);
      out += ' ';
      out += std::to_string(p.label);
      if (with_gt) out += ' ' + std::to_string(p.gt_instance);
      if (annotations) {
        out += ' ';
        append_float_text(out, annotations->confidence[i]);
        out += ' ' + std::to_string(annotations->predicted_label[i]) + ' ' +
               std::to_string(annotations->cluster_id[i]);
      }
      out += '\n';
    } else {
      append_f32(out, p.x);
      append_f32(out, p.y);
      append_f32(out, p.z);
      out.push_back(static_cast<char>(p.r));
      out.push_back(static_cast<char>(p.g));
      out.push_back(static_cast<char>(p.b));
      append_f32(out, p.intensity);
      out.push_back(static_cast<char>(p.label));
      if (with_gt) {
        append_le(out, static_cast<std::uint32_t>(p.gt_instance), 4);
      }
      if (annotations) {
        append_f32(out, annotations->confidence[i]);
        out.push_back(static_cast<char>(annotations->predicted_label[i]));
        append_le(out, static_cast<std::uint32_t>(annotations->cluster_id[i]), 4);
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw data_error("write failed for " + path);
}

PointCloud confusion_colored(const PointCloud& cloud,
                             const std::vector<std::uint8_t>& predicted) {
  if (predicted.size() != cloud.size()) {
    throw data_error("predicted label vector does not match cloud size");
  }
  PointCloud out = cloud;
  for (std::size_t i = 0; i < out.size(); ++i) {
    LabeledPoint& p = out.points[i];
    const bool truth = cloud.points[i].label != 0;
    const bool pred = predicted[i] != 0;
    if (truth && pred) {  // true positive: blue
      p.r = 0; p.g = 0; p.b = 255;
    } else if (truth && !pred) {  // false negative: red
      p.r = 255; p.g = 0; p.b = 0;
    } else if (!truth && pred) {  // false positive: cyan
      p.r = 0; p.g = 255; p.b = 255;
    }
  }
  return out;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& pattern : patterns) {
    const bool has_magic = pattern.find_first_of("*?[") != std::string::npos;
    if (!has_magic) {
      if (seen.insert(pattern).second) out.push_back(pattern);
      continue;
    }
    glob_t g;
    std::memset(&g, 0, sizeof g);
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == GLOB_NOMATCH) {
      globfree(&g);
      throw data_error("no files match pattern " + pattern);
    }
    if (rc != 0) {
      globfree(&g);
      throw data_error("glob failed for pattern " + pattern);
    }
    for (std::size_t i = 0; i < g.gl_pathc; ++i) {
      std::string p = g.gl_pathv[i];
      if (seen.insert(p).second) out.push_back(std::move(p));
    }
    globfree(&g);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ptcrack
