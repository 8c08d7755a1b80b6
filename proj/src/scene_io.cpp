#include "masklift/scene_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "masklift/png_io.hpp"

namespace masklift {

namespace {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double value) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

double parse_real(const std::string& token, const std::string& context) {
  double value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    fail(context + ": cannot parse number '" + token + "'");
  }
  return value;
}

long long parse_int(const std::string& token, const std::string& context) {
  long long value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    fail(context + ": cannot parse integer '" + token + "'");
  }
  return value;
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream stream(line);
  std::string token;
  while (stream >> token) {
    tokens.push_back(token);
  }
  return tokens;
}

std::ofstream open_out(const std::filesystem::path& path,
                       const std::string& who) {
  std::ofstream out(path);
  if (!out) {
    fail(who + ": cannot open " + path.string() + " for writing");
  }
  return out;
}

std::ifstream open_in(const std::filesystem::path& path,
                      const std::string& who) {
  std::ifstream in(path);
  if (!in) {
    fail(who + ": cannot open " + path.string());
  }
  return in;
}

}  // namespace

void save_labels(const LabelArray& labels, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, "save_labels");
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    out << labels[i] << '\n';
  }
  if (!out) {
    fail("save_labels: write to " + path.string() + " failed");
  }
}

LabelArray load_labels(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, "load_labels");
  std::vector<int> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const long long value = parse_int(
        line, "load_labels: " + path.string() + " line " +
                  std::to_string(values.size() + 1));
    values.push_back(static_cast<int>(value));
  }
  LabelArray labels(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    labels[static_cast<Eigen::Index>(i)] = values[i];
  }
  return labels;
}

void save_cloud_ply(const PointCloud& cloud,
                    const std::filesystem::path& path) {
  validate_cloud(cloud, "save_cloud_ply: " + path.string());
  std::ofstream out = open_out(path, "save_cloud_ply");
  const bool with_colors = cloud.colors.has_value();
  out << "ply\n"
      << "format ascii 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\n"
      << "property double y\n"
      << "property double z\n";
  if (with_colors) {
    out << "property double red\n"
        << "property double green\n"
        << "property double blue\n";
  }
  out << "end_header\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    out << format_real(cloud.positions(i, 0)) << ' '
        << format_real(cloud.positions(i, 1)) << ' '
        << format_real(cloud.positions(i, 2));
    if (with_colors) {
      out << ' ' << format_real((*cloud.colors)(i, 0)) << ' '
          << format_real((*cloud.colors)(i, 1)) << ' '
          << format_real((*cloud.colors)(i, 2));
    }
    out << '\n';
  }
  if (!out) {
    fail("save_cloud_ply: write to " + path.string() + " failed");
  }
}

PointCloud load_cloud_ply(const std::filesystem::path& path) {
  const std::string context = "load_cloud_ply: " + path.string();
  std::ifstream in = open_in(path, "load_cloud_ply");
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    fail(context + ": missing 'ply' magic line");
  }
  if (!std::getline(in, line) || line != "format ascii 1.0") {
    fail(context + ": only 'format ascii 1.0' is supported");
  }

  Eigen::Index vertex_count = -1;
  struct Property {
    std::string name;
    bool is_uchar = false;
  };
  std::vector<Property> properties;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      break;
    }
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.empty() || tokens[0] == "comment") {
      continue;
    }
    if (tokens[0] == "element") {
      if (tokens.size() != 3 || tokens[1] != "vertex") {
        fail(context + ": only a single vertex element is supported, got '" +
             line + "'");
      }
      vertex_count =
          static_cast<Eigen::Index>(parse_int(tokens[2], context));
      in_vertex_element = true;
      continue;
    }
    if (tokens[0] == "property") {
      if (!in_vertex_element) {
        fail(context + ": property before any element");
      }
      if (tokens.size() != 3 || tokens[1] == "list") {
        fail(context + ": unsupported property '" + line + "'");
      }
      const std::string& type = tokens[1];
      const bool is_uchar = (type == "uchar" || type == "uint8");
      if (!is_uchar && type != "float" && type != "double" &&
          type != "float32" && type != "float64") {
        fail(context + ": unsupported property type '" + type + "'");
      }
      properties.push_back({tokens[2], is_uchar});
      continue;
    }
    fail(context + ": unrecognized header line '" + line + "'");
  }
  if (vertex_count < 0) {
    fail(context + ": header declares no vertex element");
  }

  int x_col = -1, y_col = -1, z_col = -1;
  int r_col = -1, g_col = -1, b_col = -1;
  for (std::size_t p = 0; p < properties.size(); ++p) {
    const std::string& name = properties[p].name;
    const int col = static_cast<int>(p);
    if (name == "x") x_col = col;
    else if (name == "y") y_col = col;
    else if (name == "z") z_col = col;
    else if (name == "red") r_col = col;
    else if (name == "green") g_col = col;
    else if (name == "blue") b_col = col;
  }
  if (x_col < 0 || y_col < 0 || z_col < 0) {
    fail(context + ": vertex element lacks x/y/z properties");
  }
  const int color_cols = (r_col >= 0) + (g_col >= 0) + (b_col >= 0);
  if (color_cols != 0 && color_cols != 3) {
    fail(context + ": red/green/blue must appear together or not at all");
  }

  PointCloud cloud;
  cloud.positions.resize(vertex_count, 3);
  if (color_cols == 3) {
    cloud.colors.emplace(vertex_count, 3);
  }
  for (Eigen::Index i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) {
      fail(context + ": expected " + std::to_string(vertex_count) +
           " vertices, file ends at vertex " + std::to_string(i));
    }
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.size() != properties.size()) {
      fail(context + ": vertex " + std::to_string(i) + " has " +
           std::to_string(tokens.size()) + " values, expected " +
           std::to_string(properties.size()));
    }
    const std::string vertex_context =
        context + ": vertex " + std::to_string(i);
    const auto value_at = [&](int col) {
      double value = parse_real(tokens[static_cast<std::size_t>(col)],
                                vertex_context);
      if (properties[static_cast<std::size_t>(col)].is_uchar) {
        value /= 255.0;
      }
      return value;
    };
    cloud.positions(i, 0) = value_at(x_col);
    cloud.positions(i, 1) = value_at(y_col);
    cloud.positions(i, 2) = value_at(z_col);
    if (color_cols == 3) {
      (*cloud.colors)(i, 0) = value_at(r_col);
      (*cloud.colors)(i, 1) = value_at(g_col);
      (*cloud.colors)(i, 2) = value_at(b_col);
    }
  }
  return cloud;
}

void save_camera(const CameraIntrinsics& intrinsics, const CameraPose& pose,
                 const std::filesystem::path& path) {
  validate_intrinsics(intrinsics, "save_camera: " + path.string());
  validate_pose(pose, "save_camera: " + path.string());
  std::ofstream out = open_out(path, "save_camera");
  Eigen::Matrix4d extrinsic = Eigen::Matrix4d::Identity();
  extrinsic.topLeftCorner<3, 3>() = pose.rotation;
  extrinsic.topRightCorner<3, 1>() = pose.translation;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out << format_real(extrinsic(r, c)) << (c == 3 ? '\n' : ' ');
    }
  }
  out << format_real(intrinsics.fx) << ' ' << format_real(intrinsics.fy)
      << ' ' << format_real(intrinsics.cx) << ' ' << format_real(intrinsics.cy)
      << ' ' << intrinsics.width << ' ' << intrinsics.height << '\n';
  if (!out) {
    fail("save_camera: write to " + path.string() + " failed");
  }
}

void load_camera(const std::filesystem::path& path,
                 CameraIntrinsics& intrinsics, CameraPose& pose) {
  const std::string context = "load_camera: " + path.string();
  std::ifstream in = open_in(path, "load_camera");
  Eigen::Matrix4d extrinsic;
  std::string line;
  for (int r = 0; r < 4; ++r) {
    if (!std::getline(in, line)) {
      fail(context + ": truncated at extrinsic row " + std::to_string(r));
    }
    const std::vector<std::string> tokens = split_tokens(line);
    if (tokens.size() != 4) {
      fail(context + ": extrinsic row " + std::to_string(r) + " has " +
           std::to_string(tokens.size()) + " values, expected 4");
    }
    for (int c = 0; c < 4; ++c) {
      extrinsic(r, c) =
          parse_real(tokens[static_cast<std::size_t>(c)], context);
    }
  }
  const Eigen::RowVector4d bottom = extrinsic.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
    fail(context + ": extrinsic bottom row is not 0 0 0 1");
  }
  pose.rotation = extrinsic.topLeftCorner<3, 3>();
  pose.translation = extrinsic.topRightCorner<3, 1>();

  if (!std::getline(in, line)) {
    fail(context + ": missing intrinsics line");
  }
  const std::vector<std::string> tokens = split_tokens(line);
  if (tokens.size() != 6) {
    fail(context + ": intrinsics line has " + std::to_string(tokens.size()) +
         " values, expected 'fx fy cx cy W H'");
  }
  intrinsics.fx = parse_real(tokens[0], context);
  intrinsics.fy = parse_real(tokens[1], context);
  intrinsics.cx = parse_real(tokens[2], context);
  intrinsics.cy = parse_real(tokens[3], context);
  intrinsics.width = static_cast<int>(parse_int(tokens[4], context));
  intrinsics.height = static_cast<int>(parse_int(tokens[5], context));
  validate_intrinsics(intrinsics, context);
  validate_pose(pose, context);
}

void save_depth_png(const DepthMap& depth, double depth_scale,
                    const std::filesystem::path& path) {
  validate_depth(depth, "save_depth_png: " + path.string());
  Image16 image(depth.height(), depth.width());
  for (Eigen::Index r = 0; r < depth.height(); ++r) {
    for (Eigen::Index c = 0; c < depth.width(); ++c) {
      const double meters = depth.values(r, c);
      if (meters == 0.0) {
        image(r, c) = 0;
        continue;
      }
      const long long stored = std::llround(meters * depth_scale);
      if (stored < 1 || stored > 65535) {
        fail("save_depth_png: " + path.string() + ": depth " +
             format_real(meters) + " m at pixel (" + std::to_string(c) + "," +
             std::to_string(r) + ") quantizes to " + std::to_string(stored) +
             ", outside [1, 65535]");
      }
      image(r, c) = static_cast<std::uint16_t>(stored);
    }
  }
  save_png16(image, path);
}

DepthMap load_depth_png(const std::filesystem::path& path,
                        double depth_scale) {
  const Image16 image = load_png16(path);
  DepthMap depth;
  depth.values.resize(image.rows(), image.cols());
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      depth.values(r, c) = static_cast<double>(image(r, c)) / depth_scale;
    }
  }
  return depth;
}

void save_mask_png(const MaskSet2D& masks, const std::filesystem::path& path) {
  validate_mask2d(masks, "save_mask_png: " + path.string());
  if (masks.num_masks > 65535) {
    fail("save_mask_png: " + path.string() + ": " +
         std::to_string(masks.num_masks) + " masks exceed the 16-bit range");
  }
  Image16 image(masks.height(), masks.width());
  for (Eigen::Index r = 0; r < masks.height(); ++r) {
    for (Eigen::Index c = 0; c < masks.width(); ++c) {
      image(r, c) = static_cast<std::uint16_t>(masks.ids(r, c));
    }
  }
  save_png16(image, path);
}

MaskSet2D load_mask_png(const std::filesystem::path& path) {
  const Image16 image = load_png16(path);
  MaskSet2D masks;
  masks.ids.resize(image.rows(), image.cols());
  int max_id = 0;
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const int id = image(r, c);
      masks.ids(r, c) = id;
      max_id = std::max(max_id, id);
    }
  }
  masks.num_masks = max_id;
  validate_mask2d(masks, "load_mask_png: " + path.string());
  return masks;
}

void save_scene(const SceneBundle& scene, const std::filesystem::path& dir) {
  validate_scene(scene, "save_scene: " + dir.string());
  std::filesystem::create_directories(dir / "views");

  nlohmann::json meta;
  meta["num_classes"] = scene.meta.num_classes;
  meta["depth_scale"] = scene.meta.depth_scale;
  meta["delta_depth"] = scene.meta.delta_depth;
  std::ofstream meta_out = open_out(dir / "meta.json", "save_scene");
  meta_out << meta.dump(2) << "\n";

  save_cloud_ply(scene.cloud, dir / "cloud.ply");
  save_labels(scene.sparse, dir / "sparse.labels");
  if (scene.gt.has_value()) {
    save_labels(*scene.gt, dir / "gt.labels");
  }
  for (const ViewObservation& view : scene.views) {
    const std::filesystem::path base = dir / "views" / view.name;
    save_camera(view.intrinsics, view.pose,
                base.string() + ".cam");
    save_depth_png(view.depth, scene.meta.depth_scale,
                   base.string() + ".depth.png");
    save_mask_png(view.mask2d, base.string() + ".mask.png");
  }
}

SceneBundle load_scene(const std::filesystem::path& dir) {
  const std::string context = "load_scene: " + dir.string();
  if (!std::filesystem::is_directory(dir)) {
    fail(context + ": not a directory");
  }

  const std::filesystem::path meta_path = dir / "meta.json";
  std::ifstream meta_in = open_in(meta_path, "load_scene");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    fail(context + ": invalid meta.json: " + e.what());
  }
  SceneBundle scene;
  for (const char* key : {"num_classes", "depth_scale", "delta_depth"}) {
    if (!meta.contains(key)) {
      fail(context + ": meta.json lacks '" + std::string(key) + "'");
    }
  }
  scene.meta.num_classes = meta["num_classes"].get<int>();
  scene.meta.depth_scale = meta["depth_scale"].get<double>();
  scene.meta.delta_depth = meta["delta_depth"].get<double>();

  scene.cloud = load_cloud_ply(dir / "cloud.ply");
  scene.sparse = load_labels(dir / "sparse.labels");
  if (std::filesystem::exists(dir / "gt.labels")) {
    scene.gt = load_labels(dir / "gt.labels");
  }

  const std::filesystem::path views_dir = dir / "views";
  std::vector<std::filesystem::path> cam_files;
  if (std::filesystem::is_directory(views_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(views_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".cam") {
        cam_files.push_back(entry.path());
      }
    }
  }
  std::sort(cam_files.begin(), cam_files.end());
  for (const std::filesystem::path& cam_path : cam_files) {
    ViewObservation view;
    view.name = cam_path.stem().string();
    load_camera(cam_path, view.intrinsics, view.pose);
    const std::filesystem::path base = views_dir / view.name;
    view.depth = load_depth_png(base.string() + ".depth.png",
                                scene.meta.depth_scale);
    view.mask2d = load_mask_png(base.string() + ".mask.png");
    scene.views.push_back(std::move(view));
  }

  validate_scene(scene, context);
  return scene;
}

}  // namespace masklift
