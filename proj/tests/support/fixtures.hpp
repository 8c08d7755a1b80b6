#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "masklift/geometry.hpp"

namespace fixtures {

inline masklift::CameraIntrinsics intrinsics(double fx, double fy, double cx,
                                             double cy, int w, int h) {
  masklift::CameraIntrinsics k;
  k.fx = fx;
  k.fy = fy;
  k.cx = cx;
  k.cy = cy;
  k.width = w;
  k.height = h;
  return k;
}

inline masklift::CameraPose identity_pose() {
  masklift::CameraPose pose;
  pose.rotation = masklift::Mat3::Identity();
  pose.translation = masklift::Vec3::Zero();
  return pose;
}

/// Self-deleting scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::string tpl =
        (std::filesystem::temp_directory_path() / (tag + ".XXXXXX")).string();
    if (!mkdtemp(tpl.data())) {
      throw std::runtime_error("mkdtemp failed for " + tpl);
    }
    path_ = tpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

/// Runs the built CLI with stdout+stderr captured. `env` is a shell prefix
/// such as "MASKLIFT_ETA=0.5 " (empty for none).
inline CliResult run_cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const std::filesystem::path capture =
      std::filesystem::temp_directory_path() /
      ("masklift_cli_out." + std::to_string(getpid()) + "." +
       std::to_string(counter++));
  const std::string command = env + std::string(MASKLIFT_CLI_PATH) + " " +
                              args + " > " + capture.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = read_file(capture);
  std::filesystem::remove(capture);
  return result;
}

}  // namespace fixtures
