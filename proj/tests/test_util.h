#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rqi/image/image.h"
#include "rqi/image/io.h"
#include "rqi/image/ops.h"
#include "rqi/util/rng.h"

namespace rqi::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rqi_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ImagePlane random_plane(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 255.0) {
  SplitMix64 rng(seed);
  ImagePlane p(w, h);
  for (double& v : p.data()) v = lo + (hi - lo) * rng.uniform();
  return p;
}

inline ImagePlane noise_plane(int w, int h, std::uint64_t seed, double mean, double sigma) {
  SplitMix64 rng(seed);
  ImagePlane p(w, h);
  for (double& v : p.data()) v = mean + sigma * rng.normal();
  return p;
}

inline std::filesystem::path corpus_dir() { return std::filesystem::path(RQI_DATA_DIR) / "corpus"; }

// The bundled 30-image corpus, in file-name order.
inline std::vector<ImageBuffer> corpus_images() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ImageBuffer> out;
  for (const auto& f : files) out.push_back(load_image(f));
  return out;
}

inline std::vector<ImagePlane> corpus_luma() {
  std::vector<ImagePlane> out;
  for (const auto& img : corpus_images()) out.push_back(to_luma(img));
  return out;
}

}  // namespace rqi::testing
