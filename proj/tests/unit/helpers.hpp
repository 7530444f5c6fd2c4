#pragma once

#include <filesystem>
#include <string>

#include "misc/rng.hpp"
#include "misc/tensor.hpp"

namespace misc::test {

template <typename T>
BasicTensor<T> random_tensor(Rng& rng, Shape shape, double lo = -1, double hi = 1) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("misc_unit_" + tag + "_" + std::to_string(fnv1a64(tag) % 100000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace misc::test
