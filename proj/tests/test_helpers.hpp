#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "radon/model.hpp"

namespace helpers {

// The repo's default branch stack: 64x64 grayscale in, 128-wide features out.
inline std::vector<radon::LayerSpec> reference_layers() {
  using radon::Activation;
  using radon::LayerSpec;
  return {
      LayerSpec::conv_layer(16, 3, 1, 1, Activation::relu),
      LayerSpec::maxpool_layer(2, 2),
      LayerSpec::conv_layer(32, 3, 1, 1, Activation::relu),
      LayerSpec::maxpool_layer(2, 2),
      LayerSpec::conv_layer(64, 3, 1, 1, Activation::relu),
      LayerSpec::maxpool_layer(2, 2),
      LayerSpec::flatten_layer(),
      LayerSpec::dense_layer(128, Activation::relu),
  };
}

inline radon::InputShape reference_input() { return {1, 64, 64}; }

// Small stack for tests that train or difference: 16x16 in, 16 features out.
inline std::vector<radon::LayerSpec> small_layers() {
  using radon::Activation;
  using radon::LayerSpec;
  return {
      radon::LayerSpec::conv_layer(8, 3, 1, 1, Activation::relu),
      radon::LayerSpec::maxpool_layer(2, 2),
      radon::LayerSpec::flatten_layer(),
      radon::LayerSpec::dense_layer(16, Activation::relu),
  };
}

inline radon::InputShape small_input() { return {1, 16, 16}; }

inline radon::Tensor random_images(int n, radon::InputShape in, radon::Rng& rng) {
  std::vector<float> v(static_cast<size_t>(n) * in.channels * in.height * in.width);
  for (auto& x : v) x = 2.0f * radon::rng_unit_float(rng) - 1.0f;
  return radon::Tensor::from_data({n, in.channels, in.height, in.width}, std::move(v));
}

inline bool same_values(const radon::Tensor& a, const radon::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (size_t i = 0; i < a.numel(); ++i) {
    if (a.values()[i] != b.values()[i]) return false;
  }
  return true;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("radon_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& rel = "") const {
    return rel.empty() ? dir_.string() : (dir_ / rel).string();
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace helpers
