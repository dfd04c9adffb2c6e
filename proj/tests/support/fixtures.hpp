#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mainvc/audio/dataset.hpp"
#include "mainvc/random.hpp"
#include "mainvc/tensor/tensor.hpp"
#include "mainvc/train/trainer.hpp"

namespace mainvc::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Synthetic corpus on disk plus its manifest, mel cache and statistics.
struct SyntheticData {
  std::filesystem::path root;
  audio::DatasetManifest manifest;
  audio::MelCache cache;
  audio::NormStats stats;
};

SyntheticData make_synthetic_data(const std::filesystem::path& root, std::size_t speakers,
                                  std::size_t utterances, std::uint64_t seed = 1,
                                  double seconds = 3.0);

Tensor random_tensor(Shape shape, std::uint64_t seed, double sigma = 1.0,
                     bool requires_grad = false);

std::vector<double> to_doubles(const Tensor& t);

/// Direct-summation reference for conv1d on [C_in x T] input.
std::vector<double> naive_conv1d(const std::vector<double>& x, std::size_t cin, std::size_t t,
                                 const std::vector<double>& w, std::size_t cout, std::size_t k,
                                 const std::vector<double>& bias, std::size_t stride,
                                 std::size_t dilation, std::size_t padding);

/// Desk-scale training configuration shared by the smoke and acceptance runs.
TrainConfig desk_train_config(std::uint64_t seed, std::uint64_t steps);

}  // namespace mainvc::testing
