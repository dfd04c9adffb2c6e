#include "fixtures.hpp"

#include <atomic>
#include <chrono>
#include <unistd.h>

#include "mainvc/audio/synthetic.hpp"

namespace mainvc::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = std::filesystem::temp_directory_path() /
          ("mainvc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(stamp) + "_" +
           std::to_string(counter++));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

SyntheticData make_synthetic_data(const std::filesystem::path& root, std::size_t speakers,
                                  std::size_t utterances, std::uint64_t seed, double seconds) {
  SyntheticData d;
  d.root = root;
  audio::write_synthetic_corpus(root, speakers, utterances, seed, seconds);
  const audio::MelConfig mel;
  d.manifest = audio::build_manifest(root, mel);
  d.cache = audio::MelCache::compute(d.manifest, mel);
  std::vector<const audio::MelSpectrogram*> mels;
  for (const auto& [key, m] : d.cache.items()) mels.push_back(&m);
  d.stats = audio::compute_norm_stats(mels);
  return d;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double sigma, bool requires_grad) {
  Rng rng(seed);
  std::vector<Scalar> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Scalar>(sigma * rng.normal());
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

std::vector<double> to_doubles(const Tensor& t) {
  const auto d = t.data();
  return {d.begin(), d.end()};
}

std::vector<double> naive_conv1d(const std::vector<double>& x, std::size_t cin, std::size_t t,
                                 const std::vector<double>& w, std::size_t cout, std::size_t k,
                                 const std::vector<double>& bias, std::size_t stride,
                                 std::size_t dilation, std::size_t padding) {
  const long span = static_cast<long>(dilation * (k - 1) + 1);
  const long padded = static_cast<long>(t + 2 * padding);
  const std::size_t tout = static_cast<std::size_t>((padded - span) / static_cast<long>(stride) + 1);
  std::vector<double> y(cout * tout, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t j = 0; j < tout; ++j) {
      double acc = bias[o];
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t q = 0; q < k; ++q) {
          const long pos = static_cast<long>(j * stride + q * dilation) - static_cast<long>(padding);
          if (pos < 0 || pos >= static_cast<long>(t)) continue;
          acc += w[(o * cin + c) * k + q] * x[c * t + static_cast<std::size_t>(pos)];
        }
      }
      y[o * tout + j] = acc;
    }
  }
  return y;
}

TrainConfig desk_train_config(std::uint64_t seed, std::uint64_t steps) {
  TrainConfig c;
  c.seed = seed;
  c.batch_size = 4;
  c.total_steps = steps;
  c.adam.lr = 5e-4;
  c.cmi_lr = 1e-3;
  c.checkpoint_every = 0;
  c.log_every = 0;
  return c;
}

}  // namespace mainvc::testing
