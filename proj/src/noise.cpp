#include <algorithm>
#include <numeric>
#include <string>

#include "langevin/dynamics.hpp"

namespace langevin {

namespace {

std::seed_seq stream_seed(std::uint64_t seed, std::uint32_t tag) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
}

}  // namespace

SeededNoise::SeededNoise(std::uint64_t seed) {
  auto g = stream_seed(seed, 0x6761'7573u);
  auto s = stream_seed(seed, 0x7375'6273u);
  gaussian_engine_.seed(g);
  subset_engine_.seed(s);
}

void SeededNoise::gaussian(Vector& out) {
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = normal_(gaussian_engine_);
}

void SeededNoise::minibatch(std::size_t n, std::size_t batch, std::vector<std::size_t>& out) {
  if (batch == 0 || batch > n) {
    throw std::invalid_argument("batch size " + std::to_string(batch) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  if (permutation_.size() != n) {
    permutation_.resize(n);
    std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
  }
  for (std::size_t j = 0; j < batch; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, n - 1);
    std::swap(permutation_[j], permutation_[pick(subset_engine_)]);
  }
  out.assign(permutation_.begin(), permutation_.begin() + static_cast<std::ptrdiff_t>(batch));
  std::sort(out.begin(), out.end());
}

std::vector<std::size_t> sample_minibatch(std::size_t n, std::size_t batch, NoiseSource& noise) {
  std::vector<std::size_t> out;
  noise.minibatch(n, batch, out);
  return out;
}

}  // namespace langevin
