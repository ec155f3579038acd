#pragma once

#include <cstdint>
#include <vector>

#include "bsrt/model.hpp"
#include "bsrt/rng.hpp"

namespace bsrt::data {

// Per-client class-count matrix.  A zero count means the class is entirely
// absent on that client; class 0 must be present everywhere.
struct PartitionSpec {
  std::uint32_t num_classes = 8;
  std::vector<std::vector<std::uint32_t>> counts;  // [client][class]

  void validate() const;
  std::vector<std::vector<std::uint32_t>> missing_classes() const;
};

// KITTI-style annotation distribution, one entirely missing class per client
// (van, truck, pedestrian, cyclist, tram), scaled down by ceil(x / divisor).
PartitionSpec kitti_missing_pattern(std::uint32_t scale_divisor = 50);

PartitionSpec uniform_pattern(std::uint32_t num_clients, std::uint32_t per_class,
                              std::uint32_t num_classes = 8);

struct PartitionResult {
  std::vector<model::Dataset> clients;
  model::Dataset test;  // balanced held-out set, test_per_class per class
};

// Synthesizes token grids per sample: a few high-norm foreground rows near a
// class prototype, the rest low-norm background noise.  Magnitude scoring
// therefore retains the class-bearing rows.  Deterministic in the seed.
PartitionResult synth_partition(const PartitionSpec& spec, const model::EncoderConfig& cfg,
                                std::uint32_t test_per_class, std::uint64_t seed);

model::Sample make_sample(const model::EncoderConfig& cfg, std::uint32_t label, Rng& rng);

}  // namespace bsrt::data
