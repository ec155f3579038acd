#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "bsrt/consensus.hpp"
#include "bsrt/fed.hpp"
#include "bsrt/model.hpp"
#include "bsrt/timing.hpp"

namespace bsrt::sim {

// Full description of one simulated run.  Parsed from `key = value` lines;
// '#' starts a comment.  Every field has the stock default, so an empty
// config is the reference scenario.
struct ScenarioConfig {
  std::uint32_t num_clients = 5;
  std::uint32_t num_rsus = 3;
  std::uint32_t rounds = 15;
  std::uint32_t local_epochs = 10;

  double k_start = 0.80;
  double k_end = 0.60;

  model::EncoderConfig encoder;
  model::TrainHyper hyper;  // hyper.seed is derived per client/round from seed
  double init_scale = 0.05;

  std::string partition = "kitti";  // kitti | uniform
  std::uint32_t partition_scale_divisor = 50;
  std::uint32_t uniform_per_class = 8;
  std::uint32_t test_per_class = 50;

  std::uint64_t seed = 42;
  bool local_baseline = true;

  timing::TimingParams timing;

  std::map<std::uint32_t, fed::AttackProfile> client_attacks;
  std::map<std::uint32_t, consensus::ByzantineMode> rsu_modes;

  model::RetentionSchedule schedule() const { return {k_start, k_end, rounds}; }

  void set(const std::string& key, const std::string& value);
  void validate() const;

  static ScenarioConfig from_string(const std::string& text);
  static ScenarioConfig from_file(const std::filesystem::path& path);
};

}  // namespace bsrt::sim
