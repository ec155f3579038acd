#include "bsrt/data.hpp"

#include <cmath>

#include "bsrt/errors.hpp"

namespace bsrt::data {

namespace {

// KITTI training-annotation counts per client; bold zeros in the source
// distribution mark the class each client never sees.
constexpr std::uint32_t kBaseCounts[8][5] = {
    {4125, 4709, 5036, 4557, 4698},  // car
    {0, 470, 482, 481, 505},         // van
    {164, 0, 200, 199, 169},         // truck
    {592, 704, 0, 648, 676},         // pedestrian
    {18, 29, 3, 36, 21},             // person_sitting
    {311, 265, 161, 0, 218},         // cyclist
    {120, 82, 88, 86, 0},            // tram
    {108, 154, 204, 178, 171},       // misc
};

constexpr std::uint32_t kForegroundTokens = 4;
constexpr double kPrototypeNorm = 4.0;
const double kForegroundSigma = 0.5;             // variance 0.25 per dim
const double kBackgroundSigma = std::sqrt(0.05); // variance 0.05 per dim

}  // namespace

void PartitionSpec::validate() const {
  if (num_classes < 1) throw Error(ErrorCode::InvalidScenario, "partition: no classes");
  if (counts.empty()) throw Error(ErrorCode::InvalidScenario, "partition: no clients");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != num_classes)
      throw Error(ErrorCode::InvalidScenario, "partition: count row width mismatch");
    if (counts[i][0] == 0)
      throw Error(ErrorCode::InvalidScenario,
                  "partition: class 0 must be present on every client");
  }
}

std::vector<std::vector<std::uint32_t>> PartitionSpec::missing_classes() const {
  std::vector<std::vector<std::uint32_t>> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::uint32_t c = 0; c < num_classes; ++c)
      if (counts[i][c] == 0) out[i].push_back(c);
  return out;
}

PartitionSpec kitti_missing_pattern(std::uint32_t scale_divisor) {
  if (scale_divisor < 1)
    throw Error(ErrorCode::InvalidScenario, "partition: scale divisor must be >= 1");
  PartitionSpec spec;
  spec.num_classes = 8;
  spec.counts.assign(5, std::vector<std::uint32_t>(8, 0));
  for (std::uint32_t c = 0; c < 8; ++c)
    for (std::uint32_t i = 0; i < 5; ++i) {
      std::uint32_t n = kBaseCounts[c][i];
      spec.counts[i][c] = n == 0 ? 0 : (n + scale_divisor - 1) / scale_divisor;
    }
  return spec;
}

PartitionSpec uniform_pattern(std::uint32_t num_clients, std::uint32_t per_class,
                              std::uint32_t num_classes) {
  if (num_clients < 1 || per_class < 1 || num_classes < 1)
    throw Error(ErrorCode::InvalidScenario, "partition: uniform pattern needs >= 1 everywhere");
  PartitionSpec spec;
  spec.num_classes = num_classes;
  spec.counts.assign(num_clients, std::vector<std::uint32_t>(num_classes, per_class));
  return spec;
}

model::Sample make_sample(const model::EncoderConfig& cfg, std::uint32_t label, Rng& rng) {
  cfg.validate();
  if (label >= cfg.num_classes)
    throw Error(ErrorCode::InvalidArgument, "make_sample: label out of range");
  if (cfg.token_dim < cfg.num_classes)
    throw Error(ErrorCode::InvalidArgument, "make_sample: token_dim must be >= num_classes");

  const std::uint32_t n = cfg.num_tokens, d = cfg.token_dim;
  const std::uint32_t block = d / cfg.num_classes;
  const double proto_entry = kPrototypeNorm / std::sqrt(static_cast<double>(block));
  const std::uint32_t fg = std::min(kForegroundTokens, n);

  model::Sample s;
  s.label = label;
  s.tokens.assign(static_cast<std::size_t>(n) * d, 0.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    double* row = s.tokens.data() + static_cast<std::size_t>(i) * d;
    if (i < fg) {
      for (std::uint32_t j = 0; j < d; ++j) row[j] = kForegroundSigma * rng.next_gaussian();
      for (std::uint32_t j = label * block; j < (label + 1) * block; ++j) row[j] += proto_entry;
    } else {
      for (std::uint32_t j = 0; j < d; ++j) row[j] = kBackgroundSigma * rng.next_gaussian();
    }
  }
  return s;
}

PartitionResult synth_partition(const PartitionSpec& spec, const model::EncoderConfig& cfg,
                                std::uint32_t test_per_class, std::uint64_t seed) {
  spec.validate();
  cfg.validate();
  if (spec.num_classes != cfg.num_classes)
    throw Error(ErrorCode::InvalidScenario, "partition: class count does not match encoder");
  if (test_per_class < 1)
    throw Error(ErrorCode::InvalidScenario, "partition: test_per_class must be >= 1");

  PartitionResult out;
  out.clients.resize(spec.counts.size());
  for (std::size_t i = 0; i < spec.counts.size(); ++i) {
    Rng rng(derive_seed(seed, "client-data", i));
    for (std::uint32_t c = 0; c < spec.num_classes; ++c)
      for (std::uint32_t k = 0; k < spec.counts[i][c]; ++k)
        out.clients[i].samples.push_back(make_sample(cfg, c, rng));
  }

  Rng rng(derive_seed(seed, "test-data"));
  for (std::uint32_t c = 0; c < spec.num_classes; ++c)
    for (std::uint32_t k = 0; k < test_per_class; ++k)
      out.test.samples.push_back(make_sample(cfg, c, rng));
  return out;
}

}  // namespace bsrt::data
