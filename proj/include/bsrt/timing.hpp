#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bsrt::timing {

// Analytic per-round latency model, all milliseconds.  Measured constants:
// signing 27.8, per-update verification 35.6, per-update aggregation 1.0;
// consensus costs a 10.0 base plus 1.0 per ordered RSU pair.
struct TimingParams {
  double t_sign_ms = 27.8;
  double t_ver_ms = 35.6;
  double t_agg_ms = 1.0;
  double t_base_ms = 10.0;
  double alpha_msg_ms = 1.0;

  void validate() const;
};

// Updates spread across RSUs; the round waits on the busiest one, which
// handles ceil(N / K) of them.
double rsu_busy_time_ms(std::uint32_t num_clients, std::uint32_t num_rsus,
                        const TimingParams& p);

struct BlockTimeBreakdown {
  double sign_ms = 0.0;
  double rsu_ms = 0.0;
  double consensus_ms = 0.0;

  double total_ms() const { return sign_ms + rsu_ms + consensus_ms; }
};

BlockTimeBreakdown block_time_breakdown(std::uint32_t num_clients, std::uint32_t num_rsus,
                                        const TimingParams& p);
double block_time_ms(std::uint32_t num_clients, std::uint32_t num_rsus, const TimingParams& p);

struct SweepRow {
  std::uint32_t num_clients = 0;
  std::uint32_t num_rsus = 0;
  double sign_ms = 0.0;
  double rsu_ms = 0.0;
  double consensus_ms = 0.0;
  double total_ms = 0.0;
};

// Cartesian sweep, rows ordered by (num_rsus, num_clients).
std::vector<SweepRow> sweep(std::span<const std::uint32_t> client_counts,
                            std::span<const std::uint32_t> rsu_counts, const TimingParams& p);

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace bsrt::timing
