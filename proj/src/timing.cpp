#include "bsrt/timing.hpp"

#include <algorithm>
#include <cstdio>

#include "bsrt/errors.hpp"

namespace bsrt::timing {

void TimingParams::validate() const {
  for (double v : {t_sign_ms, t_ver_ms, t_agg_ms, t_base_ms, alpha_msg_ms})
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "timing: constants must be >= 0");
}

double rsu_busy_time_ms(std::uint32_t num_clients, std::uint32_t num_rsus,
                        const TimingParams& p) {
  p.validate();
  if (num_clients < 1 || num_rsus < 1)
    throw Error(ErrorCode::InvalidArgument, "timing: counts must be >= 1");
  const std::uint32_t per_rsu = (num_clients + num_rsus - 1) / num_rsus;
  return static_cast<double>(per_rsu) * (p.t_ver_ms + p.t_agg_ms);
}

BlockTimeBreakdown block_time_breakdown(std::uint32_t num_clients, std::uint32_t num_rsus,
                                        const TimingParams& p) {
  BlockTimeBreakdown b;
  b.sign_ms = p.t_sign_ms;
  b.rsu_ms = rsu_busy_time_ms(num_clients, num_rsus, p);
  b.consensus_ms =
      p.t_base_ms + p.alpha_msg_ms * static_cast<double>(num_rsus) *
                        static_cast<double>(num_rsus - 1);
  return b;
}

double block_time_ms(std::uint32_t num_clients, std::uint32_t num_rsus, const TimingParams& p) {
  return block_time_breakdown(num_clients, num_rsus, p).total_ms();
}

std::vector<SweepRow> sweep(std::span<const std::uint32_t> client_counts,
                            std::span<const std::uint32_t> rsu_counts, const TimingParams& p) {
  std::vector<std::uint32_t> ns(client_counts.begin(), client_counts.end());
  std::vector<std::uint32_t> ks(rsu_counts.begin(), rsu_counts.end());
  std::sort(ns.begin(), ns.end());
  std::sort(ks.begin(), ks.end());

  std::vector<SweepRow> rows;
  rows.reserve(ns.size() * ks.size());
  for (std::uint32_t k : ks)
    for (std::uint32_t n : ns) {
      BlockTimeBreakdown b = block_time_breakdown(n, k, p);
      rows.push_back(SweepRow{n, k, b.sign_ms, b.rsu_ms, b.consensus_ms, b.total_ms()});
    }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "N,K,sign_ms,rsu_ms,cons_ms,total_ms\n";
  char line[160];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof(line), "%u,%u,%.3f,%.3f,%.3f,%.3f\n", r.num_clients, r.num_rsus,
                  r.sign_ms, r.rsu_ms, r.consensus_ms, r.total_ms);
    out += line;
  }
  return out;
}

}  // namespace bsrt::timing
