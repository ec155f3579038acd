// C ABI wrapper: opaque handles over the C++ core, exceptions mapped to
// status codes at the boundary.

#include "blocksecrt.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "bsrt/config.hpp"
#include "bsrt/errors.hpp"
#include "bsrt/harness.hpp"
#include "bsrt/ledger.hpp"
#include "bsrt/model.hpp"
#include "bsrt/timing.hpp"

namespace {

thread_local std::string g_last_error;

bsrt_status map_code(bsrt::ErrorCode code) {
  using bsrt::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument:
      return BSRT_ERR_INVALID_ARGUMENT;
    case ErrorCode::NoCredential:
      return BSRT_ERR_NO_CREDENTIAL;
    case ErrorCode::InvalidScenario:
      return BSRT_ERR_SCENARIO;
    case ErrorCode::ConfigError:
      return BSRT_ERR_CONFIG;
    case ErrorCode::InvariantViolation:
      return BSRT_ERR_INVARIANT;
    case ErrorCode::ParseError:
      return BSRT_ERR_PARSE;
    case ErrorCode::IoError:
      return BSRT_ERR_IO;
    case ErrorCode::LedgerBadProposerSignature:
    case ErrorCode::LedgerQuorumMismatch:
    case ErrorCode::LedgerDuplicateRound:
    case ErrorCode::LedgerBrokenChain:
      return BSRT_ERR_LEDGER;
  }
  return BSRT_ERR_INTERNAL;
}

// Runs fn, routing exceptions into status codes + the thread-local message.
template <typename Fn>
bsrt_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return BSRT_OK;
  } catch (const bsrt::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BSRT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BSRT_ERR_INTERNAL;
  }
}

bsrt::sim::ScenarioConfig* to_config(bsrt_config* c) {
  return reinterpret_cast<bsrt::sim::ScenarioConfig*>(c);
}

const bsrt::sim::ScenarioConfig* to_config(const bsrt_config* c) {
  return reinterpret_cast<const bsrt::sim::ScenarioConfig*>(c);
}

struct ReportHandle {
  bsrt::sim::RunReport report;
};

ReportHandle* to_report(bsrt_report* r) { return reinterpret_cast<ReportHandle*>(r); }
const ReportHandle* to_report(const bsrt_report* r) {
  return reinterpret_cast<const ReportHandle*>(r);
}

}  // namespace

extern "C" {

const char* bsrt_version(void) { return "1.0.0"; }

const char* bsrt_last_error(void) { return g_last_error.c_str(); }

/* ---- scenario configuration ------------------------------------------- */

bsrt_status bsrt_config_create(bsrt_config** out) {
  if (out == nullptr) {
    g_last_error = "out pointer is null";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    *out = reinterpret_cast<bsrt_config*>(new bsrt::sim::ScenarioConfig());
  });
}

bsrt_status bsrt_config_load(const char* path, bsrt_config** out) {
  if (path == nullptr || out == nullptr) {
    g_last_error = "null argument";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    auto cfg = bsrt::sim::ScenarioConfig::from_file(path);
    *out = reinterpret_cast<bsrt_config*>(new bsrt::sim::ScenarioConfig(std::move(cfg)));
  });
}

bsrt_status bsrt_config_set(bsrt_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr) {
    g_last_error = "null argument";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { to_config(cfg)->set(key, value); });
}

void bsrt_config_destroy(bsrt_config* cfg) { delete to_config(cfg); }

/* ---- federation run ---------------------------------------------------- */

bsrt_status bsrt_run(const bsrt_config* cfg, const char* out_dir, bsrt_report** out_report) {
  if (cfg == nullptr) {
    g_last_error = "config is null";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    bsrt::sim::RunArtifacts art = bsrt::sim::run_federation(*to_config(cfg));
    if (out_dir != nullptr) bsrt::sim::write_artifacts(art, out_dir);
    if (out_report != nullptr) {
      auto* handle = new ReportHandle{std::move(art.report)};
      *out_report = reinterpret_cast<bsrt_report*>(handle);
    }
  });
}

uint32_t bsrt_report_round_count(const bsrt_report* r) {
  if (r == nullptr) return 0;
  return static_cast<uint32_t>(to_report(r)->report.rounds.size());
}

double bsrt_report_round_accuracy(const bsrt_report* r, uint32_t round) {
  if (r == nullptr || round >= to_report(r)->report.rounds.size()) return std::nan("");
  return to_report(r)->report.rounds[round].global_accuracy;
}

uint32_t bsrt_report_round_accepted(const bsrt_report* r, uint32_t round) {
  if (r == nullptr || round >= to_report(r)->report.rounds.size()) return 0;
  return to_report(r)->report.rounds[round].accepted;
}

double bsrt_report_final_accuracy(const bsrt_report* r) {
  if (r == nullptr) return std::nan("");
  return to_report(r)->report.final_accuracy;
}

uint32_t bsrt_report_client_count(const bsrt_report* r) {
  if (r == nullptr) return 0;
  return static_cast<uint32_t>(to_report(r)->report.clients.size());
}

double bsrt_report_fed_missing_recall(const bsrt_report* r, uint32_t client) {
  if (r == nullptr || client >= to_report(r)->report.clients.size()) return std::nan("");
  return to_report(r)->report.clients[client].fed_missing_recall;
}

double bsrt_report_local_missing_recall(const bsrt_report* r, uint32_t client) {
  if (r == nullptr || client >= to_report(r)->report.clients.size()) return std::nan("");
  return to_report(r)->report.clients[client].local_only_missing_recall;
}

int bsrt_report_chain_verified(const bsrt_report* r) {
  if (r == nullptr) return 0;
  return to_report(r)->report.chain_verified ? 1 : 0;
}

uint64_t bsrt_report_ledger_bytes(const bsrt_report* r) {
  if (r == nullptr) return 0;
  return to_report(r)->report.ledger_bytes;
}

void bsrt_report_destroy(bsrt_report* r) { delete to_report(r); }

/* ---- ledger ------------------------------------------------------------- */

bsrt_status bsrt_ledger_verify(const char* ledger_path, const char* keys_path,
                               int64_t* first_bad_index, char* reason_buf,
                               size_t reason_buf_len) {
  if (ledger_path == nullptr || first_bad_index == nullptr) {
    g_last_error = "null argument";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    std::ifstream f(ledger_path, std::ios::binary);
    if (!f) throw bsrt::Error(bsrt::ErrorCode::IoError, "cannot open ledger file");
    bsrt::Bytes bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    bsrt::ledger::KeyContext keys;
    const bsrt::ledger::KeyContext* keys_ptr = nullptr;
    if (keys_path != nullptr) {
      keys = bsrt::sim::load_keys(keys_path);
      keys_ptr = &keys;
    }

    bsrt::ledger::ChainVerifyResult res = bsrt::ledger::verify_chain(bytes, keys_ptr);
    *first_bad_index = res.ok ? -1 : res.first_bad_index;
    if (reason_buf != nullptr && reason_buf_len > 0) {
      std::strncpy(reason_buf, res.reason.c_str(), reason_buf_len - 1);
      reason_buf[reason_buf_len - 1] = '\0';
    }
  });
}

bsrt_status bsrt_ledger_size_kb(uint32_t num_clients, uint32_t num_rsus, uint32_t rounds,
                                double acceptance_rate, double* out_kb) {
  if (out_kb == nullptr) {
    g_last_error = "out pointer is null";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    *out_kb = bsrt::ledger::ledger_size_kb(num_clients, num_rsus, rounds, acceptance_rate);
  });
}

/* ---- timing model ------------------------------------------------------- */

bsrt_status bsrt_block_time_ms(uint32_t num_clients, uint32_t num_rsus, double* out_ms) {
  if (out_ms == nullptr) {
    g_last_error = "out pointer is null";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    *out_ms = bsrt::timing::block_time_ms(num_clients, num_rsus, bsrt::timing::TimingParams{});
  });
}

bsrt_status bsrt_timing_sweep_csv(const uint32_t* client_counts, size_t client_count_len,
                                  const uint32_t* rsu_counts, size_t rsu_count_len,
                                  char** out_csv) {
  if (client_counts == nullptr || rsu_counts == nullptr || out_csv == nullptr ||
      client_count_len == 0 || rsu_count_len == 0) {
    g_last_error = "null or empty argument";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    auto rows = bsrt::timing::sweep({client_counts, client_count_len},
                                    {rsu_counts, rsu_count_len}, bsrt::timing::TimingParams{});
    std::string csv = bsrt::timing::sweep_csv(rows);
    char* mem = static_cast<char*>(std::malloc(csv.size() + 1));
    if (mem == nullptr) throw std::bad_alloc();
    std::memcpy(mem, csv.c_str(), csv.size() + 1);
    *out_csv = mem;
  });
}

void bsrt_string_free(char* s) { std::free(s); }

/* ---- diagnostics -------------------------------------------------------- */

bsrt_status bsrt_gradcheck(uint32_t trials, uint64_t seed, double* out_max_rel_err) {
  if (out_max_rel_err == nullptr) {
    g_last_error = "out pointer is null";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  if (trials == 0) {
    g_last_error = "trials must be >= 1";
    return BSRT_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    *out_max_rel_err = bsrt::model::gradcheck(trials, seed).max_rel_err;
  });
}

} /* extern "C" */
