// Exercises the shared library through the C interface alone — the same
// surface the CLI and any external binding sees.  No C++ core headers.

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

#include "blocksecrt.h"

static int g_failures = 0;

#define EXPECT(cond)                                                     \
  do {                                                                   \
    if (!(cond)) {                                                       \
      std::fprintf(stderr, "FAIL %s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++g_failures;                                                      \
    }                                                                    \
  } while (0)

static void test_version_and_errors() {
  EXPECT(bsrt_version() != nullptr);
  EXPECT(std::strlen(bsrt_version()) > 0);

  EXPECT(bsrt_config_create(nullptr) == BSRT_ERR_INVALID_ARGUMENT);
  EXPECT(std::strlen(bsrt_last_error()) > 0);

  bsrt_config* cfg = nullptr;
  EXPECT(bsrt_config_create(&cfg) == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "warp_factor", "9") == BSRT_ERR_CONFIG);
  EXPECT(std::strstr(bsrt_last_error(), "warp_factor") != nullptr);
  EXPECT(bsrt_config_set(cfg, "rounds", "banana") == BSRT_ERR_CONFIG);
  EXPECT(bsrt_config_set(nullptr, "rounds", "1") == BSRT_ERR_INVALID_ARGUMENT);
  bsrt_config_destroy(cfg);
  bsrt_config_destroy(nullptr);  // must be a no-op
}

static void test_run_and_report() {
  bsrt_config* cfg = nullptr;
  EXPECT(bsrt_config_create(&cfg) == BSRT_OK);
  // Tiny uniform scenario keeps this fast.
  EXPECT(bsrt_config_set(cfg, "partition", "uniform") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "num_clients", "3") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "uniform_per_class", "3") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "test_per_class", "2") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "rounds", "2") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "local_epochs", "1") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "num_tokens", "6") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "token_dim", "8") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "ffn_dim", "8") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "batch_size", "4") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "local_baseline", "false") == BSRT_OK);
  EXPECT(bsrt_config_set(cfg, "seed", "5") == BSRT_OK);

  std::string dir = "/tmp/bsrt_capi_out";
  std::remove((dir + "/ledger.bin").c_str());

  bsrt_report* rep = nullptr;
  EXPECT(bsrt_run(cfg, dir.c_str(), &rep) == BSRT_OK);
  EXPECT(rep != nullptr);

  EXPECT(bsrt_report_round_count(rep) == 2);
  for (uint32_t r = 0; r < 2; ++r) {
    double acc = bsrt_report_round_accuracy(rep, r);
    EXPECT(acc >= 0.0 && acc <= 1.0);
    EXPECT(bsrt_report_round_accepted(rep, r) == 3);
  }
  EXPECT(bsrt_report_final_accuracy(rep) >= 0.0);
  EXPECT(bsrt_report_client_count(rep) == 3);
  // Uniform partition: no missing classes, recall is NaN.
  EXPECT(std::isnan(bsrt_report_fed_missing_recall(rep, 0)));
  EXPECT(std::isnan(bsrt_report_local_missing_recall(rep, 0)));
  EXPECT(bsrt_report_chain_verified(rep) == 1);
  EXPECT(bsrt_report_ledger_bytes(rep) == 2u * (188 + 107 * 3 + 11 * 3));

  // Out-of-range accessors are inert rather than UB.
  EXPECT(std::isnan(bsrt_report_round_accuracy(rep, 99)));
  EXPECT(bsrt_report_round_accepted(rep, 99) == 0);

  bsrt_report_destroy(rep);
  bsrt_report_destroy(nullptr);

  // The written ledger verifies through the C API, with and without keys.
  int64_t bad = -2;
  char reason[128];
  std::string led = dir + "/ledger.bin";
  std::string keys = dir + "/keys.json";
  EXPECT(bsrt_ledger_verify(led.c_str(), keys.c_str(), &bad, reason, sizeof(reason)) == BSRT_OK);
  EXPECT(bad == -1);
  EXPECT(bsrt_ledger_verify(led.c_str(), nullptr, &bad, reason, sizeof(reason)) == BSRT_OK);
  EXPECT(bad == -1);
  EXPECT(bsrt_ledger_verify("/nonexistent.bin", nullptr, &bad, reason, sizeof(reason)) ==
         BSRT_ERR_IO);

  // A corrupted copy reports its failing block index through the same call.
  {
    std::FILE* in = std::fopen(led.c_str(), "rb");
    EXPECT(in != nullptr);
    std::string bytes;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), in)) > 0) bytes.append(buf, n);
    std::fclose(in);
    bytes[bytes.size() / 2] ^= 0x10;
    std::string bad_path = dir + "/ledger_bad.bin";
    std::FILE* out = std::fopen(bad_path.c_str(), "wb");
    std::fwrite(bytes.data(), 1, bytes.size(), out);
    std::fclose(out);
    EXPECT(bsrt_ledger_verify(bad_path.c_str(), keys.c_str(), &bad, reason, sizeof(reason)) ==
           BSRT_OK);
    EXPECT(bad >= 0);
    EXPECT(std::strlen(reason) > 0);
  }

  // Invalid scenarios surface as config errors, not crashes.
  bsrt_config* bad_cfg = nullptr;
  EXPECT(bsrt_config_create(&bad_cfg) == BSRT_OK);
  EXPECT(bsrt_config_set(bad_cfg, "num_clients", "3") == BSRT_OK);  // kitti needs 5
  bsrt_report* no_rep = nullptr;
  EXPECT(bsrt_run(bad_cfg, nullptr, &no_rep) == BSRT_ERR_CONFIG);
  EXPECT(no_rep == nullptr);
  bsrt_config_destroy(bad_cfg);
  bsrt_config_destroy(cfg);
}

static void test_timing_and_gradcheck() {
  double ms = 0.0;
  EXPECT(bsrt_block_time_ms(25, 3, &ms) == BSRT_OK);
  EXPECT(std::fabs(ms - 373.2) < 1e-9);
  EXPECT(bsrt_block_time_ms(0, 3, &ms) == BSRT_ERR_INVALID_ARGUMENT);

  uint32_t clients[] = {5, 10};
  uint32_t rsus[] = {3};
  char* csv = nullptr;
  EXPECT(bsrt_timing_sweep_csv(clients, 2, rsus, 1, &csv) == BSRT_OK);
  EXPECT(csv != nullptr);
  EXPECT(std::strncmp(csv, "N,K,sign_ms,rsu_ms,cons_ms,total_ms\n", 36) == 0);
  EXPECT(std::strstr(csv, "5,3,27.800,73.200,16.000,117.000") != nullptr);
  bsrt_string_free(csv);
  bsrt_string_free(nullptr);

  double max_rel = 1.0;
  EXPECT(bsrt_gradcheck(3, 1, &max_rel) == BSRT_OK);
  EXPECT(max_rel < 1e-6);
  EXPECT(bsrt_gradcheck(0, 1, &max_rel) == BSRT_ERR_INVALID_ARGUMENT);
}

static void test_config_load() {
  std::string path = "/tmp/bsrt_capi_cfg.cfg";
  std::FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("rounds = 4\nseed = 3\n", f);
  std::fclose(f);
  bsrt_config* cfg = nullptr;
  EXPECT(bsrt_config_load(path.c_str(), &cfg) == BSRT_OK);
  bsrt_config_destroy(cfg);
  std::remove(path.c_str());

  bsrt_config* missing = nullptr;
  EXPECT(bsrt_config_load("/nonexistent/x.cfg", &missing) == BSRT_ERR_IO);
  EXPECT(missing == nullptr);
}

int main() {
  test_version_and_errors();
  test_run_and_report();
  test_timing_and_gradcheck();
  test_config_load();
  if (g_failures == 0) {
    std::printf("capi_tests: all checks passed\n");
    return 0;
  }
  std::fprintf(stderr, "capi_tests: %d failures\n", g_failures);
  return 1;
}
