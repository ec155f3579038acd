// Command-line front end.  Talks to the simulator exclusively through the
// shared-library C interface.
//
// Exit codes: 0 success, 2 configuration error, 3 invariant violation,
// 1 anything else.  ledger-verify exits 1 when the chain fails to verify.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "blocksecrt.h"

namespace {

int status_to_exit(bsrt_status st) {
  switch (st) {
    case BSRT_OK:
      return 0;
    case BSRT_ERR_CONFIG:
    case BSRT_ERR_SCENARIO:
      return 2;
    case BSRT_ERR_INVARIANT:
      return 3;
    default:
      return 1;
  }
}

int fail(bsrt_status st) {
  std::fprintf(stderr, "error: %s\n", bsrt_last_error());
  return status_to_exit(st);
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            const std::string& out_dir, bool quiet) {
  bsrt_config* cfg = nullptr;
  bsrt_status st =
      config_path.empty() ? bsrt_config_create(&cfg) : bsrt_config_load(config_path.c_str(), &cfg);
  if (st != BSRT_OK) return fail(st);

  for (const std::string& kv : sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      bsrt_config_destroy(cfg);
      return 2;
    }
    st = bsrt_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != BSRT_OK) {
      bsrt_config_destroy(cfg);
      return fail(st);
    }
  }

  bsrt_report* report = nullptr;
  st = bsrt_run(cfg, out_dir.empty() ? nullptr : out_dir.c_str(), &report);
  bsrt_config_destroy(cfg);
  if (st != BSRT_OK) return fail(st);

  if (!quiet) {
    uint32_t rounds = bsrt_report_round_count(report);
    for (uint32_t r = 0; r < rounds; ++r)
      std::printf("round %2u  accuracy %.4f  accepted %u\n", r,
                  bsrt_report_round_accuracy(report, r), bsrt_report_round_accepted(report, r));
    std::printf("final accuracy %.4f\n", bsrt_report_final_accuracy(report));
    for (uint32_t c = 0; c < bsrt_report_client_count(report); ++c) {
      double fed = bsrt_report_fed_missing_recall(report, c);
      double local = bsrt_report_local_missing_recall(report, c);
      std::printf("client %u  missing-class recall: federated %.4f  local-only %.4f\n", c, fed,
                  local);
    }
    std::printf("chain verified: %s  ledger bytes: %" PRIu64 "\n",
                bsrt_report_chain_verified(report) ? "yes" : "no",
                bsrt_report_ledger_bytes(report));
  }
  bsrt_report_destroy(report);
  return 0;
}

int cmd_timing_sweep(const std::vector<uint32_t>& clients, const std::vector<uint32_t>& rsus) {
  char* csv = nullptr;
  bsrt_status st =
      bsrt_timing_sweep_csv(clients.data(), clients.size(), rsus.data(), rsus.size(), &csv);
  if (st != BSRT_OK) return fail(st);
  std::fputs(csv, stdout);
  bsrt_string_free(csv);
  return 0;
}

int cmd_ledger_verify(const std::string& ledger_path, const std::string& keys_path) {
  int64_t bad_index = 0;
  char reason[256] = {0};
  bsrt_status st = bsrt_ledger_verify(ledger_path.c_str(),
                                      keys_path.empty() ? nullptr : keys_path.c_str(),
                                      &bad_index, reason, sizeof(reason));
  if (st != BSRT_OK) return fail(st);
  if (bad_index < 0) {
    std::printf("ledger OK%s\n", keys_path.empty() ? " (structural checks only)" : "");
    return 0;
  }
  std::printf("ledger INVALID at block %" PRId64 ": %s\n", bad_index, reason);
  return 1;
}

int cmd_gradcheck(uint32_t trials, uint64_t seed, double tolerance) {
  double max_rel = 0.0;
  bsrt_status st = bsrt_gradcheck(trials, seed, &max_rel);
  if (st != BSRT_OK) return fail(st);
  std::printf("gradcheck: %u instances, max relative error %.3e (tolerance %.1e)\n", trials,
              max_rel, tolerance);
  if (max_rel >= tolerance) {
    std::printf("gradcheck FAILED\n");
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blocksecrt: deterministic federated-learning protocol simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bsrt_version()));

  std::string config_path, out_dir, keys_path, ledger_path;
  std::vector<std::string> sets;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run a federation scenario");
  run->add_option("--config", config_path, "scenario config file (defaults apply if omitted)");
  run->add_option("--set", sets, "override a config key, key=value (repeatable)");
  run->add_option("--out", out_dir, "directory for metrics.csv, report.json, ledger.bin, ...");
  run->add_flag("--quiet", quiet, "suppress the per-round summary");

  std::vector<uint32_t> sweep_clients{5, 10, 15, 20, 25};
  std::vector<uint32_t> sweep_rsus{1, 3, 5, 7, 9};
  auto* sweep = app.add_subcommand("timing-sweep", "print the block-time model as CSV");
  sweep->add_option("--clients", sweep_clients, "client counts")->delimiter(',');
  sweep->add_option("--rsus", sweep_rsus, "RSU committee sizes")->delimiter(',');

  auto* verify = app.add_subcommand("ledger-verify", "verify a serialized ledger file");
  verify->add_option("ledger", ledger_path, "path to ledger.bin")->required();
  verify->add_option("--keys", keys_path, "keys.json for signature verification");

  uint32_t gc_trials = 20;
  uint64_t gc_seed = 1;
  double gc_tolerance = 1e-6;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare gradients to finite differences");
  gradcheck->add_option("--trials", gc_trials, "number of randomized instances");
  gradcheck->add_option("--seed", gc_seed, "instance seed");
  gradcheck->add_option("--tolerance", gc_tolerance, "max allowed relative error");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, sets, out_dir, quiet);
  if (sweep->parsed()) return cmd_timing_sweep(sweep_clients, sweep_rsus);
  if (verify->parsed()) return cmd_ledger_verify(ledger_path, keys_path);
  if (gradcheck->parsed()) return cmd_gradcheck(gc_trials, gc_seed, gc_tolerance);
  return 1;
}
