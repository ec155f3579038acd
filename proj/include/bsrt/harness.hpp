#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bsrt/config.hpp"
#include "bsrt/crypto.hpp"
#include "bsrt/ledger.hpp"
#include "bsrt/model.hpp"

namespace bsrt::sim {

struct RoundMetrics {
  std::uint32_t round = 0;
  double global_accuracy = 0.0;
  std::vector<std::optional<double>> per_class_recall;
  std::uint32_t accepted = 0;
  std::uint32_t rejected_duplicate = 0;
  std::uint32_t rejected_invalid = 0;
  bool quorum = false;
  double block_time_ms = 0.0;
  std::uint64_t ledger_bytes = 0;
};

struct ClientOutcome {
  std::uint32_t client_id = 0;
  std::vector<std::uint32_t> missing_classes;
  // Mean recall over this client's missing classes, on the held-out test
  // set; NaN when the client misses nothing or the arm did not run.
  double fed_missing_recall = 0.0;
  double local_only_missing_recall = 0.0;
};

struct RunReport {
  std::vector<RoundMetrics> rounds;
  std::vector<ClientOutcome> clients;
  double final_accuracy = 0.0;
  std::vector<std::optional<double>> final_per_class_recall;
  bool chain_verified = false;
  std::uint64_t ledger_bytes = 0;
  std::uint32_t block_count = 0;
  std::uint64_t offchain_bytes = 0;
  // Every envelope that crossed the wire, tagged with its round.
  std::vector<std::pair<std::uint32_t, crypto::SignedEnvelope>> envelopes;
};

struct RunArtifacts {
  ScenarioConfig config;
  RunReport report;
  ledger::Ledger chain;
  ledger::OffchainStore offchain;
  model::ParamVector final_params;
  ledger::KeyContext keys;
};

// Runs the whole federation: credential issuance, per-round local training,
// anonymous submission, RSU verification and aggregation, one-shot vote,
// block append, and (optionally) the per-client local-only control arm.
// Deterministic in the config.  Throws ErrorCode::InvariantViolation if
// honest RSUs ever disagree or the final chain fails verification.
RunArtifacts run_federation(const ScenarioConfig& cfg);

std::string metrics_csv(const RunReport& report, std::uint32_t num_classes);
std::string report_json(const RunArtifacts& art);

// Writes metrics.csv, report.json, ledger.bin, final.params, keys.json.
void write_artifacts(const RunArtifacts& art, const std::filesystem::path& out_dir);

void save_keys(const ledger::KeyContext& keys, const std::filesystem::path& path);
ledger::KeyContext load_keys(const std::filesystem::path& path);

}  // namespace bsrt::sim
