#include "bsrt/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "bsrt/consensus.hpp"
#include "bsrt/data.hpp"
#include "bsrt/errors.hpp"
#include "bsrt/fed.hpp"
#include "bsrt/rng.hpp"
#include "bsrt/timing.hpp"

namespace bsrt::sim {

namespace {

using nlohmann::json;

data::PartitionSpec build_partition(const ScenarioConfig& cfg) {
  if (cfg.partition == "kitti") return data::kitti_missing_pattern(cfg.partition_scale_divisor);
  return data::uniform_pattern(cfg.num_clients, cfg.uniform_per_class, cfg.encoder.num_classes);
}

double mean_missing_recall(const std::vector<std::uint32_t>& missing,
                           const std::vector<std::optional<double>>& recall) {
  if (missing.empty()) return std::nan("");
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::uint32_t c : missing) {
    if (c < recall.size() && recall[c].has_value()) {
      sum += *recall[c];
      ++defined;
    }
  }
  return defined > 0 ? sum / static_cast<double>(defined) : std::nan("");
}

json recall_to_json(const std::vector<std::optional<double>>& recall) {
  json arr = json::array();
  for (const auto& r : recall) {
    if (r.has_value())
      arr.push_back(*r);
    else
      arr.push_back(nullptr);
  }
  return arr;
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return json(v);
  return json(nullptr);
}

}  // namespace

RunArtifacts run_federation(const ScenarioConfig& cfg) {
  cfg.validate();
  const std::uint32_t n_clients = cfg.num_clients;
  const std::uint32_t n_rsus = cfg.num_rsus;
  const model::RetentionSchedule sched = cfg.schedule();

  RunArtifacts art;
  art.config = cfg;

  data::PartitionSpec spec = build_partition(cfg);
  if (spec.counts.size() != n_clients)
    throw Error(ErrorCode::ConfigError, "config: partition client count mismatch");
  data::PartitionResult part =
      data::synth_partition(spec, cfg.encoder, cfg.test_per_class, cfg.seed);
  const auto missing = spec.missing_classes();

  crypto::CaInit ca = crypto::ca_init(n_clients, n_rsus, cfg.rounds, cfg.seed);
  art.keys.gvk = ca.gvk;
  for (const auto& kp : ca.rsus) art.keys.rsu_pks.push_back(kp.pk);

  const model::ParamVector w0 =
      model::random_init(cfg.encoder, cfg.init_scale, derive_seed(cfg.seed, "global-init"));

  std::vector<fed::ClientState> clients(n_clients);
  for (std::uint32_t i = 0; i < n_clients; ++i) {
    clients[i].client_id = i;
    clients[i].creds = ca.clients[i];
    clients[i].dataset = std::move(part.clients[i]);
    clients[i].declared_size = static_cast<std::uint32_t>(clients[i].dataset.size());
    clients[i].current_global = w0;
  }

  std::vector<consensus::RsuState> rsus(n_rsus);
  for (std::uint32_t j = 0; j < n_rsus; ++j) {
    rsus[j].rsu_id = static_cast<std::uint16_t>(j);
    rsus[j].keys = ca.rsus[j];
    rsus[j].gvk = ca.gvk;
    rsus[j].peer_pks = art.keys.rsu_pks;
    rsus[j].current_global = w0;
    if (auto it = cfg.rsu_modes.find(j); it != cfg.rsu_modes.end()) rsus[j].mode = it->second;
  }

  model::ParamVector global = w0;
  art.offchain.store(cfg.encoder, global);

  for (std::uint32_t r = 0; r < cfg.rounds; ++r) {
    // Local training and anonymous submission.
    std::vector<fed::UpdateMessage> msgs;
    for (std::uint32_t i = 0; i < n_clients; ++i) {
      fed::AttackProfile profile;
      if (auto it = cfg.client_attacks.find(i); it != cfg.client_attacks.end())
        profile = it->second;
      if (profile.kind == fed::AttackProfile::Kind::Silent) continue;

      fed::ClientRoundOptions opt;
      opt.cfg = cfg.encoder;
      opt.sched = sched;
      opt.hyper = cfg.hyper;
      opt.hyper.seed = derive_seed(cfg.seed, "client-round", i, r);
      opt.epochs = cfg.local_epochs;
      fed::ClientRoundResult res = fed::client_round(clients[i], clients[i].current_global, r, opt);
      for (fed::UpdateMessage& m : fed::make_attack(clients[i], res.message, profile)) {
        art.report.envelopes.emplace_back(r, m.envelope);
        msgs.push_back(std::move(m));
      }
    }

    // Every RSU screens the same broadcast set and aggregates independently.
    std::vector<consensus::RsuRoundOutput> outs;
    outs.reserve(n_rsus);
    for (std::uint32_t j = 0; j < n_rsus; ++j)
      outs.push_back(consensus::rsu_process_round(rsus[j], msgs, r, cfg.seed));

    const consensus::VerifiedSet& verified = outs[0].verified;
    const crypto::Digest reference_hash = consensus::model_digest(
        outs[0].local_model ? *outs[0].local_model : rsus[0].current_global);
    for (std::uint32_t j = 1; j < n_rsus; ++j) {
      const crypto::Digest h = consensus::model_digest(
          outs[j].local_model ? *outs[j].local_model : rsus[j].current_global);
      if (h != reference_hash ||
          outs[j].verified.accepted.size() != verified.accepted.size())
        throw Error(ErrorCode::InvariantViolation,
                    "independent aggregations diverged on identical input");
    }

    std::vector<consensus::CommitAggregateTx> pool;
    for (const auto& out : outs)
      pool.insert(pool.end(), out.commits.begin(), out.commits.end());

    std::vector<std::pair<crypto::Digest, model::ParamVector>> candidates;
    for (std::uint32_t j = 0; j < n_rsus; ++j) {
      const model::ParamVector& m =
          outs[j].local_model ? *outs[j].local_model : rsus[j].current_global;
      candidates.emplace_back(consensus::model_digest(m), m);
    }

    const std::uint32_t proposer_id = r % n_rsus;
    consensus::ConsensusOutcome outcome = consensus::bft_round(
        pool, n_rsus, r, ca.rsus[proposer_id], art.keys.rsu_pks, candidates);

    std::vector<crypto::LinkTag> receipts;
    for (const fed::UpdateMessage& m : verified.accepted)
      receipts.push_back(crypto::link_tag(m.envelope));
    art.chain.append(outcome, receipts, art.keys.rsu_pks);

    if (outcome.finalized.has_value()) {
      global = *outcome.finalized;
      for (auto& c : clients) fed::apply_global(c, global);
      for (auto& rsu : rsus) rsu.current_global = global;
      art.offchain.store(cfg.encoder, global);
    }

    RoundMetrics met;
    met.round = r;
    met.quorum = outcome.record.quorum == 1;
    met.accepted = static_cast<std::uint32_t>(verified.accepted.size());
    for (const auto& [msg, reason] : verified.rejected) {
      if (reason == consensus::RejectReason::Duplicate)
        ++met.rejected_duplicate;
      else
        ++met.rejected_invalid;
    }
    const double eval_k = model::retention_ratio(r + 1, sched);
    model::EvalResult ev = model::evaluate(cfg.encoder, global, part.test, eval_k);
    met.global_accuracy = ev.accuracy;
    met.per_class_recall = std::move(ev.per_class_recall);
    met.block_time_ms =
        msgs.empty() ? cfg.timing.t_sign_ms +
                           timing::block_time_breakdown(1, n_rsus, cfg.timing).consensus_ms
                     : timing::block_time_ms(static_cast<std::uint32_t>(msgs.size()), n_rsus,
                                             cfg.timing);
    met.ledger_bytes = art.chain.total_bytes();
    art.report.rounds.push_back(std::move(met));
  }

  art.final_params = global;
  model::EvalResult fin = model::evaluate(cfg.encoder, global, part.test, sched.k_end);
  art.report.final_accuracy = fin.accuracy;
  art.report.final_per_class_recall = fin.per_class_recall;
  art.report.ledger_bytes = art.chain.total_bytes();
  art.report.block_count = static_cast<std::uint32_t>(art.chain.size());
  art.report.offchain_bytes = art.offchain.size_bytes();

  art.report.clients.resize(n_clients);
  for (std::uint32_t i = 0; i < n_clients; ++i) {
    ClientOutcome& co = art.report.clients[i];
    co.client_id = i;
    co.missing_classes = missing[i];
    co.fed_missing_recall = mean_missing_recall(co.missing_classes, fin.per_class_recall);
    co.local_only_missing_recall = std::nan("");
  }

  // Control arm: the same schedule and budget with no aggregation at all.
  if (cfg.local_baseline) {
    for (std::uint32_t i = 0; i < n_clients; ++i) {
      model::ParamVector params = w0;
      for (std::uint32_t r = 0; r < cfg.rounds; ++r) {
        model::TrainHyper hyper = cfg.hyper;
        hyper.seed = derive_seed(cfg.seed, "local-only", i, r);
        params = model::local_train(cfg.encoder, params, clients[i].dataset, cfg.local_epochs,
                                    r, sched, hyper)
                     .best;
      }
      model::EvalResult ev = model::evaluate(cfg.encoder, params, part.test, sched.k_end);
      art.report.clients[i].local_only_missing_recall =
          mean_missing_recall(art.report.clients[i].missing_classes, ev.per_class_recall);
    }
  }

  Bytes chain_bytes = art.chain.to_bytes();
  ledger::ChainVerifyResult cv = ledger::verify_chain(chain_bytes, &art.keys);
  art.report.chain_verified = cv.ok;
  if (!cv.ok)
    throw Error(ErrorCode::InvariantViolation,
                "freshly built chain failed verification: " + cv.reason);
  return art;
}

std::string metrics_csv(const RunReport& report, std::uint32_t num_classes) {
  std::string out = "round,global_acc";
  for (std::uint32_t c = 0; c < num_classes; ++c) out += ",recall_c" + std::to_string(c);
  out += ",accepted,rejected_dup,rejected_sig,block_time_ms,ledger_bytes\n";

  char buf[64];
  for (const RoundMetrics& m : report.rounds) {
    out += std::to_string(m.round);
    std::snprintf(buf, sizeof(buf), ",%.6f", m.global_accuracy);
    out += buf;
    for (std::uint32_t c = 0; c < num_classes; ++c) {
      if (c < m.per_class_recall.size() && m.per_class_recall[c].has_value()) {
        std::snprintf(buf, sizeof(buf), ",%.6f", *m.per_class_recall[c]);
        out += buf;
      } else {
        out += ",";
      }
    }
    out += "," + std::to_string(m.accepted);
    out += "," + std::to_string(m.rejected_duplicate);
    out += "," + std::to_string(m.rejected_invalid);
    std::snprintf(buf, sizeof(buf), ",%.3f", m.block_time_ms);
    out += buf;
    out += "," + std::to_string(m.ledger_bytes) + "\n";
  }
  return out;
}

std::string report_json(const RunArtifacts& art) {
  const ScenarioConfig& cfg = art.config;
  json j;
  j["config"] = {
      {"num_clients", cfg.num_clients},
      {"num_rsus", cfg.num_rsus},
      {"rounds", cfg.rounds},
      {"local_epochs", cfg.local_epochs},
      {"k_start", cfg.k_start},
      {"k_end", cfg.k_end},
      {"num_tokens", cfg.encoder.num_tokens},
      {"token_dim", cfg.encoder.token_dim},
      {"ffn_dim", cfg.encoder.ffn_dim},
      {"num_classes", cfg.encoder.num_classes},
      {"batch_size", cfg.hyper.batch_size},
      {"learning_rate", cfg.hyper.learning_rate},
      {"init_scale", cfg.init_scale},
      {"partition", cfg.partition},
      {"partition_scale_divisor", cfg.partition_scale_divisor},
      {"uniform_per_class", cfg.uniform_per_class},
      {"test_per_class", cfg.test_per_class},
      {"seed", cfg.seed},
      {"local_baseline", cfg.local_baseline},
  };
  json attacks = json::object();
  for (const auto& [id, profile] : cfg.client_attacks)
    attacks[std::to_string(id)] = profile.to_string();
  j["config"]["client_attacks"] = attacks;
  json modes = json::object();
  for (const auto& [id, mode] : cfg.rsu_modes)
    modes[std::to_string(id)] = consensus::to_string(mode);
  j["config"]["rsu_modes"] = modes;

  j["rounds"] = json::array();
  for (const RoundMetrics& m : art.report.rounds) {
    j["rounds"].push_back({
        {"round", m.round},
        {"global_accuracy", m.global_accuracy},
        {"per_class_recall", recall_to_json(m.per_class_recall)},
        {"accepted", m.accepted},
        {"rejected_duplicate", m.rejected_duplicate},
        {"rejected_invalid", m.rejected_invalid},
        {"quorum", m.quorum},
        {"block_time_ms", m.block_time_ms},
        {"ledger_bytes", m.ledger_bytes},
    });
  }

  j["clients"] = json::array();
  for (const ClientOutcome& c : art.report.clients) {
    j["clients"].push_back({
        {"client_id", c.client_id},
        {"missing_classes", c.missing_classes},
        {"fed_missing_recall", finite_or_null(c.fed_missing_recall)},
        {"local_only_missing_recall", finite_or_null(c.local_only_missing_recall)},
    });
  }

  j["final"] = {
      {"accuracy", art.report.final_accuracy},
      {"per_class_recall", recall_to_json(art.report.final_per_class_recall)},
      {"chain_verified", art.report.chain_verified},
      {"ledger_bytes", art.report.ledger_bytes},
      {"block_count", art.report.block_count},
      {"offchain_bytes", art.report.offchain_bytes},
  };
  return j.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void write_binary(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

}  // namespace

void write_artifacts(const RunArtifacts& art, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "metrics.csv", metrics_csv(art.report, art.config.encoder.num_classes));
  write_text(out_dir / "report.json", report_json(art));
  art.chain.write_file(out_dir / "ledger.bin");
  write_binary(out_dir / "final.params",
               model::serialize_params(art.config.encoder, art.final_params));
  save_keys(art.keys, out_dir / "keys.json");
}

void save_keys(const ledger::KeyContext& keys, const std::filesystem::path& path) {
  json j;
  j["group_verification_key"] = to_hex(keys.gvk);
  j["rsu_public_keys"] = json::array();
  for (const auto& pk : keys.rsu_pks) j["rsu_public_keys"].push_back(to_hex(pk));
  write_text(path, j.dump(2) + "\n");
}

ledger::KeyContext load_keys(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open keys file: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("keys file: ") + e.what());
  }

  ledger::KeyContext keys;
  try {
    Bytes gvk = from_hex(j.at("group_verification_key").get<std::string>());
    if (gvk.size() != crypto::kPublicKeyBytes)
      throw Error(ErrorCode::ParseError, "keys file: bad key length");
    std::copy(gvk.begin(), gvk.end(), keys.gvk.begin());
    for (const auto& item : j.at("rsu_public_keys")) {
      Bytes pk = from_hex(item.get<std::string>());
      if (pk.size() != crypto::kPublicKeyBytes)
        throw Error(ErrorCode::ParseError, "keys file: bad key length");
      crypto::PublicKey out{};
      std::copy(pk.begin(), pk.end(), out.begin());
      keys.rsu_pks.push_back(out);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("keys file: ") + e.what());
  }
  return keys;
}

}  // namespace bsrt::sim
