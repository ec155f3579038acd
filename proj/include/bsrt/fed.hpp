#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsrt/crypto.hpp"
#include "bsrt/model.hpp"

namespace bsrt::fed {

struct ClientState {
  std::uint32_t client_id = 0;
  crypto::CredentialSet creds;
  model::Dataset dataset;
  std::uint32_t declared_size = 0;
  model::ParamVector current_global;
};

// Anonymous per-round update.  Carries no client identity; the only stable
// handle is the round-scoped link tag of the attached certificate.
struct UpdateMessage {
  std::uint32_t round = 0;
  model::ParamVector delta;
  std::uint32_t declared_size = 0;
  crypto::SignedEnvelope envelope;

  // round u32 | declared_size u32 | delta byte length u32 | delta f64 LE |
  // cert(round u32, pseudo_pk 32, ca_sig 64) | sig 64
  Bytes wire_bytes() const;
  static UpdateMessage from_wire(std::span<const std::uint8_t> bytes);
};

// Digest binding every mutable field of the update: round, delta bytes, and
// the declared dataset size (so weight inflation is signed, not injected).
crypto::Digest update_payload_digest(std::uint32_t round, const model::ParamVector& delta,
                                     std::uint32_t declared_size);

struct AttackProfile {
  enum class Kind { Honest, Duplicate, Poison, Silent };
  Kind kind = Kind::Honest;
  std::uint32_t copies = 2;   // Duplicate
  double scale = -10.0;       // Poison

  static AttackProfile parse(const std::string& text);
  std::string to_string() const;
};

struct ClientRoundOptions {
  model::EncoderConfig cfg;
  model::RetentionSchedule sched;
  model::TrainHyper hyper;
  std::uint32_t epochs = 10;
};

struct ClientRoundResult {
  UpdateMessage message;
  model::TrainResult train;
};

// One local round: train from the supplied global, sign the delta under the
// round credential.  Throws ErrorCode::NoCredential past the credential
// horizon.  Deterministic in (global, dataset, creds, hyper.seed).
ClientRoundResult client_round(const ClientState& state, const model::ParamVector& global,
                               std::uint32_t round, const ClientRoundOptions& opt);

// Expands an honest update into the client's attack behavior.  Duplicate
// emits n identical copies under one certificate; Poison rescales and
// re-signs the delta; Silent submits nothing.
std::vector<UpdateMessage> make_attack(const ClientState& state, const UpdateMessage& base,
                                       const AttackProfile& profile);

// Adopts the finalized global checkpoint.  Idempotent.
void apply_global(ClientState& state, const model::ParamVector& finalized);

}  // namespace bsrt::fed
