#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bsrt/crypto.hpp"
#include "bsrt/fed.hpp"
#include "bsrt/model.hpp"

namespace bsrt::consensus {

enum class ByzantineMode { Honest, ForgeHash, Equivocate, Silent };

ByzantineMode parse_byzantine_mode(const std::string& text);
std::string to_string(ByzantineMode mode);

enum class RejectReason { BadSignature, WrongRound, Duplicate };

struct VerifiedSet {
  std::vector<fed::UpdateMessage> accepted;  // sorted by link tag
  std::vector<std::pair<fed::UpdateMessage, RejectReason>> rejected;
};

// Round-scoped screening: certificates and signatures must verify for the
// current round, and each link tag contributes exactly one update (the one
// with the lexicographically smallest payload digest).  The result depends
// only on the message multiset, never on arrival order.
VerifiedSet verify_updates(std::span<const fed::UpdateMessage> msgs,
                           const crypto::GroupVerificationKey& gvk, std::uint32_t round);

// Data-size-weighted aggregation over the accepted set, applied to the
// current global in link-tag order.  Weights renormalize over the accepted
// updates.  Empty set yields nothing (round falls back to the prior global).
std::optional<model::ParamVector> aggregate(const model::ParamVector& global,
                                            const VerifiedSet& verified);

struct CommitAggregateTx {
  std::uint32_t round = 0;
  std::uint16_t rsu_id = 0;
  crypto::Digest local_hash{};
  std::uint32_t accepted_count = 0;
  crypto::Signature rsu_sig{};

  static constexpr std::size_t kWireBytes = 107;
  static constexpr std::uint8_t kFraming = 0x01;
  Bytes signed_bytes() const;
  Bytes wire_bytes() const;
  static CommitAggregateTx from_wire(ByteReader& r);
};

struct RecordRoundTx {
  std::uint32_t round = 0;
  crypto::Digest final_hash{};
  std::uint32_t supporter_bitmap = 0;
  std::uint8_t quorum = 0;
  std::uint16_t proposer_id = 0;
  crypto::Signature proposer_sig{};

  static constexpr std::size_t kWireBytes = 108;
  static constexpr std::uint8_t kFraming = 0x02;
  Bytes signed_bytes() const;
  Bytes wire_bytes() const;
  static RecordRoundTx from_wire(ByteReader& r);
};

crypto::Digest model_digest(const model::ParamVector& p);

CommitAggregateTx make_commit(const crypto::RsuKeyPair& keys, std::uint32_t round,
                              const crypto::Digest& local_hash, std::uint32_t accepted_count);

// Strict majority of the committee, not of the votes received.
std::uint32_t quorum_threshold(std::uint32_t committee_size);

struct ConsensusOutcome {
  std::optional<model::ParamVector> finalized;  // present iff record.quorum
  RecordRoundTx record;
  std::vector<CommitAggregateTx> commits;  // counted commits, by rsu_id
};

// One-shot vote count over signed commits.  Per RSU only the first commit in
// serialized-byte order counts, so equivocators get one vote and silence gets
// none.  A hash reaching strict majority finalizes; the matching model is
// looked up among the supplied candidates.
ConsensusOutcome bft_round(std::span<const CommitAggregateTx> commits,
                           std::uint32_t committee_size, std::uint32_t round,
                           const crypto::RsuKeyPair& proposer,
                           std::span<const crypto::PublicKey> rsu_pks,
                           const std::vector<std::pair<crypto::Digest, model::ParamVector>>& models);

struct RsuState {
  std::uint16_t rsu_id = 0;
  crypto::RsuKeyPair keys;
  crypto::GroupVerificationKey gvk{};
  std::vector<crypto::PublicKey> peer_pks;
  model::ParamVector current_global;
  ByzantineMode mode = ByzantineMode::Honest;
};

struct RsuRoundOutput {
  VerifiedSet verified;
  std::optional<model::ParamVector> local_model;
  std::vector<CommitAggregateTx> commits;  // empty for Silent, two for Equivocate
};

// Verify, aggregate, and commit per the RSU's behavior mode.  ForgeHash
// commits a pseudo-random digest (seeded, so runs stay reproducible);
// Equivocate emits the honest commit plus a conflicting one.
RsuRoundOutput rsu_process_round(const RsuState& rsu, std::span<const fed::UpdateMessage> msgs,
                                 std::uint32_t round, std::uint64_t run_seed);

}  // namespace bsrt::consensus
