#include "bsrt/consensus.hpp"

#include <algorithm>
#include <map>

#include "bsrt/errors.hpp"
#include "bsrt/rng.hpp"

namespace bsrt::consensus {

namespace {

// Forged commits carry a digest of labeled pseudo-random bytes: wrong with
// overwhelming probability, yet reproducible for a given run seed.
crypto::Digest forged_digest(std::uint64_t run_seed, std::uint16_t rsu_id, std::uint32_t round) {
  ByteWriter w;
  w.str("forged-aggregate");
  w.u64(run_seed);
  w.u16(rsu_id);
  w.u32(round);
  return crypto::digest(w.bytes());
}

}  // namespace

ByzantineMode parse_byzantine_mode(const std::string& text) {
  if (text == "honest") return ByzantineMode::Honest;
  if (text == "forge_hash") return ByzantineMode::ForgeHash;
  if (text == "equivocate") return ByzantineMode::Equivocate;
  if (text == "silent") return ByzantineMode::Silent;
  throw Error(ErrorCode::ConfigError, "rsu mode: unknown kind '" + text + "'");
}

std::string to_string(ByzantineMode mode) {
  switch (mode) {
    case ByzantineMode::Honest:
      return "honest";
    case ByzantineMode::ForgeHash:
      return "forge_hash";
    case ByzantineMode::Equivocate:
      return "equivocate";
    case ByzantineMode::Silent:
      return "silent";
  }
  return "honest";
}

VerifiedSet verify_updates(std::span<const fed::UpdateMessage> msgs,
                           const crypto::GroupVerificationKey& gvk, std::uint32_t round) {
  VerifiedSet out;

  // Candidates surviving scope and signature checks, keyed by link tag.
  struct Candidate {
    const fed::UpdateMessage* msg;
    crypto::LinkTag tag;
  };
  std::vector<Candidate> valid;
  for (const fed::UpdateMessage& m : msgs) {
    if (m.round != round || m.envelope.round != round || m.envelope.cert.round != round) {
      out.rejected.emplace_back(m, RejectReason::WrongRound);
      continue;
    }
    if (m.envelope.payload_digest !=
            fed::update_payload_digest(m.round, m.delta, m.declared_size) ||
        !crypto::gs_verify(gvk, m.envelope)) {
      out.rejected.emplace_back(m, RejectReason::BadSignature);
      continue;
    }
    valid.push_back(Candidate{&m, crypto::link_tag(m.envelope)});
  }

  // One update per link tag: the lexicographically smallest payload digest
  // wins, making the outcome independent of arrival order.
  std::stable_sort(valid.begin(), valid.end(), [](const Candidate& a, const Candidate& b) {
    if (a.tag != b.tag) return a.tag < b.tag;
    return a.msg->envelope.payload_digest < b.msg->envelope.payload_digest;
  });
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (i > 0 && valid[i].tag == valid[i - 1].tag)
      out.rejected.emplace_back(*valid[i].msg, RejectReason::Duplicate);
    else
      out.accepted.push_back(*valid[i].msg);
  }
  return out;
}

std::optional<model::ParamVector> aggregate(const model::ParamVector& global,
                                            const VerifiedSet& verified) {
  if (verified.accepted.empty()) return std::nullopt;

  double total = 0.0;
  for (const fed::UpdateMessage& m : verified.accepted)
    total += static_cast<double>(m.declared_size);
  if (total <= 0.0)
    throw Error(ErrorCode::InvalidArgument, "aggregate: declared sizes sum to zero");

  model::ParamVector out = global;
  for (const fed::UpdateMessage& m : verified.accepted) {
    if (m.delta.size() != global.size())
      throw Error(ErrorCode::InvalidArgument, "aggregate: delta size mismatch");
    out.axpy(static_cast<double>(m.declared_size) / total, m.delta);
  }
  return out;
}

Bytes CommitAggregateTx::signed_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.u16(rsu_id);
  w.arr(local_hash);
  w.u32(accepted_count);
  return w.take();
}

Bytes CommitAggregateTx::wire_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.u16(rsu_id);
  w.arr(local_hash);
  w.u32(accepted_count);
  w.arr(rsu_sig);
  w.u8(kFraming);
  return w.take();
}

CommitAggregateTx CommitAggregateTx::from_wire(ByteReader& r) {
  CommitAggregateTx tx;
  tx.round = r.u32();
  tx.rsu_id = r.u16();
  tx.local_hash = r.arr<crypto::kDigestBytes>();
  tx.accepted_count = r.u32();
  tx.rsu_sig = r.arr<crypto::kSignatureBytes>();
  if (r.u8() != kFraming) throw Error(ErrorCode::ParseError, "commit: bad framing byte");
  return tx;
}

Bytes RecordRoundTx::signed_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.arr(final_hash);
  w.u32(supporter_bitmap);
  w.u8(quorum);
  w.u16(proposer_id);
  return w.take();
}

Bytes RecordRoundTx::wire_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.arr(final_hash);
  w.u32(supporter_bitmap);
  w.u8(quorum);
  w.u16(proposer_id);
  w.arr(proposer_sig);
  w.u8(kFraming);
  return w.take();
}

RecordRoundTx RecordRoundTx::from_wire(ByteReader& r) {
  RecordRoundTx tx;
  tx.round = r.u32();
  tx.final_hash = r.arr<crypto::kDigestBytes>();
  tx.supporter_bitmap = r.u32();
  tx.quorum = r.u8();
  tx.proposer_id = r.u16();
  tx.proposer_sig = r.arr<crypto::kSignatureBytes>();
  if (r.u8() != kFraming) throw Error(ErrorCode::ParseError, "record: bad framing byte");
  return tx;
}

crypto::Digest model_digest(const model::ParamVector& p) { return model::param_digest(p); }

CommitAggregateTx make_commit(const crypto::RsuKeyPair& keys, std::uint32_t round,
                              const crypto::Digest& local_hash, std::uint32_t accepted_count) {
  CommitAggregateTx tx;
  tx.round = round;
  tx.rsu_id = keys.rsu_id;
  tx.local_hash = local_hash;
  tx.accepted_count = accepted_count;
  tx.rsu_sig = crypto::rsu_sign(keys, tx.signed_bytes());
  return tx;
}

std::uint32_t quorum_threshold(std::uint32_t committee_size) {
  if (committee_size < 1)
    throw Error(ErrorCode::InvalidArgument, "quorum: committee must be >= 1");
  return committee_size / 2 + 1;
}

ConsensusOutcome bft_round(std::span<const CommitAggregateTx> commits,
                           std::uint32_t committee_size, std::uint32_t round,
                           const crypto::RsuKeyPair& proposer,
                           std::span<const crypto::PublicKey> rsu_pks,
                           const std::vector<std::pair<crypto::Digest, model::ParamVector>>& models) {
  if (rsu_pks.size() != committee_size)
    throw Error(ErrorCode::InvalidArgument, "bft_round: key count does not match committee");
  if (committee_size > 32)
    throw Error(ErrorCode::InvalidArgument, "bft_round: supporter bitmap holds at most 32 RSUs");

  // Keep valid, correctly signed commits for this round; per RSU only the
  // first in serialized-byte order counts.
  std::vector<const CommitAggregateTx*> counted;
  for (std::uint16_t id = 0; id < committee_size; ++id) {
    const CommitAggregateTx* chosen = nullptr;
    Bytes chosen_bytes;
    for (const CommitAggregateTx& tx : commits) {
      if (tx.rsu_id != id || tx.round != round) continue;
      if (!crypto::rsu_verify(rsu_pks[id], tx.signed_bytes(), tx.rsu_sig)) continue;
      Bytes b = tx.wire_bytes();
      if (chosen == nullptr || b < chosen_bytes) {
        chosen = &tx;
        chosen_bytes = std::move(b);
      }
    }
    if (chosen != nullptr) counted.push_back(chosen);
  }

  std::map<crypto::Digest, std::uint32_t> votes;
  for (const CommitAggregateTx* tx : counted) ++votes[tx->local_hash];

  const std::uint32_t threshold = quorum_threshold(committee_size);
  const crypto::Digest* winner = nullptr;
  for (const auto& [hash, count] : votes)
    if (count >= threshold) winner = &hash;

  ConsensusOutcome out;
  for (const CommitAggregateTx* tx : counted) out.commits.push_back(*tx);

  out.record.round = round;
  out.record.proposer_id = proposer.rsu_id;
  if (winner != nullptr) {
    const model::ParamVector* finalized = nullptr;
    for (const auto& [hash, params] : models)
      if (hash == *winner) {
        finalized = &params;
        break;
      }
    // A quorum hash with no corresponding model cannot be adopted; the round
    // then finalizes nothing.
    if (finalized != nullptr) {
      out.record.final_hash = *winner;
      out.record.quorum = 1;
      for (const CommitAggregateTx* tx : counted)
        if (tx->local_hash == *winner)
          out.record.supporter_bitmap |= (1u << tx->rsu_id);
      out.finalized = *finalized;
    }
  }
  out.record.proposer_sig = crypto::rsu_sign(proposer, out.record.signed_bytes());
  return out;
}

RsuRoundOutput rsu_process_round(const RsuState& rsu, std::span<const fed::UpdateMessage> msgs,
                                 std::uint32_t round, std::uint64_t run_seed) {
  RsuRoundOutput out;
  out.verified = verify_updates(msgs, rsu.gvk, round);
  out.local_model = aggregate(rsu.current_global, out.verified);

  if (rsu.mode == ByzantineMode::Silent) return out;

  const crypto::Digest honest_hash =
      model_digest(out.local_model ? *out.local_model : rsu.current_global);
  const std::uint32_t count = static_cast<std::uint32_t>(out.verified.accepted.size());

  switch (rsu.mode) {
    case ByzantineMode::Honest:
      out.commits.push_back(make_commit(rsu.keys, round, honest_hash, count));
      break;
    case ByzantineMode::ForgeHash: {
      out.commits.push_back(
          make_commit(rsu.keys, round, forged_digest(run_seed, rsu.rsu_id, round), count));
      break;
    }
    case ByzantineMode::Equivocate: {
      out.commits.push_back(make_commit(rsu.keys, round, honest_hash, count));
      out.commits.push_back(
          make_commit(rsu.keys, round, forged_digest(run_seed, rsu.rsu_id, round), count));
      break;
    }
    case ByzantineMode::Silent:
      break;
  }
  return out;
}

}  // namespace bsrt::consensus
