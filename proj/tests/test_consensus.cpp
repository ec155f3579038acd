#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

#include "bsrt/consensus.hpp"
#include "bsrt/crypto.hpp"
#include "bsrt/data.hpp"
#include "bsrt/errors.hpp"
#include "bsrt/fed.hpp"
#include "bsrt/rng.hpp"

using namespace bsrt;
using namespace bsrt::consensus;

namespace {

// A small federation whose updates are cheap to mint: 2-token model, few
// parameters, three clients.
struct Net {
  model::EncoderConfig cfg{2, 4, 2, 2};
  model::RetentionSchedule sched{1.0, 1.0, 4};
  crypto::CaInit ca = crypto::ca_init(3, 4, 5, 11);
  std::vector<fed::ClientState> clients;
  model::ParamVector global;

  Net() {
    data::PartitionSpec spec = data::uniform_pattern(3, 4, 2);
    auto part = data::synth_partition(spec, cfg, 1, 5);
    global = model::random_init(cfg, 0.05, 2);
    for (std::uint32_t i = 0; i < 3; ++i) {
      fed::ClientState c;
      c.client_id = i;
      c.creds = ca.clients[i];
      c.dataset = part.clients[i];
      c.declared_size = static_cast<std::uint32_t>(c.dataset.size());
      c.current_global = global;
      clients.push_back(std::move(c));
    }
  }

  fed::UpdateMessage update(std::uint32_t client, std::uint32_t round,
                            std::uint64_t seed = 1) const {
    fed::ClientRoundOptions o;
    o.cfg = cfg;
    o.sched = sched;
    o.hyper = model::TrainHyper{2, 0.05, seed};
    o.epochs = 1;
    return fed::client_round(clients[client], global, round, o).message;
  }

  std::vector<crypto::PublicKey> pks(std::uint32_t k) const {
    std::vector<crypto::PublicKey> out;
    for (std::uint32_t i = 0; i < k; ++i) out.push_back(ca.rsus[i].pk);
    return out;
  }
};

}  // namespace

TEST_CASE("verification screens round scope, signatures, and duplicates") {
  Net net;
  fed::UpdateMessage u0 = net.update(0, 1);
  fed::UpdateMessage u1 = net.update(1, 1);
  fed::UpdateMessage stale = net.update(2, 2);  // signed for a different round

  fed::UpdateMessage forged = net.update(2, 1);
  forged.delta[0] += 1.0;  // digest no longer matches the signature

  std::vector<fed::UpdateMessage> msgs{u1, forged, u0, stale, u0};  // order scrambled
  VerifiedSet vs = verify_updates(msgs, net.ca.gvk, 1);

  CHECK(vs.accepted.size() == 2);
  REQUIRE(vs.rejected.size() == 3);
  int wrong_round = 0, bad_sig = 0, dup = 0;
  for (const auto& [m, why] : vs.rejected) {
    if (why == RejectReason::WrongRound) ++wrong_round;
    if (why == RejectReason::BadSignature) ++bad_sig;
    if (why == RejectReason::Duplicate) ++dup;
  }
  CHECK(wrong_round == 1);
  CHECK(bad_sig == 1);
  CHECK(dup == 1);

  // Canonical order: ascending link tag, independent of arrival order.
  auto t0 = crypto::link_tag(vs.accepted[0].envelope);
  auto t1 = crypto::link_tag(vs.accepted[1].envelope);
  CHECK(std::lexicographical_compare(t0.begin(), t0.end(), t1.begin(), t1.end()));

  std::vector<fed::UpdateMessage> reordered{u0, stale, u1, forged, u0};
  VerifiedSet vs2 = verify_updates(reordered, net.ca.gvk, 1);
  REQUIRE(vs2.accepted.size() == 2);
  CHECK(vs2.accepted[0].wire_bytes() == vs.accepted[0].wire_bytes());
  CHECK(vs2.accepted[1].wire_bytes() == vs.accepted[1].wire_bytes());
}

TEST_CASE("one accepted update per link tag, smallest payload digest wins") {
  Net net;
  fed::UpdateMessage a = net.update(0, 1, /*seed=*/1);
  fed::UpdateMessage b = net.update(0, 1, /*seed=*/2);  // same credential, different delta
  REQUIRE_FALSE(a.envelope.payload_digest == b.envelope.payload_digest);

  const fed::UpdateMessage& smaller =
      std::lexicographical_compare(a.envelope.payload_digest.begin(),
                                   a.envelope.payload_digest.end(),
                                   b.envelope.payload_digest.begin(),
                                   b.envelope.payload_digest.end())
          ? a
          : b;

  for (auto msgs : {std::vector<fed::UpdateMessage>{a, b}, std::vector<fed::UpdateMessage>{b, a}}) {
    VerifiedSet vs = verify_updates(msgs, net.ca.gvk, 1);
    REQUIRE(vs.accepted.size() == 1);
    CHECK(vs.accepted[0].envelope.payload_digest == smaller.envelope.payload_digest);
    CHECK(vs.rejected.size() == 1);
    CHECK(vs.rejected[0].second == RejectReason::Duplicate);
  }
}

TEST_CASE("aggregation weights by declared size over the accepted set") {
  // Hand-built verified set with trivial deltas: sizes 100 and 300 give
  // weights 0.25 and 0.75.
  model::ParamVector global{{1.0, 2.0}};
  fed::UpdateMessage m1, m2;
  m1.declared_size = 100;
  m1.delta = model::ParamVector{{4.0, 0.0}};
  m2.declared_size = 300;
  m2.delta = model::ParamVector{{0.0, -4.0}};
  VerifiedSet vs;
  vs.accepted = {m1, m2};

  auto out = aggregate(global, vs);
  REQUIRE(out.has_value());
  CHECK((*out)[0] == doctest::Approx(1.0 + 0.25 * 4.0).epsilon(1e-15));
  CHECK((*out)[1] == doctest::Approx(2.0 - 0.75 * 4.0).epsilon(1e-15));

  // Empty set: nothing to apply.
  CHECK_FALSE(aggregate(global, VerifiedSet{}).has_value());

  // All-zero declared sizes cannot be renormalized.
  vs.accepted[0].declared_size = 0;
  vs.accepted[1].declared_size = 0;
  CHECK_THROWS_AS(aggregate(global, vs), Error);

  // Mismatched delta lengths are an invariant violation, not silent UB.
  vs.accepted[0].declared_size = 1;
  vs.accepted[1].declared_size = 1;
  vs.accepted[1].delta = model::ParamVector{{1.0}};
  CHECK_THROWS_AS(aggregate(global, vs), Error);
}

TEST_CASE("commit and record transactions have pinned wire sizes and round-trip") {
  Net net;
  crypto::Digest h = model_digest(net.global);
  CommitAggregateTx c = make_commit(net.ca.rsus[1], 6, h, 3);
  CHECK(c.rsu_id == 1);
  Bytes cw = c.wire_bytes();
  CHECK(cw.size() == CommitAggregateTx::kWireBytes);
  CHECK(cw.size() == 107);
  CHECK(cw.back() == CommitAggregateTx::kFraming);
  ByteReader r1(cw);
  CommitAggregateTx c2 = CommitAggregateTx::from_wire(r1);
  CHECK(c2.wire_bytes() == cw);
  CHECK(crypto::rsu_verify(net.ca.rsus[1].pk, c2.signed_bytes(), c2.rsu_sig));

  RecordRoundTx rec;
  rec.round = 6;
  rec.final_hash = h;
  rec.supporter_bitmap = 0b101;
  rec.quorum = 1;
  rec.proposer_id = 2;
  rec.proposer_sig = crypto::rsu_sign(net.ca.rsus[2], rec.signed_bytes());
  Bytes rw = rec.wire_bytes();
  CHECK(rw.size() == RecordRoundTx::kWireBytes);
  CHECK(rw.size() == 108);
  CHECK(rw.back() == RecordRoundTx::kFraming);
  ByteReader r2(rw);
  RecordRoundTx rec2 = RecordRoundTx::from_wire(r2);
  CHECK(rec2.wire_bytes() == rw);
  CHECK(crypto::rsu_verify(net.ca.rsus[2].pk, rec2.signed_bytes(), rec2.proposer_sig));
}

TEST_CASE("quorum threshold is a strict majority of the committee") {
  CHECK(quorum_threshold(1) == 1);
  CHECK(quorum_threshold(2) == 2);
  CHECK(quorum_threshold(3) == 2);
  CHECK(quorum_threshold(4) == 3);
  CHECK(quorum_threshold(5) == 3);
  CHECK(quorum_threshold(7) == 4);
  CHECK(quorum_threshold(9) == 5);
}

TEST_CASE("bft finalizes the majority hash and records supporters") {
  Net net;
  model::ParamVector m = net.global;
  crypto::Digest h = model_digest(m);
  std::vector<std::pair<crypto::Digest, model::ParamVector>> models{{h, m}};

  std::vector<CommitAggregateTx> commits;
  for (std::uint16_t i = 0; i < 3; ++i) commits.push_back(make_commit(net.ca.rsus[i], 2, h, 3));

  ConsensusOutcome out = bft_round(commits, 3, 2, net.ca.rsus[2], net.pks(3), models);
  CHECK(out.record.quorum == 1);
  CHECK(out.record.final_hash == h);
  CHECK(out.record.supporter_bitmap == 0b111);
  CHECK(out.record.proposer_id == 2);
  REQUIRE(out.finalized.has_value());
  CHECK(model::param_digest(*out.finalized) == h);
  CHECK(out.commits.size() == 3);
  CHECK(crypto::rsu_verify(net.ca.rsus[2].pk, out.record.signed_bytes(), out.record.proposer_sig));
}

TEST_CASE("bft with dissent finalizes when a strict majority agrees") {
  Net net;
  model::ParamVector m = net.global;
  crypto::Digest h = model_digest(m);
  crypto::Digest other{};
  other[0] = 0xFF;
  std::vector<std::pair<crypto::Digest, model::ParamVector>> models{{h, m}};

  std::vector<CommitAggregateTx> commits{
      make_commit(net.ca.rsus[0], 1, h, 2),
      make_commit(net.ca.rsus[1], 1, other, 2),
      make_commit(net.ca.rsus[2], 1, h, 2),
  };
  ConsensusOutcome out = bft_round(commits, 3, 1, net.ca.rsus[1], net.pks(3), models);
  CHECK(out.record.quorum == 1);
  CHECK(out.record.final_hash == h);
  CHECK(out.record.supporter_bitmap == 0b101);
  REQUIRE(out.finalized.has_value());
}

TEST_CASE("bft without a majority appends a no-quorum record") {
  Net net;
  crypto::Digest h1{}, h2{}, h3{};
  h1[0] = 1;
  h2[0] = 2;
  h3[0] = 3;
  std::vector<CommitAggregateTx> commits{
      make_commit(net.ca.rsus[0], 4, h1, 1),
      make_commit(net.ca.rsus[1], 4, h2, 1),
      make_commit(net.ca.rsus[2], 4, h3, 1),
  };
  ConsensusOutcome out = bft_round(commits, 3, 4, net.ca.rsus[1], net.pks(3), {});
  CHECK(out.record.quorum == 0);
  CHECK_FALSE(out.finalized.has_value());
  CHECK(out.record.supporter_bitmap == 0);
  // The record is still signed so the no-progress round is auditable.
  CHECK(crypto::rsu_verify(net.ca.rsus[1].pk, out.record.signed_bytes(), out.record.proposer_sig));
}

TEST_CASE("equivocating RSUs are counted once, by first commit in serialized order") {
  Net net;
  model::ParamVector m = net.global;
  crypto::Digest h = model_digest(m);
  crypto::Digest forged{};
  forged[0] = 0xAB;
  std::vector<std::pair<crypto::Digest, model::ParamVector>> models{{h, m}};

  CommitAggregateTx honest1 = make_commit(net.ca.rsus[1], 3, h, 2);
  CommitAggregateTx forged1 = make_commit(net.ca.rsus[1], 3, forged, 2);
  std::vector<CommitAggregateTx> commits{
      make_commit(net.ca.rsus[0], 3, h, 2),
      honest1,
      forged1,
      make_commit(net.ca.rsus[2], 3, h, 2),
  };
  ConsensusOutcome out = bft_round(commits, 3, 3, net.ca.rsus[0], net.pks(3), models);
  CHECK(out.record.quorum == 1);
  CHECK(out.record.final_hash == h);
  // Only one of RSU 1's two commits was counted.
  CHECK(out.commits.size() == 3);
  int rsu1 = 0;
  for (const auto& c : out.commits) rsu1 += (c.rsu_id == 1);
  CHECK(rsu1 == 1);
  // Which one is deterministic: the lexicographically smaller serialization.
  Bytes pick;
  for (const auto& c : out.commits)
    if (c.rsu_id == 1) pick = c.wire_bytes();
  Bytes hb = honest1.wire_bytes(), fb = forged1.wire_bytes();
  CHECK(pick == std::min(hb, fb));
}

TEST_CASE("bft ignores commits with bad signatures, wrong rounds, or foreign ids") {
  Net net;
  crypto::Digest h{};
  h[0] = 9;
  CommitAggregateTx good = make_commit(net.ca.rsus[0], 5, h, 1);
  CommitAggregateTx bad_sig = make_commit(net.ca.rsus[1], 5, h, 1);
  bad_sig.rsu_sig[0] ^= 1;
  CommitAggregateTx wrong_round = make_commit(net.ca.rsus[2], 6, h, 1);
  CommitAggregateTx foreign = make_commit(net.ca.rsus[3], 5, h, 1);  // id 3 outside K=3

  std::vector<CommitAggregateTx> commits{good, bad_sig, wrong_round, foreign};
  ConsensusOutcome out = bft_round(commits, 3, 5, net.ca.rsus[0], net.pks(3), {});
  CHECK(out.commits.size() == 1);
  CHECK(out.commits[0].rsu_id == 0);
  CHECK(out.record.quorum == 0);  // 1 < threshold 2
}

TEST_CASE("quorum hash with no matching candidate model leaves the round unfinalized") {
  Net net;
  crypto::Digest h{};
  h[5] = 7;
  std::vector<CommitAggregateTx> commits;
  for (std::uint16_t i = 0; i < 3; ++i) commits.push_back(make_commit(net.ca.rsus[i], 1, h, 1));
  ConsensusOutcome out = bft_round(commits, 3, 1, net.ca.rsus[0], net.pks(3), {});
  CHECK_FALSE(out.finalized.has_value());
  CHECK(out.record.quorum == 0);
}

TEST_CASE("rsu behavior modes shape the emitted commits") {
  Net net;
  std::vector<fed::UpdateMessage> msgs{net.update(0, 0), net.update(1, 0), net.update(2, 0)};

  RsuState rsu;
  rsu.rsu_id = 0;
  rsu.keys = net.ca.rsus[0];
  rsu.gvk = net.ca.gvk;
  rsu.peer_pks = net.pks(3);
  rsu.current_global = net.global;

  RsuRoundOutput honest = rsu_process_round(rsu, msgs, 0, 77);
  CHECK(honest.verified.accepted.size() == 3);
  REQUIRE(honest.local_model.has_value());
  REQUIRE(honest.commits.size() == 1);
  CHECK(honest.commits[0].local_hash == model_digest(*honest.local_model));
  CHECK(honest.commits[0].accepted_count == 3);

  rsu.mode = ByzantineMode::Silent;
  CHECK(rsu_process_round(rsu, msgs, 0, 77).commits.empty());

  rsu.mode = ByzantineMode::ForgeHash;
  RsuRoundOutput forged = rsu_process_round(rsu, msgs, 0, 77);
  REQUIRE(forged.commits.size() == 1);
  CHECK_FALSE(forged.commits[0].local_hash == honest.commits[0].local_hash);
  CHECK(forged.commits[0].accepted_count == 3);
  // Deterministic forgery: same run seed, same forged hash.
  RsuRoundOutput forged2 = rsu_process_round(rsu, msgs, 0, 77);
  CHECK(forged.commits[0].local_hash == forged2.commits[0].local_hash);

  rsu.mode = ByzantineMode::Equivocate;
  RsuRoundOutput equiv = rsu_process_round(rsu, msgs, 0, 77);
  REQUIRE(equiv.commits.size() == 2);
  CHECK(equiv.commits[0].local_hash == honest.commits[0].local_hash);
  CHECK_FALSE(equiv.commits[1].local_hash == honest.commits[0].local_hash);
}

TEST_CASE("byzantine mode parsing") {
  CHECK(parse_byzantine_mode("honest") == ByzantineMode::Honest);
  CHECK(parse_byzantine_mode("forge_hash") == ByzantineMode::ForgeHash);
  CHECK(parse_byzantine_mode("equivocate") == ByzantineMode::Equivocate);
  CHECK(parse_byzantine_mode("silent") == ByzantineMode::Silent);
  CHECK_THROWS_AS(parse_byzantine_mode("chaotic"), Error);
  CHECK(to_string(ByzantineMode::ForgeHash) == "forge_hash");
}
