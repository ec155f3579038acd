#include "bsrt/ledger.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bsrt/errors.hpp"

namespace bsrt::ledger {

namespace {

constexpr char kBlockMagic[4] = {'B', 'S', 'B', '1'};
constexpr std::size_t kChecksumBytes = 16;
constexpr std::size_t kChecksumOffset = kFramingBytes - kChecksumBytes;

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16_le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

std::array<std::uint8_t, kChecksumBytes> block_checksum(std::span<const std::uint8_t> block) {
  ByteWriter w;
  w.raw(block.subspan(0, kChecksumOffset));
  w.raw(block.subspan(kFramingBytes));
  crypto::Digest d = crypto::digest(w.bytes());
  std::array<std::uint8_t, kChecksumBytes> out;
  std::memcpy(out.data(), d.data(), kChecksumBytes);
  return out;
}

void write_header(ByteWriter& w, const BlockHeader& h) {
  w.u64(h.index);
  w.arr(h.prev_hash);
  w.u32(h.round);
  w.u64(h.timestamp_ms);
}

BlockHeader read_header(ByteReader& r) {
  BlockHeader h;
  h.index = r.u64();
  h.prev_hash = r.arr<crypto::kDigestBytes>();
  h.round = r.u32();
  h.timestamp_ms = r.u64();
  return h;
}

}  // namespace

Bytes Block::wire_bytes() const {
  if (commits.size() > 0xffff || receipts.size() > 0xffff)
    throw Error(ErrorCode::InvalidArgument, "block: too many transactions");

  ByteWriter body;
  write_header(body, header);
  for (const auto& tx : commits) body.raw(tx.wire_bytes());
  body.raw(record.wire_bytes());
  for (const auto& tag : receipts) {
    body.arr(tag);
    body.u8(kReceiptFraming);
  }

  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kBlockMagic), 4));
  w.u32(static_cast<std::uint32_t>(kFramingBytes + body.size()));
  w.u16(static_cast<std::uint16_t>(commits.size()));
  w.u16(static_cast<std::uint16_t>(receipts.size()));
  for (std::size_t i = 0; i < kChecksumBytes; ++i) w.u8(0);
  w.raw(body.bytes());

  Bytes out = w.take();
  auto sum = block_checksum(out);
  std::memcpy(out.data() + kChecksumOffset, sum.data(), kChecksumBytes);
  return out;
}

Block Block::from_wire(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.arr<4>();
  if (std::memcmp(magic.data(), kBlockMagic, 4) != 0)
    throw Error(ErrorCode::ParseError, "block: bad magic");
  const std::uint32_t len = r.u32();
  const std::uint16_t commit_count = r.u16();
  const std::uint16_t receipt_count = r.u16();
  r.raw(kChecksumBytes);  // checksum checked by verify_chain, not the parser

  const std::size_t expected =
      kBlockFixedBytes + 107u * commit_count + kReceiptBytes * receipt_count;
  if (len != expected || bytes.size() != expected)
    throw Error(ErrorCode::ParseError, "block: length mismatch");

  Block b;
  b.header = read_header(r);
  for (std::uint16_t i = 0; i < commit_count; ++i)
    b.commits.push_back(consensus::CommitAggregateTx::from_wire(r));
  b.record = consensus::RecordRoundTx::from_wire(r);
  for (std::uint16_t i = 0; i < receipt_count; ++i) {
    b.receipts.push_back(r.arr<crypto::kLinkTagBytes>());
    if (r.u8() != kReceiptFraming)
      throw Error(ErrorCode::ParseError, "receipt: bad framing byte");
  }
  if (r.remaining() != 0) throw Error(ErrorCode::ParseError, "block: trailing bytes");
  return b;
}

void Ledger::append(const consensus::ConsensusOutcome& outcome,
                    std::span<const crypto::LinkTag> receipts,
                    std::span<const crypto::PublicKey> rsu_pks) {
  Block b;
  b.header.index = blocks_.size();
  b.header.prev_hash =
      blocks_.empty() ? crypto::Digest{} : crypto::digest(block_bytes_.back());
  b.header.round = outcome.record.round;
  b.header.timestamp_ms = static_cast<std::uint64_t>(outcome.record.round) * kMsPerRound;
  b.commits = outcome.commits;
  b.record = outcome.record;
  b.receipts.assign(receipts.begin(), receipts.end());
  append_block(std::move(b), rsu_pks);
}

void Ledger::append_block(Block block, std::span<const crypto::PublicKey> rsu_pks) {
  if (block.record.proposer_id >= rsu_pks.size() ||
      !crypto::rsu_verify(rsu_pks[block.record.proposer_id], block.record.signed_bytes(),
                          block.record.proposer_sig))
    throw Error(ErrorCode::LedgerBadProposerSignature, "append: invalid proposer signature");

  const std::uint32_t committee = static_cast<std::uint32_t>(rsu_pks.size());
  const bool has_quorum =
      std::popcount(block.record.supporter_bitmap) >=
      static_cast<int>(consensus::quorum_threshold(committee));
  if (committee < 32 && (block.record.supporter_bitmap >> committee) != 0)
    throw Error(ErrorCode::LedgerQuorumMismatch, "append: supporter bit beyond committee");
  if (has_quorum != (block.record.quorum == 1))
    throw Error(ErrorCode::LedgerQuorumMismatch, "append: quorum flag contradicts vote count");

  for (const Block& prev : blocks_)
    if (prev.header.round == block.header.round)
      throw Error(ErrorCode::LedgerDuplicateRound, "append: round already recorded");

  const crypto::Digest want_prev =
      blocks_.empty() ? crypto::Digest{} : crypto::digest(block_bytes_.back());
  if (block.header.index != blocks_.size() || block.header.prev_hash != want_prev)
    throw Error(ErrorCode::LedgerBrokenChain, "append: back-link does not match tip");

  Bytes bytes = block.wire_bytes();
  total_bytes_ += bytes.size();
  block_bytes_.push_back(std::move(bytes));
  blocks_.push_back(std::move(block));
}

Bytes Ledger::to_bytes() const {
  Bytes out;
  out.reserve(total_bytes_);
  for (const Bytes& b : block_bytes_) out.insert(out.end(), b.begin(), b.end());
  return out;
}

Ledger Ledger::from_bytes(std::span<const std::uint8_t> bytes) {
  Ledger l;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < kFramingBytes)
      throw Error(ErrorCode::ParseError, "ledger: truncated framing");
    const std::uint32_t len = read_u32_le(bytes.data() + pos + 4);
    if (len < kBlockFixedBytes || pos + len > bytes.size())
      throw Error(ErrorCode::ParseError, "ledger: bad block length");
    Block b = Block::from_wire(bytes.subspan(pos, len));
    l.block_bytes_.emplace_back(bytes.begin() + pos, bytes.begin() + pos + len);
    l.blocks_.push_back(std::move(b));
    l.total_bytes_ += len;
    pos += len;
  }
  return l;
}

void Ledger::write_file(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open ledger file for writing");
  Bytes bytes = to_bytes();
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoError, "ledger write failed");
}

Ledger Ledger::read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open ledger file");
  Bytes bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

namespace {

ChainVerifyResult fail_at(std::size_t index, std::string reason) {
  return ChainVerifyResult{false, static_cast<std::int64_t>(index), std::move(reason)};
}

}  // namespace

ChainVerifyResult verify_chain(std::span<const std::uint8_t> ledger_bytes,
                               const KeyContext* keys) {
  std::size_t pos = 0;
  std::size_t index = 0;
  crypto::Digest want_prev{};
  std::int64_t prev_round = -1;

  while (pos < ledger_bytes.size()) {
    if (ledger_bytes.size() - pos < kFramingBytes) return fail_at(index, "truncated framing");
    std::span<const std::uint8_t> head = ledger_bytes.subspan(pos, kFramingBytes);
    if (std::memcmp(head.data(), kBlockMagic, 4) != 0) return fail_at(index, "bad magic");
    const std::uint32_t len = read_u32_le(head.data() + 4);
    const std::uint16_t commit_count = read_u16_le(head.data() + 8);
    const std::uint16_t receipt_count = read_u16_le(head.data() + 10);
    const std::size_t expected =
        kBlockFixedBytes + 107u * commit_count + kReceiptBytes * receipt_count;
    if (len != expected || pos + len > ledger_bytes.size())
      return fail_at(index, "bad block length");

    std::span<const std::uint8_t> block_span = ledger_bytes.subspan(pos, len);
    auto sum = block_checksum(block_span);
    if (std::memcmp(sum.data(), block_span.data() + kChecksumOffset, kChecksumBytes) != 0)
      return fail_at(index, "checksum mismatch");

    Block b;
    try {
      b = Block::from_wire(block_span);
    } catch (const Error& e) {
      return fail_at(index, e.what());
    }

    if (b.header.index != index) return fail_at(index, "header index mismatch");
    if (b.header.prev_hash != want_prev) return fail_at(index, "broken back-link");
    if (static_cast<std::int64_t>(b.header.round) <= prev_round)
      return fail_at(index, "round not increasing");
    if (b.header.timestamp_ms != static_cast<std::uint64_t>(b.header.round) * kMsPerRound)
      return fail_at(index, "timestamp does not match round");
    if (b.record.round != b.header.round) return fail_at(index, "record round mismatch");
    for (const auto& tx : b.commits)
      if (tx.round != b.header.round) return fail_at(index, "commit round mismatch");
    for (std::size_t i = 1; i < b.commits.size(); ++i)
      if (b.commits[i].rsu_id <= b.commits[i - 1].rsu_id)
        return fail_at(index, "commit rsu ids not strictly increasing");

    // Supporter bits must point at in-block commits carrying the final hash.
    if (b.record.quorum == 1) {
      for (std::uint32_t j = 0; j < 32; ++j) {
        if ((b.record.supporter_bitmap & (1u << j)) == 0) continue;
        bool found = false;
        for (const auto& tx : b.commits)
          if (tx.rsu_id == j && tx.local_hash == b.record.final_hash) found = true;
        if (!found) return fail_at(index, "supporter bit without matching commit");
      }
      for (const auto& tx : b.commits)
        if (tx.local_hash == b.record.final_hash &&
            tx.accepted_count != b.receipts.size())
          return fail_at(index, "supporter accepted count contradicts receipts");
    }

    if (keys != nullptr) {
      const std::uint32_t committee = static_cast<std::uint32_t>(keys->rsu_pks.size());
      if (committee == 0) return fail_at(index, "empty committee");
      for (const auto& tx : b.commits) {
        if (tx.rsu_id >= committee) return fail_at(index, "commit rsu id out of range");
        if (!crypto::rsu_verify(keys->rsu_pks[tx.rsu_id], tx.signed_bytes(), tx.rsu_sig))
          return fail_at(index, "bad commit signature");
      }
      if (b.record.proposer_id >= committee)
        return fail_at(index, "proposer id out of range");
      if (!crypto::rsu_verify(keys->rsu_pks[b.record.proposer_id], b.record.signed_bytes(),
                              b.record.proposer_sig))
        return fail_at(index, "bad proposer signature");
      if (committee < 32 && (b.record.supporter_bitmap >> committee) != 0)
        return fail_at(index, "supporter bit beyond committee");
      const bool has_quorum =
          std::popcount(b.record.supporter_bitmap) >=
          static_cast<int>(consensus::quorum_threshold(committee));
      if (has_quorum != (b.record.quorum == 1))
        return fail_at(index, "quorum flag contradicts vote count");
    }

    want_prev = crypto::digest(block_span);
    prev_round = b.header.round;
    pos += len;
    ++index;
  }
  return ChainVerifyResult{};
}

double ledger_size_kb(std::uint32_t num_clients, std::uint32_t num_rsus, std::uint32_t rounds,
                      double acceptance_rate) {
  if (num_clients < 1 || num_rsus < 1 || rounds < 1)
    throw Error(ErrorCode::InvalidArgument, "ledger_size_kb: all cardinalities must be >= 1");
  if (!(acceptance_rate >= 0.0 && acceptance_rate <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "ledger_size_kb: acceptance rate out of range");
  const double accepted = std::floor(static_cast<double>(num_clients) * acceptance_rate);
  const double per_block = 188.0 + 107.0 * num_rsus + 11.0 * accepted;
  return static_cast<double>(rounds) * per_block / 1000.0;
}

void OffchainStore::store(const model::EncoderConfig& cfg, const model::ParamVector& params) {
  bytes_ = model::serialize_params(cfg, params);
}

}  // namespace bsrt::ledger
