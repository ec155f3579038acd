#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsrt/consensus.hpp"
#include "bsrt/crypto.hpp"

namespace bsrt::ledger {

// Fixed wire sizes.  A block serializes as
//   framing(28) | header(52) | commits(107 each) | record(108) | receipts(11 each)
// framing = magic "BSB1"(4) | block_len u32 | commit_count u16 | receipt_count
// u16 | checksum(16).  The checksum is the first 16 bytes of SHA-256 over the
// whole block minus the checksum field itself, so any byte flip inside a
// block is detectable even without the next block's back-link.
inline constexpr std::size_t kFramingBytes = 28;
inline constexpr std::size_t kHeaderBytes = 52;
inline constexpr std::size_t kReceiptBytes = 11;
inline constexpr std::size_t kBlockFixedBytes = 188;  // framing + header + record
inline constexpr std::uint8_t kReceiptFraming = 0x03;
inline constexpr std::uint64_t kMsPerRound = 1000;  // logical timestamps

struct BlockHeader {
  std::uint64_t index = 0;
  crypto::Digest prev_hash{};  // digest of the previous block's full bytes
  std::uint32_t round = 0;
  std::uint64_t timestamp_ms = 0;
};

struct Block {
  BlockHeader header;
  std::vector<consensus::CommitAggregateTx> commits;
  consensus::RecordRoundTx record;
  std::vector<crypto::LinkTag> receipts;

  std::size_t wire_size() const {
    return kBlockFixedBytes + 107 * commits.size() + kReceiptBytes * receipts.size();
  }
  Bytes wire_bytes() const;
  static Block from_wire(std::span<const std::uint8_t> bytes);
};

// Append-only hash-linked chain.  Blocks are only ever added at the tip.
class Ledger {
 public:
  std::size_t size() const { return blocks_.size(); }
  const Block& block(std::size_t i) const { return blocks_.at(i); }
  std::uint64_t total_bytes() const { return total_bytes_; }

  // Builds the next block from a consensus outcome and appends it.  Throws
  // LedgerBadProposerSignature / LedgerQuorumMismatch / LedgerDuplicateRound.
  void append(const consensus::ConsensusOutcome& outcome,
              std::span<const crypto::LinkTag> receipts,
              std::span<const crypto::PublicKey> rsu_pks);

  // Appends a pre-built block after full validation; additionally throws
  // LedgerBrokenChain on a bad back-link or index.
  void append_block(Block block, std::span<const crypto::PublicKey> rsu_pks);

  Bytes to_bytes() const;
  static Ledger from_bytes(std::span<const std::uint8_t> bytes);  // structural parse only

  void write_file(const std::filesystem::path& path) const;
  static Ledger read_file(const std::filesystem::path& path);

 private:
  std::vector<Block> blocks_;
  std::vector<Bytes> block_bytes_;  // serialized form, kept for back-links
  std::uint64_t total_bytes_ = 0;
};

struct KeyContext {
  crypto::GroupVerificationKey gvk{};
  std::vector<crypto::PublicKey> rsu_pks;
};

struct ChainVerifyResult {
  bool ok = true;
  std::int64_t first_bad_index = -1;
  std::string reason;
};

// Walks raw ledger bytes: structure, checksums, back-links, per-block vote
// arithmetic.  With keys it also checks every commit and proposer signature.
// Reports the first failing block index.
ChainVerifyResult verify_chain(std::span<const std::uint8_t> ledger_bytes,
                               const KeyContext* keys);

// Closed-form on-chain footprint in KB (1 KB = 1000 bytes): rounds * (188 +
// 107 * num_rsus + 11 * floor(num_clients * acceptance_rate)) / 1000.
double ledger_size_kb(std::uint32_t num_clients, std::uint32_t num_rsus, std::uint32_t rounds,
                      double acceptance_rate = 1.0);

// Off-chain checkpoint store: one full-precision global model, overwritten
// each round, so its footprint stays constant while the chain grows linearly.
class OffchainStore {
 public:
  void store(const model::EncoderConfig& cfg, const model::ParamVector& params);
  bool has_checkpoint() const { return !bytes_.empty(); }
  const Bytes& checkpoint_bytes() const { return bytes_; }
  std::size_t size_bytes() const { return bytes_.size(); }

 private:
  Bytes bytes_;
};

}  // namespace bsrt::ledger
