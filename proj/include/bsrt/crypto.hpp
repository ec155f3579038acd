#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bsrt/bytes.hpp"

namespace bsrt::crypto {

inline constexpr std::size_t kPublicKeyBytes = 32;
inline constexpr std::size_t kSecretKeyBytes = 64;
inline constexpr std::size_t kSignatureBytes = 64;
inline constexpr std::size_t kDigestBytes = 32;
inline constexpr std::size_t kLinkTagBytes = 10;

using PublicKey = std::array<std::uint8_t, kPublicKeyBytes>;
using SecretKey = std::array<std::uint8_t, kSecretKeyBytes>;
using Signature = std::array<std::uint8_t, kSignatureBytes>;
using Digest = std::array<std::uint8_t, kDigestBytes>;
using LinkTag = std::array<std::uint8_t, kLinkTagBytes>;
using GroupVerificationKey = PublicKey;

Digest digest(std::span<const std::uint8_t> bytes);

// Round-scoped pseudonym certificate: the authority binds a fresh signing key
// to a single round.  Certificates from different rounds of one client share
// no key material, so updates are linkable within a round and only there.
struct RoundCert {
  std::uint32_t round = 0;
  PublicKey pseudo_pk{};
  Signature ca_sig{};

  Bytes signed_bytes() const;  // round || pseudo_pk
};

struct RoundCredential {
  RoundCert cert;
  SecretKey pseudo_sk{};
};

// One client's certificates for every round of a run, indexed by round.
struct CredentialSet {
  std::vector<RoundCredential> rounds;
};

struct SignedEnvelope {
  std::uint32_t round = 0;
  Digest payload_digest{};
  RoundCert cert;
  Signature sig{};

  Bytes signed_bytes() const;  // round || payload_digest
};

struct RsuKeyPair {
  std::uint16_t rsu_id = 0;
  PublicKey pk{};
  SecretKey sk{};
};

struct CaInit {
  GroupVerificationKey gvk{};
  std::vector<CredentialSet> clients;
  std::vector<RsuKeyPair> rsus;
};

// Issues all per-round client credentials and RSU keys for a run.  Fully
// deterministic in the seed; repeated calls yield identical key material.
CaInit ca_init(std::uint32_t num_clients, std::uint32_t num_rsus, std::uint32_t rounds,
               std::uint64_t seed);

// Signs a payload digest under the round's pseudonym key.  Throws
// ErrorCode::NoCredential when the set holds no certificate for the round.
SignedEnvelope gs_sign(const CredentialSet& creds, std::uint32_t round,
                       const Digest& payload_digest);

// Checks certificate round scope, the authority signature on the certificate,
// and the payload signature under the certified pseudonym key.
bool gs_verify(const GroupVerificationKey& gvk, const SignedEnvelope& env);

LinkTag link_tag(const RoundCert& cert);
LinkTag link_tag(const SignedEnvelope& env);

// True only for envelopes from the same credential in the same round.
bool gs_link(const SignedEnvelope& a, const SignedEnvelope& b);

Signature sign_bytes(const SecretKey& sk, std::span<const std::uint8_t> msg);
bool verify_bytes(const PublicKey& pk, std::span<const std::uint8_t> msg, const Signature& sig);

Signature rsu_sign(const RsuKeyPair& kp, std::span<const std::uint8_t> msg);
bool rsu_verify(const PublicKey& pk, std::span<const std::uint8_t> msg, const Signature& sig);

}  // namespace bsrt::crypto
