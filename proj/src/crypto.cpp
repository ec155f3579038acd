#include "bsrt/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "bsrt/errors.hpp"

namespace bsrt::crypto {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(ErrorCode::InvariantViolation, "libsodium initialization failed");
}

// 32-byte signing seed derived from a labeled hash of the run seed and
// indices.  Keeps every key pair independent and reproducible.
std::array<std::uint8_t, 32> key_seed(const char* label, std::uint64_t seed, std::uint32_t a,
                                      std::uint32_t b) {
  ByteWriter w;
  w.str(label);
  w.u64(seed);
  w.u32(a);
  w.u32(b);
  return digest(w.bytes());
}

struct KeyPair {
  PublicKey pk;
  SecretKey sk;
};

KeyPair seeded_keypair(const std::array<std::uint8_t, 32>& seed32) {
  KeyPair kp;
  crypto_sign_ed25519_seed_keypair(kp.pk.data(), kp.sk.data(), seed32.data());
  return kp;
}

}  // namespace

Digest digest(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.data(), bytes.data(), bytes.size());
  return d;
}

Bytes RoundCert::signed_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.arr(pseudo_pk);
  return w.take();
}

Bytes SignedEnvelope::signed_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.arr(payload_digest);
  return w.take();
}

CaInit ca_init(std::uint32_t num_clients, std::uint32_t num_rsus, std::uint32_t rounds,
               std::uint64_t seed) {
  ensure_sodium();
  if (num_clients < 1 || num_rsus < 1 || rounds < 1)
    throw Error(ErrorCode::InvalidArgument, "ca_init: all cardinalities must be >= 1");

  CaInit out;
  KeyPair ca = seeded_keypair(key_seed("authority", seed, 0, 0));
  out.gvk = ca.pk;

  out.clients.resize(num_clients);
  for (std::uint32_t i = 0; i < num_clients; ++i) {
    out.clients[i].rounds.resize(rounds);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      KeyPair kp = seeded_keypair(key_seed("client-credential", seed, i, r));
      RoundCredential& cred = out.clients[i].rounds[r];
      cred.cert.round = r;
      cred.cert.pseudo_pk = kp.pk;
      cred.cert.ca_sig = sign_bytes(ca.sk, cred.cert.signed_bytes());
      cred.pseudo_sk = kp.sk;
    }
  }

  out.rsus.resize(num_rsus);
  for (std::uint32_t j = 0; j < num_rsus; ++j) {
    KeyPair kp = seeded_keypair(key_seed("rsu", seed, j, 0));
    out.rsus[j] = RsuKeyPair{static_cast<std::uint16_t>(j), kp.pk, kp.sk};
  }
  return out;
}

SignedEnvelope gs_sign(const CredentialSet& creds, std::uint32_t round,
                       const Digest& payload_digest) {
  if (round >= creds.rounds.size())
    throw Error(ErrorCode::NoCredential, "no credential issued for round");
  const RoundCredential& cred = creds.rounds[round];

  SignedEnvelope env;
  env.round = round;
  env.payload_digest = payload_digest;
  env.cert = cred.cert;
  env.sig = sign_bytes(cred.pseudo_sk, env.signed_bytes());
  return env;
}

bool gs_verify(const GroupVerificationKey& gvk, const SignedEnvelope& env) {
  if (env.cert.round != env.round) return false;
  if (!verify_bytes(gvk, env.cert.signed_bytes(), env.cert.ca_sig)) return false;
  return verify_bytes(env.cert.pseudo_pk, env.signed_bytes(), env.sig);
}

LinkTag link_tag(const RoundCert& cert) {
  Digest d = digest(cert.pseudo_pk);
  LinkTag tag;
  std::memcpy(tag.data(), d.data(), kLinkTagBytes);
  return tag;
}

LinkTag link_tag(const SignedEnvelope& env) { return link_tag(env.cert); }

bool gs_link(const SignedEnvelope& a, const SignedEnvelope& b) {
  if (a.round != b.round) return false;
  return link_tag(a) == link_tag(b);
}

Signature sign_bytes(const SecretKey& sk, std::span<const std::uint8_t> msg) {
  ensure_sodium();
  Signature sig;
  crypto_sign_ed25519_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.data());
  return sig;
}

bool verify_bytes(const PublicKey& pk, std::span<const std::uint8_t> msg, const Signature& sig) {
  ensure_sodium();
  return crypto_sign_ed25519_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

Signature rsu_sign(const RsuKeyPair& kp, std::span<const std::uint8_t> msg) {
  return sign_bytes(kp.sk, msg);
}

bool rsu_verify(const PublicKey& pk, std::span<const std::uint8_t> msg, const Signature& sig) {
  return verify_bytes(pk, msg, sig);
}

}  // namespace bsrt::crypto
