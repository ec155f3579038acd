#include "bsrt/fed.hpp"

#include <charconv>
#include <sstream>

#include "bsrt/errors.hpp"

namespace bsrt::fed {

Bytes UpdateMessage::wire_bytes() const {
  ByteWriter w;
  w.u32(round);
  w.u32(declared_size);
  Bytes db = model::param_bytes(delta);
  w.u32(static_cast<std::uint32_t>(db.size()));
  w.raw(db);
  w.u32(envelope.cert.round);
  w.arr(envelope.cert.pseudo_pk);
  w.arr(envelope.cert.ca_sig);
  w.arr(envelope.sig);
  return w.take();
}

UpdateMessage UpdateMessage::from_wire(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  UpdateMessage m;
  m.round = r.u32();
  m.declared_size = r.u32();
  std::uint32_t dlen = r.u32();
  if (dlen % 8 != 0) throw Error(ErrorCode::ParseError, "update: delta length not f64 aligned");
  m.delta = model::ParamVector::zeros(dlen / 8);
  for (std::size_t i = 0; i < m.delta.size(); ++i) m.delta.v[i] = r.f64();
  m.envelope.cert.round = r.u32();
  m.envelope.cert.pseudo_pk = r.arr<crypto::kPublicKeyBytes>();
  m.envelope.cert.ca_sig = r.arr<crypto::kSignatureBytes>();
  m.envelope.sig = r.arr<crypto::kSignatureBytes>();
  if (r.remaining() != 0) throw Error(ErrorCode::ParseError, "update: trailing bytes");
  m.envelope.round = m.round;
  m.envelope.payload_digest = update_payload_digest(m.round, m.delta, m.declared_size);
  return m;
}

crypto::Digest update_payload_digest(std::uint32_t round, const model::ParamVector& delta,
                                     std::uint32_t declared_size) {
  ByteWriter w;
  w.u32(round);
  w.raw(model::param_bytes(delta));
  w.u32(declared_size);
  return crypto::digest(w.bytes());
}

AttackProfile AttackProfile::parse(const std::string& text) {
  AttackProfile p;
  std::string kind = text;
  std::string arg;
  if (auto pos = text.find(':'); pos != std::string::npos) {
    kind = text.substr(0, pos);
    arg = text.substr(pos + 1);
  }
  if (kind == "honest") {
    p.kind = Kind::Honest;
  } else if (kind == "duplicate") {
    p.kind = Kind::Duplicate;
    if (!arg.empty()) {
      auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), p.copies);
      if (ec != std::errc{} || ptr != arg.data() + arg.size() || p.copies < 1)
        throw Error(ErrorCode::ConfigError, "attack: bad duplicate copy count");
    }
  } else if (kind == "poison") {
    p.kind = Kind::Poison;
    if (!arg.empty()) {
      try {
        p.scale = std::stod(arg);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, "attack: bad poison scale");
      }
    }
  } else if (kind == "silent") {
    p.kind = Kind::Silent;
  } else {
    throw Error(ErrorCode::ConfigError, "attack: unknown kind '" + kind + "'");
  }
  return p;
}

std::string AttackProfile::to_string() const {
  switch (kind) {
    case Kind::Honest:
      return "honest";
    case Kind::Duplicate:
      return "duplicate:" + std::to_string(copies);
    case Kind::Poison: {
      std::ostringstream out;  // shortest round-trippable text, no zero padding
      out << scale;
      return "poison:" + out.str();
    }
    case Kind::Silent:
      return "silent";
  }
  return "honest";
}

ClientRoundResult client_round(const ClientState& state, const model::ParamVector& global,
                               std::uint32_t round, const ClientRoundOptions& opt) {
  opt.cfg.validate();
  if (global.size() != opt.cfg.param_count())
    throw Error(ErrorCode::InvalidArgument, "client_round: parameter count mismatch");

  ClientRoundResult out;
  out.train = model::local_train(opt.cfg, global, state.dataset, opt.epochs, round, opt.sched,
                                 opt.hyper);

  out.message.round = round;
  out.message.delta = model::sub(out.train.best, global);
  out.message.declared_size = state.declared_size;
  out.message.envelope = crypto::gs_sign(
      state.creds, round,
      update_payload_digest(round, out.message.delta, out.message.declared_size));
  return out;
}

std::vector<UpdateMessage> make_attack(const ClientState& state, const UpdateMessage& base,
                                       const AttackProfile& profile) {
  switch (profile.kind) {
    case AttackProfile::Kind::Honest:
      return {base};
    case AttackProfile::Kind::Silent:
      return {};
    case AttackProfile::Kind::Duplicate: {
      std::vector<UpdateMessage> out(profile.copies, base);
      return out;
    }
    case AttackProfile::Kind::Poison: {
      UpdateMessage m = base;
      m.delta.scale(profile.scale);
      m.envelope = crypto::gs_sign(
          state.creds, m.round, update_payload_digest(m.round, m.delta, m.declared_size));
      return {m};
    }
  }
  return {base};
}

void apply_global(ClientState& state, const model::ParamVector& finalized) {
  state.current_global = finalized;
}

}  // namespace bsrt::fed
