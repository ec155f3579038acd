#include "bsrt/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bsrt/errors.hpp"

namespace bsrt::sim {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_uint(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw Error(ErrorCode::ConfigError, "config: bad unsigned value for " + key);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double d = std::stod(value, &used);
    if (used != value.size())
      throw Error(ErrorCode::ConfigError, "config: bad numeric value for " + key);
    return d;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "config: bad numeric value for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw Error(ErrorCode::ConfigError, "config: bad boolean value for " + key);
}

}  // namespace

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  if (key == "num_clients") num_clients = parse_uint<std::uint32_t>(key, value);
  else if (key == "num_rsus") num_rsus = parse_uint<std::uint32_t>(key, value);
  else if (key == "rounds") rounds = parse_uint<std::uint32_t>(key, value);
  else if (key == "local_epochs") local_epochs = parse_uint<std::uint32_t>(key, value);
  else if (key == "k_start") k_start = parse_double(key, value);
  else if (key == "k_end") k_end = parse_double(key, value);
  else if (key == "num_tokens") encoder.num_tokens = parse_uint<std::uint32_t>(key, value);
  else if (key == "token_dim") encoder.token_dim = parse_uint<std::uint32_t>(key, value);
  else if (key == "ffn_dim") encoder.ffn_dim = parse_uint<std::uint32_t>(key, value);
  else if (key == "num_classes") encoder.num_classes = parse_uint<std::uint32_t>(key, value);
  else if (key == "batch_size") hyper.batch_size = parse_uint<std::uint32_t>(key, value);
  else if (key == "learning_rate") hyper.learning_rate = parse_double(key, value);
  else if (key == "init_scale") init_scale = parse_double(key, value);
  else if (key == "partition") partition = value;
  else if (key == "partition_scale_divisor")
    partition_scale_divisor = parse_uint<std::uint32_t>(key, value);
  else if (key == "uniform_per_class") uniform_per_class = parse_uint<std::uint32_t>(key, value);
  else if (key == "test_per_class") test_per_class = parse_uint<std::uint32_t>(key, value);
  else if (key == "seed") seed = parse_uint<std::uint64_t>(key, value);
  else if (key == "local_baseline") local_baseline = parse_bool(key, value);
  else if (key == "t_sign_ms") timing.t_sign_ms = parse_double(key, value);
  else if (key == "t_ver_ms") timing.t_ver_ms = parse_double(key, value);
  else if (key == "t_agg_ms") timing.t_agg_ms = parse_double(key, value);
  else if (key == "t_base_ms") timing.t_base_ms = parse_double(key, value);
  else if (key == "alpha_msg_ms") timing.alpha_msg_ms = parse_double(key, value);
  else if (key.starts_with("client_attack.")) {
    std::uint32_t id = parse_uint<std::uint32_t>(key, key.substr(14));
    try {
      client_attacks[id] = fed::AttackProfile::parse(value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
  } else if (key.starts_with("rsu_mode.")) {
    std::uint32_t id = parse_uint<std::uint32_t>(key, key.substr(9));
    try {
      rsu_modes[id] = consensus::parse_byzantine_mode(value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
    }
  } else {
    throw Error(ErrorCode::ConfigError, "config: unknown key '" + key + "'");
  }
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, "config: " + msg); };

  if (num_clients < 1) bad("num_clients must be >= 1");
  if (num_rsus < 1 || num_rsus > 32) bad("num_rsus must be in [1, 32]");
  if (rounds < 1) bad("rounds must be >= 1");

  try {
    encoder.validate();
    schedule().validate();
    timing.validate();
  } catch (const Error& e) {
    bad(e.what());
  }

  if (hyper.batch_size < 1) bad("batch_size must be >= 1");
  if (!(hyper.learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (!(init_scale >= 0.0)) bad("init_scale must be >= 0");
  if (encoder.token_dim < encoder.num_classes) bad("token_dim must be >= num_classes");
  if (test_per_class < 1) bad("test_per_class must be >= 1");

  if (partition == "kitti") {
    if (num_clients != 5) bad("kitti partition is defined for exactly 5 clients");
    if (encoder.num_classes != 8) bad("kitti partition is defined for exactly 8 classes");
    if (partition_scale_divisor < 1) bad("partition_scale_divisor must be >= 1");
  } else if (partition == "uniform") {
    if (uniform_per_class < 1) bad("uniform_per_class must be >= 1");
  } else {
    bad("unknown partition '" + partition + "'");
  }

  for (const auto& [id, profile] : client_attacks) {
    if (id >= num_clients) bad("client_attack id out of range");
    if (profile.kind == fed::AttackProfile::Kind::Duplicate && profile.copies < 1)
      bad("duplicate attack needs >= 1 copies");
  }
  for (const auto& [id, mode] : rsu_modes)
    if (id >= num_rsus) bad("rsu_mode id out of range");
}

ScenarioConfig ScenarioConfig::from_string(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError,
                  "config: line " + std::to_string(lineno) + " is not 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(),
                  "config: line " + std::to_string(lineno) + ": " + std::string(e.what()));
    }
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open config file: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_string(ss.str());
}

}  // namespace bsrt::sim
