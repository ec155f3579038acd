#include "bsrt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "bsrt/errors.hpp"
#include "bsrt/rng.hpp"

namespace bsrt::model {

namespace {

// C (m x n) = A (m x k) * B (k x n); fixed accumulation order keeps results
// bit-identical across runs and hosts with the same build.
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = a[i * k + p];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

// C (k x n) += A^T (k x m)^T... i.e. C = A^T * B with A (m x k), B (m x n).
void matmul_at_b(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = a[i * k + p];
      const double* brow = b + i * n;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
}

// C (m x r) = A (m x n) * B^T with B (r x n).
void matmul_a_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                 std::size_t r) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double acc = 0.0;
      const double* arow = a + i * n;
      const double* brow = b + j * n;
      for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
      c[i * r + j] = acc;
    }
}

struct ForwardCache {
  std::size_t m = 0;
  std::vector<double> x;       // m x d retained rows
  std::vector<double> q, k, v; // m x d
  std::vector<double> att;     // m x m, post-softmax
  std::vector<double> z;       // m x d
  std::vector<double> u;       // m x f, pre-activation
  std::vector<double> g;       // m x f, relu(u)
  std::vector<double> h;       // m x d
  std::vector<double> pooled;  // d
  std::vector<double> logits;  // C
};

void run_forward(const EncoderConfig& cfg, const ParamVector& params,
                 std::span<const double> tokens, std::span<const std::uint32_t> retained,
                 ForwardCache& fc) {
  cfg.validate();
  const std::size_t n = cfg.num_tokens, d = cfg.token_dim, f = cfg.ffn_dim, c = cfg.num_classes;
  if (tokens.size() != n * d)
    throw Error(ErrorCode::InvalidArgument, "forward: token buffer size mismatch");
  if (retained.empty()) throw Error(ErrorCode::InvalidArgument, "forward: no retained tokens");
  if (params.size() != cfg.param_count())
    throw Error(ErrorCode::InvalidArgument, "forward: parameter count mismatch");
  for (std::uint32_t idx : retained)
    if (idx >= n) throw Error(ErrorCode::InvalidArgument, "forward: retained index out of range");

  const ParamLayout lay = ParamLayout::of(cfg);
  const double* P = params.data();
  const std::size_t m = retained.size();
  fc.m = m;

  fc.x.resize(m * d);
  for (std::size_t i = 0; i < m; ++i)
    std::memcpy(fc.x.data() + i * d, tokens.data() + retained[i] * d, d * sizeof(double));

  fc.q.resize(m * d);
  fc.k.resize(m * d);
  fc.v.resize(m * d);
  matmul(fc.x.data(), P + lay.wq, fc.q.data(), m, d, d);
  matmul(fc.x.data(), P + lay.wk, fc.k.data(), m, d, d);
  matmul(fc.x.data(), P + lay.wv, fc.v.data(), m, d, d);

  // Scaled dot-product scores with row softmax.
  fc.att.resize(m * m);
  matmul_a_bt(fc.q.data(), fc.k.data(), fc.att.data(), m, d, m);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < m; ++i) {
    double* row = fc.att.data() + i * m;
    double mx = row[0] * inv_sqrt_d;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] *= inv_sqrt_d;
      mx = std::max(mx, row[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) row[j] /= sum;
  }

  fc.z.resize(m * d);
  matmul(fc.att.data(), fc.v.data(), fc.z.data(), m, m, d);
  for (std::size_t i = 0; i < m * d; ++i) fc.z[i] += fc.x[i];

  fc.u.resize(m * f);
  matmul(fc.z.data(), P + lay.w1, fc.u.data(), m, d, f);
  fc.g.resize(m * f);
  for (std::size_t i = 0; i < m * f; ++i) fc.g[i] = fc.u[i] > 0.0 ? fc.u[i] : 0.0;

  fc.h.resize(m * d);
  matmul(fc.g.data(), P + lay.w2, fc.h.data(), m, f, d);
  for (std::size_t i = 0; i < m * d; ++i) fc.h[i] += fc.z[i];

  fc.pooled.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) fc.pooled[j] += fc.h[i * d + j];
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < d; ++j) fc.pooled[j] *= inv_m;

  fc.logits.assign(c, 0.0);
  const double* wout = P + lay.wout;
  for (std::size_t j = 0; j < d; ++j) {
    double pv = fc.pooled[j];
    for (std::size_t t = 0; t < c; ++t) fc.logits[t] += pv * wout[j * c + t];
  }
  for (std::size_t t = 0; t < c; ++t) fc.logits[t] += P[lay.bout + t];
}

// Numerically stable log-softmax probabilities.
std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

void EncoderConfig::validate() const {
  if (num_tokens < 1 || token_dim < 1 || ffn_dim < 1 || num_classes < 1)
    throw Error(ErrorCode::InvalidArgument, "encoder config: all dimensions must be >= 1");
}

std::size_t EncoderConfig::param_count() const {
  const std::size_t d = token_dim, f = ffn_dim, c = num_classes;
  return 3 * d * d + d * f + f * d + d * c + c;
}

ParamLayout ParamLayout::of(const EncoderConfig& cfg) {
  const std::size_t d = cfg.token_dim, f = cfg.ffn_dim, c = cfg.num_classes;
  ParamLayout l{};
  l.wq = 0;
  l.wk = l.wq + d * d;
  l.wv = l.wk + d * d;
  l.w1 = l.wv + d * d;
  l.w2 = l.w1 + d * f;
  l.wout = l.w2 + f * d;
  l.bout = l.wout + d * c;
  l.total = l.bout + c;
  return l;
}

void ParamVector::axpy(double a, const ParamVector& x) {
  if (x.size() != size()) throw Error(ErrorCode::InvalidArgument, "axpy: size mismatch");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += a * x.v[i];
}

void ParamVector::scale(double a) {
  for (double& e : v) e *= a;
}

double ParamVector::l2_norm() const {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

ParamVector sub(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InvalidArgument, "sub: size mismatch");
  ParamVector out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= b.v[i];
  return out;
}

Bytes param_bytes(const ParamVector& p) {
  ByteWriter w;
  for (double e : p.v) w.f64(e);
  return w.take();
}

crypto::Digest param_digest(const ParamVector& p) { return crypto::digest(param_bytes(p)); }

static constexpr char kParamMagic[4] = {'B', 'S', 'R', 'T'};

Bytes serialize_params(const EncoderConfig& cfg, const ParamVector& p) {
  cfg.validate();
  if (p.size() != cfg.param_count())
    throw Error(ErrorCode::InvalidArgument, "serialize_params: parameter count mismatch");
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kParamMagic), 4));
  w.u32(cfg.num_tokens);
  w.u32(cfg.token_dim);
  w.u32(cfg.ffn_dim);
  w.u32(cfg.num_classes);
  for (double e : p.v) w.f64(e);
  return w.take();
}

std::pair<EncoderConfig, ParamVector> deserialize_params(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.arr<4>();
  if (std::memcmp(magic.data(), kParamMagic, 4) != 0)
    throw Error(ErrorCode::ParseError, "checkpoint: bad magic");
  EncoderConfig cfg;
  cfg.num_tokens = r.u32();
  cfg.token_dim = r.u32();
  cfg.ffn_dim = r.u32();
  cfg.num_classes = r.u32();
  cfg.validate();
  const std::size_t count = cfg.param_count();
  if (r.remaining() != count * 8)
    throw Error(ErrorCode::ParseError, "checkpoint: parameter byte count mismatch");
  ParamVector p = ParamVector::zeros(count);
  for (std::size_t i = 0; i < count; ++i) p.v[i] = r.f64();
  return {cfg, std::move(p)};
}

ParamVector random_init(const EncoderConfig& cfg, double scale, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamVector p = ParamVector::zeros(cfg.param_count());
  for (double& e : p.v) e = scale * rng.next_gaussian();
  return p;
}

std::vector<std::size_t> Dataset::class_counts(std::uint32_t num_classes) const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const Sample& s : samples) {
    if (s.label >= num_classes)
      throw Error(ErrorCode::InvalidArgument, "dataset: label out of range");
    ++counts[s.label];
  }
  return counts;
}

void RetentionSchedule::validate() const {
  if (!(k_end > 0.0 && k_end <= k_start && k_start <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "retention schedule: need 0 < k_end <= k_start <= 1");
  if (rounds < 1) throw Error(ErrorCode::InvalidArgument, "retention schedule: rounds must be >= 1");
}

double retention_ratio(std::uint32_t round, const RetentionSchedule& sched) {
  sched.validate();
  if (round > sched.rounds)
    throw Error(ErrorCode::InvalidArgument, "retention_ratio: round beyond schedule");
  if (round == 0) return sched.k_start;
  if (round == sched.rounds) return sched.k_end;
  double frac = static_cast<double>(round) / static_cast<double>(sched.rounds);
  return sched.k_start - frac * (sched.k_start - sched.k_end);
}

std::vector<double> token_scores(std::span<const double> tokens, std::uint32_t num_tokens,
                                 std::uint32_t token_dim) {
  if (num_tokens < 1 || token_dim < 1)
    throw Error(ErrorCode::InvalidArgument, "token_scores: dimensions must be >= 1");
  if (tokens.size() != static_cast<std::size_t>(num_tokens) * token_dim)
    throw Error(ErrorCode::InvalidArgument, "token_scores: token buffer size mismatch");

  std::vector<double> norms(num_tokens);
  double total = 0.0;
  for (std::uint32_t i = 0; i < num_tokens; ++i) {
    double s = 0.0;
    const double* row = tokens.data() + static_cast<std::size_t>(i) * token_dim;
    for (std::uint32_t j = 0; j < token_dim; ++j) s += row[j] * row[j];
    norms[i] = std::sqrt(s);
    total += norms[i];
  }
  if (total == 0.0) {
    std::fill(norms.begin(), norms.end(), 1.0 / static_cast<double>(num_tokens));
    return norms;
  }
  for (double& s : norms) s /= total;
  return norms;
}

std::vector<std::uint32_t> select_tokens(std::span<const double> scores, double k) {
  if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "select_tokens: empty scores");
  if (!(k > 0.0 && k <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "select_tokens: k must be in (0, 1]");
  const std::size_t n = scores.size();
  std::size_t m = static_cast<std::size_t>(std::ceil(k * static_cast<double>(n)));
  m = std::clamp<std::size_t>(m, 1, n);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(m);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<double> forward(const EncoderConfig& cfg, const ParamVector& params,
                            std::span<const double> tokens,
                            std::span<const std::uint32_t> retained) {
  ForwardCache fc;
  run_forward(cfg, params, tokens, retained, fc);
  return fc.logits;
}

double loss_and_grad(const EncoderConfig& cfg, const ParamVector& params,
                     std::span<const BatchItem> batch, ParamVector& grad) {
  cfg.validate();
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "loss_and_grad: empty batch");
  const std::size_t d = cfg.token_dim, f = cfg.ffn_dim, c = cfg.num_classes;
  const ParamLayout lay = ParamLayout::of(cfg);
  if (params.size() != lay.total)
    throw Error(ErrorCode::InvalidArgument, "loss_and_grad: parameter count mismatch");

  grad = ParamVector::zeros(lay.total);
  double* G = grad.data();
  const double* P = params.data();
  double loss_sum = 0.0;

  ForwardCache fc;
  std::vector<double> dh, dz, dg, du, datt, ds, dq, dk, dv, dpooled;
  for (const BatchItem& item : batch) {
    if (item.sample == nullptr || item.retained == nullptr)
      throw Error(ErrorCode::InvalidArgument, "loss_and_grad: null batch item");
    if (item.sample->label >= c)
      throw Error(ErrorCode::InvalidArgument, "loss_and_grad: label out of range");
    run_forward(cfg, params, item.sample->tokens, *item.retained, fc);
    const std::size_t m = fc.m;

    std::vector<double> p = softmax(fc.logits);
    loss_sum += -std::log(std::max(p[item.sample->label], 1e-300));

    // dlogits = p - onehot(y)
    std::vector<double> dlogits = p;
    dlogits[item.sample->label] -= 1.0;

    // Head: logits = pooled * W_out + b_out
    double* gwout = G + lay.wout;
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t t = 0; t < c; ++t) gwout[j * c + t] += fc.pooled[j] * dlogits[t];
    for (std::size_t t = 0; t < c; ++t) G[lay.bout + t] += dlogits[t];

    dpooled.assign(d, 0.0);
    const double* wout = P + lay.wout;
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t t = 0; t < c; ++t) dpooled[j] += wout[j * c + t] * dlogits[t];

    // Mean pool spreads the gradient evenly over rows.
    const double inv_m = 1.0 / static_cast<double>(m);
    dh.assign(m * d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) dh[i * d + j] = dpooled[j] * inv_m;

    // H = Z + relu(Z W_1) W_2
    dz = dh;
    dg.assign(m * f, 0.0);
    matmul_a_bt(dh.data(), P + lay.w2, dg.data(), m, d, f);
    du.resize(m * f);
    for (std::size_t i = 0; i < m * f; ++i) du[i] = fc.u[i] > 0.0 ? dg[i] : 0.0;
    matmul_at_b(fc.g.data(), dh.data(), G + lay.w2, m, f, d, true);
    matmul_at_b(fc.z.data(), du.data(), G + lay.w1, m, d, f, true);
    ds.assign(m * d, 0.0);
    matmul_a_bt(du.data(), P + lay.w1, ds.data(), m, f, d);  // reuse ds as scratch for dZ add
    for (std::size_t i = 0; i < m * d; ++i) dz[i] += ds[i];

    // Z = X_m + A V
    datt.assign(m * m, 0.0);
    matmul_a_bt(dz.data(), fc.v.data(), datt.data(), m, d, m);
    dv.assign(m * d, 0.0);
    matmul_at_b(fc.att.data(), dz.data(), dv.data(), m, m, d, false);

    // Row softmax backward: dS_i = A_i ⊙ (dA_i - <dA_i, A_i>)
    ds.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = fc.att.data() + i * m;
      const double* darow = datt.data() + i * m;
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += darow[j] * arow[j];
      double* srow = ds.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) srow[j] = arow[j] * (darow[j] - dot);
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& e : ds) e *= inv_sqrt_d;

    dq.assign(m * d, 0.0);
    matmul(ds.data(), fc.k.data(), dq.data(), m, m, d);
    dk.assign(m * d, 0.0);
    matmul_at_b(ds.data(), fc.q.data(), dk.data(), m, m, d, false);

    matmul_at_b(fc.x.data(), dq.data(), G + lay.wq, m, d, d, true);
    matmul_at_b(fc.x.data(), dk.data(), G + lay.wk, m, d, d, true);
    matmul_at_b(fc.x.data(), dv.data(), G + lay.wv, m, d, d, true);
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  grad.scale(inv_b);
  return loss_sum * inv_b;
}

namespace {

double subset_accuracy(const EncoderConfig& cfg, const ParamVector& params, const Dataset& data,
                       std::span<const std::size_t> indices,
                       const std::vector<std::vector<std::uint32_t>>& retained) {
  if (indices.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t idx : indices) {
    const Sample& s = data.samples[idx];
    std::vector<double> logits = forward(cfg, params, s.tokens, retained[idx]);
    std::uint32_t pred = 0;
    for (std::uint32_t t = 1; t < cfg.num_classes; ++t)
      if (logits[t] > logits[pred]) pred = t;
    if (pred == s.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

}  // namespace

TrainResult local_train(const EncoderConfig& cfg, const ParamVector& init, const Dataset& data,
                        std::uint32_t epochs, std::uint32_t round,
                        const RetentionSchedule& sched, const TrainHyper& hyper) {
  cfg.validate();
  sched.validate();
  if (hyper.batch_size < 1)
    throw Error(ErrorCode::InvalidArgument, "local_train: batch_size must be >= 1");
  if (!(hyper.learning_rate > 0.0))
    throw Error(ErrorCode::InvalidArgument, "local_train: learning_rate must be > 0");
  if (init.size() != cfg.param_count())
    throw Error(ErrorCode::InvalidArgument, "local_train: parameter count mismatch");

  TrainResult result;
  result.best = init;
  if (data.empty()) {
    result.empty_dataset = true;
    return result;
  }

  const double k = retention_ratio(round, sched);
  const std::size_t n = data.size();
  std::vector<std::vector<std::uint32_t>> retained(n);
  for (std::size_t i = 0; i < n; ++i) {
    retained[i] = select_tokens(
        token_scores(data.samples[i].tokens, cfg.num_tokens, cfg.token_dim), k);
  }

  Rng rng(hyper.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  // 20% holdout for checkpoint selection; tiny datasets validate on
  // everything rather than starve training.
  const std::size_t val_n = n / 5;
  std::vector<std::size_t> val(order.begin(), order.begin() + val_n);
  std::vector<std::size_t> train(order.begin() + val_n, order.end());
  if (val.empty()) val = train;

  ParamVector params = init;
  ParamVector grad;
  double best_acc = -1.0;

  for (std::uint32_t e = 0; e < epochs; ++e) {
    rng.shuffle(train);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    double max_gnorm = 0.0;

    for (std::size_t start = 0; start < train.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(train.size(), start + hyper.batch_size);
      std::vector<BatchItem> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(BatchItem{&data.samples[train[i]], &retained[train[i]]});
      loss_sum += loss_and_grad(cfg, params, batch, grad);
      ++batches;
      max_gnorm = std::max(max_gnorm, grad.l2_norm());
      params.axpy(-hyper.learning_rate, grad);
    }

    EpochStats stats;
    stats.mean_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    stats.val_accuracy = subset_accuracy(cfg, params, data, val, retained);
    stats.max_grad_norm = max_gnorm;
    stats.checkpoint = param_digest(params);
    result.trace.push_back(stats);

    if (stats.val_accuracy > best_acc) {
      best_acc = stats.val_accuracy;
      result.best = params;
    }
  }
  return result;
}

std::uint32_t predict(const EncoderConfig& cfg, const ParamVector& params, const Sample& s,
                      double k) {
  auto retained = select_tokens(token_scores(s.tokens, cfg.num_tokens, cfg.token_dim), k);
  std::vector<double> logits = forward(cfg, params, s.tokens, retained);
  std::uint32_t pred = 0;
  for (std::uint32_t t = 1; t < cfg.num_classes; ++t)
    if (logits[t] > logits[pred]) pred = t;
  return pred;
}

EvalResult evaluate(const EncoderConfig& cfg, const ParamVector& params, const Dataset& data,
                    double k) {
  cfg.validate();
  EvalResult out;
  out.per_class_recall.assign(cfg.num_classes, std::nullopt);
  if (data.empty()) return out;

  std::vector<std::size_t> total(cfg.num_classes, 0), correct(cfg.num_classes, 0);
  std::size_t hits = 0;
  for (const Sample& s : data.samples) {
    if (s.label >= cfg.num_classes)
      throw Error(ErrorCode::InvalidArgument, "evaluate: label out of range");
    std::uint32_t pred = predict(cfg, params, s, k);
    ++total[s.label];
    if (pred == s.label) {
      ++correct[s.label];
      ++hits;
    }
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  for (std::uint32_t t = 0; t < cfg.num_classes; ++t)
    if (total[t] > 0)
      out.per_class_recall[t] = static_cast<double>(correct[t]) / static_cast<double>(total[t]);
  return out;
}

GradcheckReport gradcheck(std::uint32_t trials, std::uint64_t seed) {
  GradcheckReport report;
  const double h = 1e-6;

  for (std::uint32_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, "gradcheck", t));
    EncoderConfig cfg;
    cfg.num_tokens = 3 + static_cast<std::uint32_t>(rng.next_below(4));
    cfg.token_dim = 2 + static_cast<std::uint32_t>(rng.next_below(4));
    cfg.ffn_dim = 2 + static_cast<std::uint32_t>(rng.next_below(5));
    cfg.num_classes = 2 + static_cast<std::uint32_t>(rng.next_below(3));

    ParamVector params = ParamVector::zeros(cfg.param_count());
    for (double& e : params.v) e = 0.5 * rng.next_gaussian();

    const std::size_t batch_n = 1 + rng.next_below(3);
    std::vector<Sample> samples(batch_n);
    std::vector<std::vector<std::uint32_t>> retained(batch_n);
    std::vector<BatchItem> batch(batch_n);
    for (std::size_t b = 0; b < batch_n; ++b) {
      samples[b].tokens.resize(static_cast<std::size_t>(cfg.num_tokens) * cfg.token_dim);
      for (double& e : samples[b].tokens) e = rng.next_gaussian();
      samples[b].label = static_cast<std::uint32_t>(rng.next_below(cfg.num_classes));
      std::vector<std::uint32_t> idx(cfg.num_tokens);
      std::iota(idx.begin(), idx.end(), 0u);
      rng.shuffle(idx);
      idx.resize(1 + rng.next_below(cfg.num_tokens));
      std::sort(idx.begin(), idx.end());
      retained[b] = std::move(idx);
      batch[b] = BatchItem{&samples[b], &retained[b]};
    }

    ParamVector grad;
    loss_and_grad(cfg, params, batch, grad);

    ParamVector probe = params;
    ParamVector scratch;
    for (std::size_t p = 0; p < params.size(); ++p) {
      probe.v[p] = params.v[p] + h;
      const double lp = loss_and_grad(cfg, probe, batch, scratch);
      probe.v[p] = params.v[p] - h;
      const double lm = loss_and_grad(cfg, probe, batch, scratch);
      probe.v[p] = params.v[p];
      const double fd = (lp - lm) / (2.0 * h);
      const double rel = std::abs(grad.v[p] - fd) /
                         std::max({1.0, std::abs(grad.v[p]), std::abs(fd)});
      report.max_rel_err = std::max(report.max_rel_err, rel);
    }
    ++report.instances;
  }
  return report;
}

FlopsBreakdown flops_estimate(std::uint32_t retained_tokens, const EncoderConfig& cfg) {
  cfg.validate();
  if (retained_tokens < 1 || retained_tokens > cfg.num_tokens)
    throw Error(ErrorCode::InvalidArgument, "flops_estimate: retained count out of range");
  const std::uint64_t n = cfg.num_tokens, d = cfg.token_dim, f = cfg.ffn_dim,
                      c = cfg.num_classes, m = retained_tokens;
  FlopsBreakdown b;
  b.scoring = 2 * n * d;
  b.projections = 6 * m * d * d;
  b.attention_quadratic = 4 * m * m * d;
  b.ffn = 4 * m * d * f;
  b.head = 2 * d * c;
  return b;
}

}  // namespace bsrt::model
