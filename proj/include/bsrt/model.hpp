#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bsrt/bytes.hpp"
#include "bsrt/crypto.hpp"

namespace bsrt::model {

// Single-block attention encoder sized for desk-scale simulation.  One
// attention head, one FFN, mean-pool classifier head.
struct EncoderConfig {
  std::uint32_t num_tokens = 16;
  std::uint32_t token_dim = 16;
  std::uint32_t ffn_dim = 32;
  std::uint32_t num_classes = 8;

  void validate() const;
  std::size_t param_count() const;
  bool operator==(const EncoderConfig&) const = default;
};

// Flat parameter offsets, in canonical order: W_Q, W_K, W_V (d x d each),
// W_1 (d x f), W_2 (f x d), W_out (d x C), b_out (C).
struct ParamLayout {
  std::size_t wq, wk, wv, w1, w2, wout, bout, total;
  static ParamLayout of(const EncoderConfig& cfg);
};

struct ParamVector {
  std::vector<double> v;

  static ParamVector zeros(std::size_t n) { return ParamVector{std::vector<double>(n, 0.0)}; }
  std::size_t size() const { return v.size(); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  bool operator==(const ParamVector&) const = default;

  void axpy(double a, const ParamVector& x);  // v += a * x
  void scale(double a);
  double l2_norm() const;
};

ParamVector sub(const ParamVector& a, const ParamVector& b);

// Canonical parameter bytes: little-endian f64 in layout order.  Digests and
// wire encodings both hash/carry exactly these bytes.
Bytes param_bytes(const ParamVector& p);
crypto::Digest param_digest(const ParamVector& p);

// Checkpoint file format: magic "BSRT", four LE u32 dims, then param bytes.
Bytes serialize_params(const EncoderConfig& cfg, const ParamVector& p);
std::pair<EncoderConfig, ParamVector> deserialize_params(std::span<const std::uint8_t> bytes);

ParamVector random_init(const EncoderConfig& cfg, double scale, std::uint64_t seed);

struct Sample {
  std::vector<double> tokens;  // num_tokens x token_dim, row-major
  std::uint32_t label = 0;
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<std::size_t> class_counts(std::uint32_t num_classes) const;
};

// Linear retention decay from k_start at round 0 to k_end at the final round.
struct RetentionSchedule {
  double k_start = 0.80;
  double k_end = 0.60;
  std::uint32_t rounds = 15;

  void validate() const;
};

double retention_ratio(std::uint32_t round, const RetentionSchedule& sched);

// Magnitude scores: s_k = ||row_k||_2 / sum_j ||row_j||_2; uniform when all
// rows are zero.  Scores sum to 1.
std::vector<double> token_scores(std::span<const double> tokens, std::uint32_t num_tokens,
                                 std::uint32_t token_dim);

// Indices of the ceil(k * N) highest-scoring tokens, ties broken toward the
// lower index, returned in ascending order.
std::vector<std::uint32_t> select_tokens(std::span<const double> scores, double k);

// Forward pass over the retained rows only; pruned rows never enter any
// product.  Returns logits (num_classes).
std::vector<double> forward(const EncoderConfig& cfg, const ParamVector& params,
                            std::span<const double> tokens,
                            std::span<const std::uint32_t> retained);

struct BatchItem {
  const Sample* sample = nullptr;
  const std::vector<std::uint32_t>* retained = nullptr;
};

// Mean softmax cross-entropy over the batch; fills grad with the mean
// gradient.  Returns the loss.
double loss_and_grad(const EncoderConfig& cfg, const ParamVector& params,
                     std::span<const BatchItem> batch, ParamVector& grad);

struct TrainHyper {
  std::uint32_t batch_size = 8;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double mean_loss = 0.0;
  double val_accuracy = 0.0;
  double max_grad_norm = 0.0;
  crypto::Digest checkpoint{};  // digest of the params after this epoch
};

struct TrainResult {
  ParamVector best;
  std::vector<EpochStats> trace;
  bool empty_dataset = false;
};

// Mini-batch gradient descent with a fixed 20% validation split; returns the
// checkpoint with the highest validation accuracy (earliest epoch on ties).
// epochs == 0 returns the initial parameters untouched.
TrainResult local_train(const EncoderConfig& cfg, const ParamVector& init, const Dataset& data,
                        std::uint32_t epochs, std::uint32_t round,
                        const RetentionSchedule& sched, const TrainHyper& hyper);

struct EvalResult {
  double accuracy = 0.0;
  // Recall per class; empty optional when the dataset has no such sample.
  std::vector<std::optional<double>> per_class_recall;
};

// Argmax prediction (ties toward the lower class id) at retention ratio k.
EvalResult evaluate(const EncoderConfig& cfg, const ParamVector& params, const Dataset& data,
                    double k);

std::uint32_t predict(const EncoderConfig& cfg, const ParamVector& params, const Sample& s,
                      double k);

struct FlopsBreakdown {
  std::uint64_t scoring = 0;
  std::uint64_t projections = 0;
  std::uint64_t attention_quadratic = 0;
  std::uint64_t ffn = 0;
  std::uint64_t head = 0;

  std::uint64_t total() const { return scoring + projections + attention_quadratic + ffn + head; }
};

// Per-sample forward cost with m retained tokens.  The quadratic attention
// term scales as (m/N)^2, which is what token pruning buys.
FlopsBreakdown flops_estimate(std::uint32_t retained_tokens, const EncoderConfig& cfg);

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::uint32_t instances = 0;
};

// Compares the analytic gradient against central finite differences on
// randomized small instances (shapes, parameters, batches, retained sets).
GradcheckReport gradcheck(std::uint32_t trials, std::uint64_t seed);

}  // namespace bsrt::model
