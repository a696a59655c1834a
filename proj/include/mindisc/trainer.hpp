#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "mindisc/data.hpp"
#include "mindisc/error.hpp"
#include "mindisc/losses.hpp"
#include "mindisc/matrix.hpp"
#include "mindisc/network.hpp"
#include "mindisc/rng.hpp"

namespace mindisc {

/// Trade-off weights for the terms of the joint objective.
struct LossWeights {
  double ce = 1.0;
  double coral_rep = 1.0;
  double coral_logit = 1.0;
  double mmd_rep = 1.0;
  double mmd_logit = 1.0;
  double entropy = 0.1;

  bool adapts() const noexcept {
    return coral_rep != 0.0 || coral_logit != 0.0 || mmd_rep != 0.0 || mmd_logit != 0.0 ||
           entropy != 0.0;
  }

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainConfig {
  std::vector<std::size_t> widths{2, 64, 64, 2};
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LossWeights lambda;
  std::size_t kernel_count = 5;
  std::uint64_t seed = 1;

  std::vector<LayerSpec> layer_specs() const { return mlp_specs(widths); }
  SgdParams sgd() const { return {lr, momentum, weight_decay}; }

  void validate() const {
    validate_specs(layer_specs());
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be >= 0");
    if (batch_size < 2) fail("batch_size must be >= 2");
    if (kernel_count < 1) fail("kernel_count must be >= 1");
    const double lambdas[] = {lambda.ce,      lambda.coral_rep, lambda.coral_logit,
                              lambda.mmd_rep, lambda.mmd_logit, lambda.entropy};
    for (double l : lambdas) {
      if (!(l >= 0.0) || !std::isfinite(l)) fail("every lambda must be finite and >= 0");
    }
    if (!(lambda.ce > 0.0)) fail("lambda_ce must be > 0");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// ---------------------------------------------------------------------------
// Config text: one `key = value` per line, '#' starts a comment.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    throw Error(ErrorKind::ConfigError,
                "key '" + std::string(key) + "': not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorKind::ConfigError, "key '" + std::string(key) +
                                            "': not a non-negative integer: '" +
                                            std::string(text) + "'");
  }
  return v;
}

inline std::vector<std::size_t> parse_widths(std::string_view key, std::string_view text) {
  std::vector<std::size_t> widths;
  std::string_view rest = trim(text);
  while (true) {
    const auto comma = rest.find(',');
    widths.push_back(static_cast<std::size_t>(parse_uint(key, rest.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return widths;
}

}  // namespace detail

/// Every key understood by TrainConfig, in serialization order.
inline const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys{
      "layers",          "epochs",           "batch_size",         "lr",
      "momentum",        "weight_decay",     "lambda_ce",          "lambda_coral_rep",
      "lambda_coral_logit", "lambda_mmd_rep", "lambda_mmd_logit", "lambda_entropy",
      "kernel_count",    "seed"};
  return keys;
}

/// Applies one key; returns false when the key is not a TrainConfig key.
inline bool set_train_key(TrainConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_double;
  using detail::parse_uint;
  if (key == "layers") cfg.widths = detail::parse_widths(key, value);
  else if (key == "epochs") cfg.epochs = parse_uint(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_uint(key, value);
  else if (key == "lr") cfg.lr = parse_double(key, value);
  else if (key == "momentum") cfg.momentum = parse_double(key, value);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
  else if (key == "lambda_ce") cfg.lambda.ce = parse_double(key, value);
  else if (key == "lambda_coral_rep") cfg.lambda.coral_rep = parse_double(key, value);
  else if (key == "lambda_coral_logit") cfg.lambda.coral_logit = parse_double(key, value);
  else if (key == "lambda_mmd_rep") cfg.lambda.mmd_rep = parse_double(key, value);
  else if (key == "lambda_mmd_logit") cfg.lambda.mmd_logit = parse_double(key, value);
  else if (key == "lambda_entropy") cfg.lambda.entropy = parse_double(key, value);
  else if (key == "kernel_count") cfg.kernel_count = parse_uint(key, value);
  else if (key == "seed") cfg.seed = parse_uint(key, value);
  else return false;
  return true;
}

inline std::string get_train_key(const TrainConfig& cfg, std::string_view key) {
  if (key == "layers") {
    std::string s;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
      if (i > 0) s += ',';
      s += std::to_string(cfg.widths[i]);
    }
    return s;
  }
  if (key == "epochs") return std::to_string(cfg.epochs);
  if (key == "batch_size") return std::to_string(cfg.batch_size);
  if (key == "lr") return format_double(cfg.lr);
  if (key == "momentum") return format_double(cfg.momentum);
  if (key == "weight_decay") return format_double(cfg.weight_decay);
  if (key == "lambda_ce") return format_double(cfg.lambda.ce);
  if (key == "lambda_coral_rep") return format_double(cfg.lambda.coral_rep);
  if (key == "lambda_coral_logit") return format_double(cfg.lambda.coral_logit);
  if (key == "lambda_mmd_rep") return format_double(cfg.lambda.mmd_rep);
  if (key == "lambda_mmd_logit") return format_double(cfg.lambda.mmd_logit);
  if (key == "lambda_entropy") return format_double(cfg.lambda.entropy);
  if (key == "kernel_count") return std::to_string(cfg.kernel_count);
  if (key == "seed") return std::to_string(cfg.seed);
  throw Error(ErrorKind::ConfigError, "unknown key '" + std::string(key) + "'");
}

inline std::string to_config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& key : train_config_keys()) out += key + " = " + get_train_key(cfg, key) + "\n";
  return out;
}

/// Splits config text into ordered (key, value) pairs. Reports the 1-based
/// line of any line that is not blank, a comment, or `key = value`.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError,
                  "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    }
    out.emplace_back(std::string(key), std::string(detail::trim(line.substr(eq + 1))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

/// Per-step values of every objective term. `total` is the weighted sum;
/// terms with zero weight are still measured and reported.
struct LossReport {
  std::size_t step = 0;
  double ce = 0.0;
  double coral_rep = 0.0;
  double coral_logit = 0.0;
  double mmd_rep = 0.0;
  double mmd_logit = 0.0;
  double entropy = 0.0;
  double total = 0.0;

  double weighted_total(const LossWeights& w) const {
    return w.ce * ce + w.coral_rep * coral_rep + w.coral_logit * coral_logit +
           w.mmd_rep * mmd_rep + w.mmd_logit * mmd_logit + w.entropy * entropy;
  }

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

inline constexpr std::string_view kLossHistoryHeader =
    "step,ce,coral_rep,coral_logit,mmd_rep,mmd_logit,entropy,total";

inline std::string loss_history_csv(const std::vector<LossReport>& history) {
  std::string out(kLossHistoryHeader);
  out += '\n';
  for (const auto& r : history) {
    out += std::to_string(r.step);
    for (double v : {r.ce, r.coral_rep, r.coral_logit, r.mmd_rep, r.mmd_logit, r.entropy, r.total}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

struct ObjectiveResult {
  LossReport report;
  ParamGrads grads;
};

/// Joint objective from existing forward traces of both streams:
///   ce * CE(source logits) + coral_rep * CORAL(rep) + coral_logit * CORAL(logits)
///   + mmd_rep * MMD^2(rep) + mmd_logit * MMD^2(logits) + entropy * H(target logits).
/// Both MMD terms use `bank`, which is treated as a constant.
inline ObjectiveResult objective_from_traces(const Network& net, const ForwardTrace& source,
                                             std::span<const int> source_labels,
                                             const ForwardTrace& target, const LossWeights& w,
                                             const KernelBank& bank) {
  ObjectiveResult out;
  LossReport& r = out.report;

  const Matrix& rep_s = source.rep();
  const Matrix& rep_t = target.rep();
  const Matrix& logit_s = source.logits();
  const Matrix& logit_t = target.logits();

  std::optional<Matrix> g_rep_s, g_rep_t, g_logit_s, g_logit_t;
  auto accumulate = [](std::optional<Matrix>& slot, const Matrix& g, double weight) {
    if (weight == 0.0) return;
    if (slot) {
      *slot += g * weight;
    } else {
      slot = g * weight;
    }
  };

  const auto ce = cross_entropy_loss(logit_s, source_labels);
  r.ce = ce.value;
  accumulate(g_logit_s, ce.grad_source, w.ce);

  const auto coral_rep = coral_loss(rep_s, rep_t);
  r.coral_rep = coral_rep.value;
  accumulate(g_rep_s, coral_rep.grad_source, w.coral_rep);
  accumulate(g_rep_t, coral_rep.grad_target, w.coral_rep);

  const auto coral_logit = coral_loss(logit_s, logit_t);
  r.coral_logit = coral_logit.value;
  accumulate(g_logit_s, coral_logit.grad_source, w.coral_logit);
  accumulate(g_logit_t, coral_logit.grad_target, w.coral_logit);

  const auto mmd_rep = mmd2_loss(rep_s, rep_t, bank);
  r.mmd_rep = mmd_rep.value;
  accumulate(g_rep_s, mmd_rep.grad_source, w.mmd_rep);
  accumulate(g_rep_t, mmd_rep.grad_target, w.mmd_rep);

  const auto mmd_logit = mmd2_loss(logit_s, logit_t, bank);
  r.mmd_logit = mmd_logit.value;
  accumulate(g_logit_s, mmd_logit.grad_source, w.mmd_logit);
  accumulate(g_logit_t, mmd_logit.grad_target, w.mmd_logit);

  const auto entropy = entropy_loss(logit_t);
  r.entropy = entropy.value;
  accumulate(g_logit_t, entropy.grad_source, w.entropy);

  r.total = r.weighted_total(w);

  std::vector<TapGradients> streams;
  streams.push_back({&source, std::move(g_rep_s), std::move(g_logit_s)});
  if (g_rep_t || g_logit_t) streams.push_back({&target, std::move(g_rep_t), std::move(g_logit_t)});
  out.grads = backward(net, streams);
  return out;
}

/// Forward both streams through the shared network and evaluate the joint
/// objective with a fixed kernel bank.
inline ObjectiveResult total_objective(const Network& net, const BatchPair& batch,
                                       const LossWeights& w, const KernelBank& bank) {
  if (batch.source_labels.size() != batch.source_features.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "batch labels do not match source rows");
  }
  const ForwardTrace source = forward(net, batch.source_features);
  const ForwardTrace target = forward(net, batch.target_features);
  return objective_from_traces(net, source, batch.source_labels, target, w, bank);
}

// ---------------------------------------------------------------------------
// Training

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  Network network;
  OptimizerState optimizer;
  TrainConfig config;
  std::uint64_t step = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Seed streams derived from TrainConfig::seed.
inline std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, 0x1417); }
inline std::uint64_t batch_seed(std::uint64_t seed) { return derive_seed(seed, 0xBA7C); }

/// Runs the optimization loop one step at a time. Owns the network and the
/// optimizer state; the datasets are borrowed and must outlive it.
class Trainer {
 public:
  Trainer(TrainConfig config, LabeledView source, UnlabeledView target)
      : config_(std::move(config)),
        batches_(source, target, validated(config_).batch_size, batch_seed(config_.seed)),
        net_(init_network(config_.layer_specs(), init_seed(config_.seed))),
        opt_(OptimizerState::zeros_like(net_)) {
    check_data(source, target);
  }

  /// Continues from a checkpoint; the checkpoint's config governs.
  Trainer(const Checkpoint& resume, LabeledView source, UnlabeledView target)
      : config_(resume.config),
        batches_(source, target, validated(config_).batch_size, batch_seed(config_.seed)),
        net_(resume.network),
        opt_(resume.optimizer),
        step_(resume.step) {
    if (net_.specs != config_.layer_specs()) {
      throw Error(ErrorKind::CorruptCheckpoint, "checkpoint network does not match its config");
    }
    check_data(source, target);
  }

  const TrainConfig& config() const noexcept { return config_; }
  const Network& network() const noexcept { return net_; }
  const OptimizerState& optimizer() const noexcept { return opt_; }
  std::size_t steps_done() const noexcept { return step_; }
  std::size_t batches_per_epoch() const noexcept { return batches_.batches_per_epoch(); }
  std::size_t planned_steps() const noexcept { return config_.epochs * batches_per_epoch(); }
  bool finished() const noexcept { return step_ >= planned_steps(); }

  Checkpoint checkpoint() const { return {Checkpoint::kVersion, net_, opt_, config_, step_}; }

  LossReport step() {
    batches_.seek(step_);
    const BatchPair batch = batches_.next();
    const ForwardTrace source = forward(net_, batch.source_features);
    const ForwardTrace target = forward(net_, batch.target_features);
    if (!source.logits().all_finite() || !target.logits().all_finite()) {
      throw NonFiniteLossError(step_, "activations");
    }
    const KernelBank bank = median_bandwidths(source.rep(), target.rep(), config_.kernel_count);
    ObjectiveResult result =
        objective_from_traces(net_, source, batch.source_labels, target, config_.lambda, bank);
    result.report.step = step_;
    check_finite(result.report);
    sgd_step(net_, result.grads, config_.sgd(), opt_);
    ++step_;
    return result.report;
  }

  /// Runs up to `max_steps` more steps, stopping at the end of the planned
  /// schedule.
  std::vector<LossReport> run(std::size_t max_steps) {
    std::vector<LossReport> history;
    while (!finished() && history.size() < max_steps) history.push_back(step());
    return history;
  }

  std::vector<LossReport> run_to_end() { return run(planned_steps()); }

 private:
  static const TrainConfig& validated(const TrainConfig& cfg) {
    cfg.validate();
    return cfg;
  }

  void check_data(const LabeledView& source, const UnlabeledView& target) const {
    if (source.features().cols() != net_.input_dim()) {
      throw Error(ErrorKind::ShapeMismatch, "source has " +
                                                std::to_string(source.features().cols()) +
                                                " features, network expects " +
                                                std::to_string(net_.input_dim()));
    }
    if (target.features().cols() != net_.input_dim()) {
      throw Error(ErrorKind::ShapeMismatch, "target feature width does not match the network");
    }
    if (source.num_classes() != net_.num_classes()) {
      throw Error(ErrorKind::ShapeMismatch, "source has " + std::to_string(source.num_classes()) +
                                                " classes, network outputs " +
                                                std::to_string(net_.num_classes()));
    }
  }

  void check_finite(const LossReport& r) const {
    const std::pair<const char*, double> terms[] = {
        {"ce", r.ce},           {"coral_rep", r.coral_rep}, {"coral_logit", r.coral_logit},
        {"mmd_rep", r.mmd_rep}, {"mmd_logit", r.mmd_logit}, {"entropy", r.entropy},
        {"total", r.total}};
    for (const auto& [name, value] : terms) {
      if (!std::isfinite(value)) throw NonFiniteLossError(r.step, name);
    }
  }

  TrainConfig config_;
  BatchIterator batches_;
  Network net_;
  OptimizerState opt_;
  std::size_t step_ = 0;
};

struct TrainResult {
  Network network;
  OptimizerState optimizer;
  std::vector<LossReport> history;
};

inline TrainResult train(const TrainConfig& config, LabeledView source, UnlabeledView target) {
  Trainer trainer(config, source, target);
  auto history = trainer.run_to_end();
  return {trainer.network(), trainer.optimizer(), std::move(history)};
}

// ---------------------------------------------------------------------------
// Checkpoint file
//
//   "MDCK" | u32 version | section specs | section weights | section biases
//   | section velocities | section config | u32 crc32(all preceding bytes)
//
// Each section is a u64 byte length followed by its payload. Integers and
// doubles are little-endian.

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.append(s); }
  void section(const ByteWriter& payload) {
    u64(payload.bytes_.size());
    raw(payload.bytes_);
  }
  const std::string& bytes() const noexcept { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  ByteReader section() {
    const std::uint64_t len = u64();
    return ByteReader(raw(static_cast<std::size_t>(len)));
  }
  std::string_view rest() { return raw(bytes_.size() - pos_); }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::CorruptCheckpoint, "truncated data");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (!bytes.empty()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size(), 1u << 30));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), chunk);
    bytes.remove_prefix(chunk);
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  using detail::ByteWriter;
  const Network& net = ck.network;
  ByteWriter out;
  out.raw("MDCK");
  out.u32(ck.version);

  ByteWriter specs;
  specs.u32(static_cast<std::uint32_t>(net.specs.size()));
  for (const auto& s : net.specs) {
    specs.u64(s.in_dim);
    specs.u64(s.out_dim);
    specs.u8(static_cast<std::uint8_t>(s.activation));
  }
  out.section(specs);

  auto tensors = [](const std::vector<Matrix>& list) {
    ByteWriter w;
    for (const auto& m : list) {
      for (double v : m.data()) w.f64(v);
    }
    return w;
  };
  out.section(tensors(net.params.weights));
  out.section(tensors(net.params.biases));

  ByteWriter velocity = tensors(ck.optimizer.velocity.weights);
  velocity.raw(tensors(ck.optimizer.velocity.biases).bytes());
  out.section(velocity);

  ByteWriter config;
  config.raw(to_config_text(ck.config));
  config.raw("step = " + std::to_string(ck.step) + "\n");
  out.section(config);

  out.u32(detail::crc32_of(out.bytes()));
  return out.bytes();
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  using detail::ByteReader;
  if (bytes.size() < 12 || bytes.substr(0, 4) != "MDCK") {
    throw Error(ErrorKind::CorruptCheckpoint, "missing MDCK header");
  }
  ByteReader head(bytes.substr(4, 4));
  Checkpoint ck;
  ck.version = head.u32();
  if (ck.version != Checkpoint::kVersion) {
    throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(ck.version) +
                                                ", expected " +
                                                std::to_string(Checkpoint::kVersion));
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  ByteReader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32() != detail::crc32_of(body)) {
    throw Error(ErrorKind::CorruptCheckpoint, "CRC-32 mismatch");
  }

  ByteReader in(body.substr(8));
  ByteReader specs = in.section();
  const std::uint32_t count = specs.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec s;
    s.in_dim = static_cast<std::size_t>(specs.u64());
    s.out_dim = static_cast<std::size_t>(specs.u64());
    const auto act = specs.u8();
    if (act > 1) throw Error(ErrorKind::CorruptCheckpoint, "unknown activation code");
    s.activation = static_cast<Activation>(act);
    ck.network.specs.push_back(s);
  }
  try {
    validate_specs(ck.network.specs);
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptCheckpoint, e.what());
  }

  auto read_tensors = [&](ByteReader& r, bool biases) {
    std::vector<Matrix> list;
    for (const auto& s : ck.network.specs) {
      Matrix m(biases ? 1 : s.in_dim, s.out_dim);
      for (double& v : m.data()) v = r.f64();
      list.push_back(std::move(m));
    }
    return list;
  };
  ByteReader weights = in.section();
  ck.network.params.weights = read_tensors(weights, false);
  ByteReader biases = in.section();
  ck.network.params.biases = read_tensors(biases, true);
  ByteReader velocity = in.section();
  ck.optimizer.velocity.weights = read_tensors(velocity, false);
  ck.optimizer.velocity.biases = read_tensors(velocity, true);
  ByteReader config = in.section();
  const std::string_view text = config.rest();
  if (!specs.done() || !weights.done() || !biases.done() || !velocity.done() || !in.done()) {
    throw Error(ErrorKind::CorruptCheckpoint, "section sizes do not match the layer specs");
  }

  try {
    bool saw_step = false;
    for (const auto& [key, value] : parse_key_values(text)) {
      if (key == "step") {
        ck.step = detail::parse_uint(key, value);
        saw_step = true;
      } else if (!set_train_key(ck.config, key, value)) {
        throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
      }
    }
    if (!saw_step) throw Error(ErrorKind::ConfigError, "missing step count");
  } catch (const Error& e) {
    throw Error(ErrorKind::CorruptCheckpoint, std::string("config section: ") + e.what());
  }
  if (ck.network.specs != ck.config.layer_specs()) {
    throw Error(ErrorKind::CorruptCheckpoint, "layer specs disagree with the config section");
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  write_text_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoError, "failed reading checkpoint '" + path + "'");
  return deserialize_checkpoint(bytes);
}

}  // namespace mindisc
