#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mindisc/data.hpp"
#include "mindisc/error.hpp"
#include "mindisc/losses.hpp"
#include "mindisc/matrix.hpp"
#include "mindisc/network.hpp"
#include "mindisc/numerics.hpp"
#include "mindisc/trainer.hpp"

namespace mindisc {

/// Argmax class per row; ties resolve to the lowest class index.
inline std::vector<int> predict(const Network& net, const Matrix& features) {
  const Matrix logits = forward(net, features).logits();
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    out[i] = static_cast<int>(argmax(logits.row(i)));
  }
  return out;
}

/// 100 * (correct / total).
inline double accuracy_percent(std::span<const int> predicted, std::span<const int> truth) {
  if (truth.empty()) throw Error(ErrorKind::EmptyDataset, "accuracy of an empty dataset");
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::ShapeMismatch, "prediction and label counts differ");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
}

inline double accuracy(const Network& net, const LabeledView& data) {
  if (data.size() == 0) throw Error(ErrorKind::EmptyDataset, "accuracy of an empty dataset");
  return accuracy_percent(predict(net, data.features()), data.labels());
}

inline double accuracy(const Network& net, const Dataset& data) {
  return accuracy(net, data.labeled());
}

/// "accuracy=<percent>" with two decimals.
inline std::string format_accuracy(double percent) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "accuracy=%.2f", percent);
  return buf;
}

/// Mean per-sample entropy (nats) of the network's predictive distribution.
inline double mean_prediction_entropy(const Network& net, const Matrix& features) {
  if (features.rows() == 0) throw Error(ErrorKind::EmptyDataset, "entropy of an empty set");
  return entropy_loss(forward(net, features).logits()).value;
}

// ---------------------------------------------------------------------------
// Benchmarks

struct TransferTask {
  std::string name;
  Dataset source;
  Dataset target;  // labels used for scoring only
};

struct MethodSpec {
  std::string name;
  LossWeights weights;
};

/// The four compared methods, derived from one set of base weights:
/// baseline (no adaptation), CORAL terms only, MMD terms only, and the joint
/// objective (CORAL + MMD + entropy).
inline std::vector<MethodSpec> standard_methods(const LossWeights& base = {}) {
  LossWeights baseline{base.ce, 0.0, 0.0, 0.0, 0.0, 0.0};
  LossWeights coral = baseline;
  coral.coral_rep = base.coral_rep;
  coral.coral_logit = base.coral_logit;
  LossWeights mmd = baseline;
  mmd.mmd_rep = base.mmd_rep;
  mmd.mmd_logit = base.mmd_logit;
  return {{"baseline", baseline}, {"coral", coral}, {"mmd", mmd}, {"joint", base}};
}

inline std::optional<MethodSpec> find_standard_method(const std::string& name,
                                                      const LossWeights& base = {}) {
  for (auto& m : standard_methods(base)) {
    if (m.name == name) return m;
  }
  return std::nullopt;
}

struct BenchmarkCell {
  std::string task;
  std::string method;
  std::uint64_t seed = 0;
  double accuracy = 0.0;        // target accuracy, percent
  double target_entropy = 0.0;  // mean prediction entropy on the target, nats
};

struct BenchmarkMean {
  std::string method;
  double accuracy = 0.0;
  std::size_t count = 0;
};

inline constexpr std::string_view kBenchmarkHeader = "task,method,seed,accuracy";
inline constexpr std::string_view kMeanTaskName = "avg";

struct BenchmarkTable {
  std::vector<BenchmarkCell> cells;  // sorted by (task, method, seed)
  std::vector<BenchmarkMean> means;  // one per method, sorted by name

  /// Mean of the cells matching `method` (and `task`, when given).
  double mean_accuracy(const std::string& method, const std::string& task = "") const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
      if (c.method == method && (task.empty() || c.task == task)) {
        sum += c.accuracy;
        ++n;
      }
    }
    if (n == 0) throw Error(ErrorKind::InvalidParam, "no cells for method '" + method + "'");
    return sum / static_cast<double>(n);
  }

  double mean_entropy(const std::string& method) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
      if (c.method == method) {
        sum += c.target_entropy;
        ++n;
      }
    }
    if (n == 0) throw Error(ErrorKind::InvalidParam, "no cells for method '" + method + "'");
    return sum / static_cast<double>(n);
  }

  std::string to_csv() const {
    std::string out(kBenchmarkHeader);
    out += '\n';
    for (const auto& c : cells) {
      out += c.task + ',' + c.method + ',' + std::to_string(c.seed) + ',' +
             format_double(c.accuracy) + '\n';
    }
    for (const auto& m : means) {
      out += std::string(kMeanTaskName) + ',' + m.method + ",mean," + format_double(m.accuracy) +
             '\n';
    }
    return out;
  }
};

/// Trains and scores one cell. The target reaches the trainer unlabeled.
inline BenchmarkCell run_cell(const TransferTask& task, const MethodSpec& method,
                              const TrainConfig& base, std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.lambda = method.weights;
  cfg.seed = seed;
  const auto result = train(cfg, task.source.labeled(), task.target.unlabeled());
  BenchmarkCell cell;
  cell.task = task.name;
  cell.method = method.name;
  cell.seed = seed;
  cell.accuracy = accuracy(result.network, task.target.labeled());
  cell.target_entropy = mean_prediction_entropy(result.network, task.target.features);
  return cell;
}

/// Trains every (task, method, seed) cell independently, on up to `jobs`
/// threads. Output order does not depend on `jobs`.
inline BenchmarkTable run_benchmark(const std::vector<TransferTask>& tasks,
                                    const std::vector<MethodSpec>& methods,
                                    const std::vector<std::uint64_t>& seeds,
                                    const TrainConfig& base, std::size_t jobs = 1) {
  if (tasks.empty()) throw Error(ErrorKind::InvalidParam, "benchmark needs at least one task");
  if (methods.empty()) throw Error(ErrorKind::InvalidParam, "benchmark needs at least one method");
  if (seeds.empty()) throw Error(ErrorKind::InvalidParam, "benchmark needs at least one seed");
  for (const auto& t : tasks) {
    if (t.source.num_classes != t.target.num_classes) {
      throw Error(ErrorKind::ShapeMismatch, "task '" + t.name + "': class counts differ");
    }
  }

  struct Job {
    std::size_t task, method, seed;
  };
  std::vector<Job> work;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      for (std::size_t s = 0; s < seeds.size(); ++s) work.push_back({t, m, s});
    }
  }

  std::vector<BenchmarkCell> cells(work.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        const Job& j = work[i];
        cells[i] = run_cell(tasks[j.task], methods[j.method], base, seeds[j.seed]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, work.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkTable table;
  table.cells = std::move(cells);
  std::stable_sort(table.cells.begin(), table.cells.end(),
                   [](const BenchmarkCell& a, const BenchmarkCell& b) {
                     if (a.task != b.task) return a.task < b.task;
                     if (a.method != b.method) return a.method < b.method;
                     return a.seed < b.seed;
                   });
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& c : table.cells) {
    auto& [sum, n] = sums[c.method];
    sum += c.accuracy;
    ++n;
  }
  for (const auto& [method, acc] : sums) {
    table.means.push_back({method, acc.first / static_cast<double>(acc.second), acc.second});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Embedding export

struct Embedding {
  Matrix coords;  // rows x 2
  std::vector<std::string> domain;
  std::vector<int> label;  // -1 where unlabeled
  std::size_t source_rows = 0;

  std::string to_csv() const {
    std::string out = "x,y,domain,label\n";
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      out += format_double(coords(i, 0)) + ',' + format_double(coords(i, 1)) + ',' + domain[i] +
             ',' + std::to_string(label[i]) + '\n';
    }
    return out;
  }

  /// Euclidean distance between the source and target centroids.
  double centroid_distance() const {
    double sx = 0, sy = 0, tx = 0, ty = 0;
    const std::size_t nt = coords.rows() - source_rows;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      if (i < source_rows) {
        sx += coords(i, 0);
        sy += coords(i, 1);
      } else {
        tx += coords(i, 0);
        ty += coords(i, 1);
      }
    }
    const double ns = static_cast<double>(source_rows);
    const double ntd = static_cast<double>(nt);
    return std::hypot(sx / ns - tx / ntd, sy / ns - ty / ntd);
  }

  /// Root-mean-square distance of all points from the pooled centroid.
  double spread() const {
    const auto means = column_means(coords);
    double acc = 0.0;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
      const double dx = coords(i, 0) - means[0];
      const double dy = coords(i, 1) - means[1];
      acc += dx * dx + dy * dy;
    }
    return std::sqrt(acc / static_cast<double>(coords.rows()));
  }
};

/// PCA projection of the representation-tap activations of both domains.
inline Embedding compute_embedding(const Network& net, const Dataset& source,
                                   const Dataset& target) {
  if (source.size() == 0 || target.size() == 0) {
    throw Error(ErrorKind::EmptyDataset, "embedding needs non-empty source and target");
  }
  const Matrix rep_s = forward(net, source.features).rep();
  const Matrix rep_t = forward(net, target.features).rep();
  Embedding e;
  e.coords = pca2d(vstack(rep_s, rep_t));
  e.source_rows = source.size();
  for (const Dataset* d : {&source, &target}) {
    for (std::size_t i = 0; i < d->size(); ++i) {
      e.domain.push_back(d->domain_name);
      e.label.push_back(d->labels ? (*d->labels)[i] : -1);
    }
  }
  return e;
}

inline Embedding export_embedding(const Network& net, const Dataset& source, const Dataset& target,
                                  const std::string& path) {
  Embedding e = compute_embedding(net, source, target);
  write_text_file(path, e.to_csv());
  return e;
}

}  // namespace mindisc
