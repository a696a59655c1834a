#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mindisc/error.hpp"
#include "mindisc/matrix.hpp"
#include "mindisc/rng.hpp"

namespace mindisc {

class LabeledView;
class UnlabeledView;

struct Dataset {
  Matrix features;
  std::optional<std::vector<int>> labels;
  std::string domain_name;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return features.rows(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  void validate() const {
    if (!features.all_finite()) {
      throw Error(ErrorKind::NonFiniteValue, "dataset '" + domain_name + "' has non-finite values");
    }
    if (!labels) return;
    if (labels->size() != features.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "dataset '" + domain_name + "' has " +
                                                std::to_string(labels->size()) + " labels for " +
                                                std::to_string(features.rows()) + " rows");
    }
    for (int y : *labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw Error(ErrorKind::LabelOutOfRange,
                    "label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) +
                        ") in dataset '" + domain_name + "'");
      }
    }
  }

  LabeledView labeled() const;
  UnlabeledView unlabeled() const;
};

/// Read-only view of a dataset whose labels may be used for training.
class LabeledView {
 public:
  explicit LabeledView(const Dataset& d) : d_(&d) {
    if (!d.labels) {
      throw Error(ErrorKind::UnlabeledDataset, "dataset '" + d.domain_name + "' has no labels");
    }
  }
  const Matrix& features() const noexcept { return d_->features; }
  const std::vector<int>& labels() const noexcept { return *d_->labels; }
  std::size_t num_classes() const noexcept { return d_->num_classes; }
  std::size_t size() const noexcept { return d_->features.rows(); }
  const std::string& name() const noexcept { return d_->domain_name; }

 private:
  const Dataset* d_;
};

/// Read-only view exposing features only; target domains reach the trainer
/// through this type so their labels are unreachable.
class UnlabeledView {
 public:
  explicit UnlabeledView(const Dataset& d) : d_(&d) {}
  const Matrix& features() const noexcept { return d_->features; }
  std::size_t size() const noexcept { return d_->features.rows(); }
  const std::string& name() const noexcept { return d_->domain_name; }

 private:
  const Dataset* d_;
};

inline LabeledView Dataset::labeled() const { return LabeledView(*this); }
inline UnlabeledView Dataset::unlabeled() const { return UnlabeledView(*this); }

/// Rotates 2-D points counter-clockwise about the origin.
inline Matrix rotate2d(const Matrix& points, double degrees) {
  if (points.cols() != 2) {
    throw Error(ErrorKind::ShapeMismatch, "rotate2d needs 2 columns, got " + shape_string(points));
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  Matrix out(points.rows(), 2);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0);
    const double y = points(i, 1);
    out(i, 0) = c * x - s * y;
    out(i, 1) = s * x + c * y;
  }
  return out;
}

/// Two interleaved half circles: class 0 on (cos t, sin t), class 1 on
/// (1 - cos t, 0.5 - sin t), t uniform in [0, pi]. Gaussian noise is added
/// before the rotation.
inline Dataset gen_two_moons(std::size_t n, double noise_sd, double rotation_deg,
                             std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::InvalidParam, "two-moons needs n >= 2");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw Error(ErrorKind::InvalidParam, "two-moons noise must be finite and >= 0");
  }
  if (!std::isfinite(rotation_deg)) {
    throw Error(ErrorKind::InvalidParam, "two-moons rotation must be finite");
  }
  Rng rng(seed);
  Dataset d;
  d.features = Matrix(n, 2);
  d.labels = std::vector<int>(n);
  d.num_classes = 2;
  d.domain_name = "two-moons";
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform() * std::numbers::pi;
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    if (noise_sd > 0.0) {
      x += noise_sd * rng.normal();
      y += noise_sd * rng.normal();
    }
    d.features(i, 0) = x;
    d.features(i, 1) = y;
    (*d.labels)[i] = label;
  }
  if (rotation_deg != 0.0) d.features = rotate2d(d.features, rotation_deg);
  return d;
}

struct DomainPair {
  Dataset source;
  Dataset target;
};

/// Class-conditional Gaussians. Source classes are unit-variance around
/// centers drawn from N(0, 3^2 I); the target uses the same centers moved by
/// `mean_shift` with variance `cov_scale`. Labels cycle 0..C-1.
inline DomainPair gen_gaussian_shift(std::size_t n, std::size_t dim,
                                     const std::vector<double>& mean_shift, double cov_scale,
                                     std::size_t num_classes, std::uint64_t seed) {
  if (num_classes == 0 || n < num_classes) {
    throw Error(ErrorKind::InvalidParam, "gaussian-shift needs n >= num_classes >= 1");
  }
  if (dim == 0) throw Error(ErrorKind::InvalidParam, "gaussian-shift needs dim >= 1");
  if (!(cov_scale > 0.0) || !std::isfinite(cov_scale)) {
    throw Error(ErrorKind::InvalidParam, "gaussian-shift cov_scale must be > 0");
  }
  if (mean_shift.size() != dim) {
    throw Error(ErrorKind::InvalidParam, "gaussian-shift mean_shift has " +
                                             std::to_string(mean_shift.size()) +
                                             " entries, expected " + std::to_string(dim));
  }
  Rng center_rng(derive_seed(seed, 0));
  Matrix centers(num_classes, dim);
  for (double& v : centers.data()) v = 3.0 * center_rng.normal();

  auto sample = [&](std::uint64_t tag, bool shifted, const std::string& name) {
    Rng rng(derive_seed(seed, tag));
    const double sd = shifted ? std::sqrt(cov_scale) : 1.0;
    Dataset d;
    d.features = Matrix(n, dim);
    d.labels = std::vector<int>(n);
    d.num_classes = num_classes;
    d.domain_name = name;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = i % num_classes;
      for (std::size_t j = 0; j < dim; ++j) {
        d.features(i, j) = centers(c, j) + (shifted ? mean_shift[j] : 0.0) + sd * rng.normal();
      }
      (*d.labels)[i] = static_cast<int>(c);
    }
    return d;
  };
  return {sample(1, false, "gaussian-source"), sample(2, true, "gaussian-target")};
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorKind::IoError, "failed to format number");
  return std::string(buf, end);
}

struct CsvOptions {
  bool labeled = true;
  bool header = false;         // skip the first line
  std::size_t num_classes = 0; // 0: infer as max label + 1
};

inline Dataset parse_csv(std::istream& in, const CsvOptions& opts, const std::string& name) {
  Dataset d;
  d.domain_name = name;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> cells;

  while (std::getline(in, line)) {
    ++line_no;
    if (opts.header && line_no == 1) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    cells.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (width == 0) {
      width = cells.size();
      if (opts.labeled && width < 2) {
        throw RowError(ErrorKind::MalformedRow, line_no, 1,
                       "labeled rows need at least one feature and a label");
      }
    } else if (cells.size() != width) {
      throw RowError(ErrorKind::MalformedRow, line_no, std::min(cells.size(), width) + 1,
                     "expected " + std::to_string(width) + " columns, found " +
                         std::to_string(cells.size()));
    }

    const std::size_t feature_cols = opts.labeled ? width - 1 : width;
    for (std::size_t c = 0; c < feature_cols; ++c) {
      std::string_view cell = cells[c];
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw RowError(ErrorKind::MalformedRow, line_no, c + 1,
                       "not a number: '" + std::string(cell) + "'");
      }
      if (!std::isfinite(v)) {
        throw RowError(ErrorKind::NonFiniteValue, line_no, c + 1,
                       "non-finite value '" + std::string(cell) + "'");
      }
      values.push_back(v);
    }
    if (opts.labeled) {
      std::string_view cell = cells.back();
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      int y = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), y);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw RowError(ErrorKind::MalformedRow, line_no, width,
                       "label is not an integer: '" + std::string(cell) + "'");
      }
      if (y < 0 || (opts.num_classes > 0 && static_cast<std::size_t>(y) >= opts.num_classes)) {
        throw RowError(ErrorKind::LabelOutOfRange, line_no, width,
                       "label " + std::to_string(y) + " outside [0, " +
                           std::to_string(opts.num_classes) + ")");
      }
      labels.push_back(y);
    }
    ++rows;
  }

  const std::size_t feature_cols = opts.labeled && width > 0 ? width - 1 : width;
  d.features = Matrix(rows, feature_cols, std::move(values));
  if (opts.labeled) {
    std::size_t classes = opts.num_classes;
    if (classes == 0) {
      for (int y : labels) classes = std::max(classes, static_cast<std::size_t>(y) + 1);
    }
    d.num_classes = classes;
    d.labels = std::move(labels);
  } else {
    d.num_classes = opts.num_classes;
  }
  return d;
}

inline Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open '" + path + "'");
  return parse_csv(in, opts, path);
}

/// One row per sample; the label, when present and `with_labels`, is the
/// last column. LF line endings, shortest round-trip number formatting.
inline std::string to_csv(const Dataset& d, bool with_labels = true) {
  std::string out;
  const bool labels = with_labels && d.labels.has_value();
  for (std::size_t i = 0; i < d.features.rows(); ++i) {
    for (std::size_t j = 0; j < d.features.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(d.features(i, j));
    }
    if (labels) {
      out += ',';
      out += std::to_string((*d.labels)[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path + "'");
}

inline void write_csv(const std::string& path, const Dataset& d, bool with_labels = true) {
  write_text_file(path, to_csv(d, with_labels));
}

// ---------------------------------------------------------------------------
// Paired mini-batches

/// One training step's worth of data. There is deliberately no target label
/// field.
struct BatchPair {
  Matrix source_features;
  std::vector<int> source_labels;
  Matrix target_features;
};

/// Endless sequence of equal-sized (source, target) batches.
///
/// Each epoch draws fresh, independent permutations of both domains from
/// streams derived from (seed, epoch), so any step can be reached directly
/// with `seek`. An epoch holds floor(min(N_s, N_t) / batch_size) pairs; the
/// tail of each permutation past that point is skipped for the epoch.
class BatchIterator {
 public:
  BatchIterator(LabeledView source, UnlabeledView target, std::size_t batch_size,
                std::uint64_t seed)
      : source_(source), target_(target), batch_size_(batch_size), seed_(seed) {
    if (batch_size < 2) {
      throw Error(ErrorKind::InvalidParam, "batch_size must be >= 2 (covariance needs 2 rows)");
    }
    if (source.size() == 0 || target.size() == 0) {
      throw Error(ErrorKind::InvalidParam, "batch iteration needs non-empty source and target");
    }
    if (source.features().cols() != target.features().cols()) {
      throw Error(ErrorKind::ShapeMismatch, "source and target feature widths differ");
    }
    batches_per_epoch_ = std::min(source.size(), target.size()) / batch_size;
    if (batches_per_epoch_ == 0) {
      throw Error(ErrorKind::InvalidParam,
                  "batch_size " + std::to_string(batch_size) + " exceeds the smaller domain (" +
                      std::to_string(std::min(source.size(), target.size())) + " rows)");
    }
  }

  std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  std::size_t position() const noexcept { return step_; }
  void seek(std::size_t step) noexcept { step_ = step; }

  /// Row indices used at `step`, source first.
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> indices_at(std::size_t step) {
    ensure_epoch(step / batches_per_epoch_);
    const std::size_t offset = (step % batches_per_epoch_) * batch_size_;
    auto slice = [&](const std::vector<std::size_t>& perm) {
      return std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                                      perm.begin() + static_cast<std::ptrdiff_t>(offset + batch_size_));
    };
    return {slice(source_perm_), slice(target_perm_)};
  }

  BatchPair next() {
    auto [src, tgt] = indices_at(step_++);
    BatchPair pair;
    pair.source_features = gather_rows(source_.features(), src);
    pair.source_labels.reserve(src.size());
    for (std::size_t i : src) pair.source_labels.push_back(source_.labels()[i]);
    pair.target_features = gather_rows(target_.features(), tgt);
    return pair;
  }

 private:
  void ensure_epoch(std::size_t epoch) {
    if (cached_epoch_ && *cached_epoch_ == epoch) return;
    source_perm_ = permutation(source_.size(), derive_seed(seed_, 2 * epoch));
    target_perm_ = permutation(target_.size(), derive_seed(seed_, 2 * epoch + 1));
    cached_epoch_ = epoch;
  }

  static std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    Rng rng(seed);
    rng.shuffle(p.begin(), p.end());
    return p;
  }

  LabeledView source_;
  UnlabeledView target_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t batches_per_epoch_ = 0;
  std::size_t step_ = 0;
  std::optional<std::size_t> cached_epoch_;
  std::vector<std::size_t> source_perm_;
  std::vector<std::size_t> target_perm_;
};

}  // namespace mindisc
