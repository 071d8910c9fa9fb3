#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "reid/error.hpp"
#include "reid/matrix.hpp"
#include "reid/rng.hpp"

namespace reid::loss {

/// A loss value together with its gradient with respect to one input tensor.
struct Evaluation {
  double value = 0.0;
  Matrix grad;
};

namespace detail {

inline void check_finite(MatrixView m, const char* what) {
  for (std::size_t i = 0; i < m.rows * m.cols; ++i) {
    if (!std::isfinite(m.data[i])) {
      fail(ErrorCode::NonFinite, std::string(what) + " has a non-finite value at row " +
                                     std::to_string(i / m.cols) + ", column " +
                                     std::to_string(i % m.cols));
    }
  }
}

inline void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  require(labels.size() == rows, ErrorCode::DimensionMismatch,
          "label count " + std::to_string(labels.size()) + " does not match batch size " +
              std::to_string(rows));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || static_cast<std::size_t>(labels[j]) >= classes) {
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(labels[j]) + " at position " +
                                           std::to_string(j) + " outside [0, " +
                                           std::to_string(classes) + ")");
    }
  }
}

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Identity (softmax cross-entropy) loss

/// Mean over the batch of -log softmax(logits)[label], with the gradient
/// (softmax - onehot) / B with respect to the logits.
inline Evaluation id_loss_with_grad(const Matrix& logits, std::span<const int> labels) {
  require(logits.rows() >= 1 && logits.cols() >= 1, ErrorCode::DimensionMismatch,
          "logits must be at least 1 x 1");
  detail::check_finite(logits.view(), "logits");
  detail::check_labels(labels, logits.rows(), logits.cols());

  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  Evaluation out{0.0, Matrix(batch, classes)};
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = logits.row(b);
    const auto y = static_cast<std::size_t>(labels[b]);
    const double top = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - top);

    double term;
    if (row[y] == top) {
      // log1p keeps precision when the true class dominates.
      double rest = 0.0;
      for (std::size_t i = 0; i < classes; ++i) {
        if (i != y) rest += std::exp(row[i] - top);
      }
      term = std::log1p(rest);
    } else {
      term = (top - row[y]) + std::log(sum);
    }
    out.value += term;

    auto g = out.grad.row(b);
    for (std::size_t i = 0; i < classes; ++i) {
      g[i] = std::exp(row[i] - top) / sum / static_cast<double>(batch);
    }
    g[y] -= 1.0 / static_cast<double>(batch);
  }
  out.value /= static_cast<double>(batch);
  return out;
}

inline double id_loss(const Matrix& logits, std::span<const int> labels) {
  return id_loss_with_grad(logits, labels).value;
}

// ---------------------------------------------------------------------------
// Center loss

/// Per-class feature centers. Updates return a new bank.
struct CenterBank {
  Matrix centers;
  double update_rate = 0.5;

  std::size_t classes() const noexcept { return centers.rows(); }
  std::size_t dim() const noexcept { return centers.cols(); }
};

struct CenterEvaluation {
  double value = 0.0;
  Matrix grad_features;
  Matrix grad_centers;
};

/// 0.5 * sum_j ||f_j - c_{y_j}||^2, summed over the batch without averaging.
inline CenterEvaluation center_loss_with_grad(const Matrix& features, std::span<const int> labels,
                                              const CenterBank& bank) {
  require(features.rows() >= 1, ErrorCode::DimensionMismatch, "empty batch");
  require(features.cols() == bank.dim(), ErrorCode::DimensionMismatch,
          "feature width " + std::to_string(features.cols()) + " does not match center width " +
              std::to_string(bank.dim()));
  detail::check_finite(features.view(), "features");
  detail::check_finite(bank.centers.view(), "centers");
  detail::check_labels(labels, features.rows(), bank.classes());

  CenterEvaluation out{0.0, Matrix(features.rows(), features.cols()),
                       Matrix(bank.classes(), bank.dim())};
  for (std::size_t j = 0; j < features.rows(); ++j) {
    const auto y = static_cast<std::size_t>(labels[j]);
    const auto f = features.row(j);
    const auto c = bank.centers.row(y);
    auto gf = out.grad_features.row(j);
    auto gc = out.grad_centers.row(y);
    double sq = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double diff = f[k] - c[k];
      sq += diff * diff;
      gf[k] = diff;
      gc[k] -= diff;
    }
    out.value += 0.5 * sq;
  }
  return out;
}

inline double center_loss(const Matrix& features, std::span<const int> labels,
                          const CenterBank& bank) {
  return center_loss_with_grad(features, labels, bank).value;
}

/// Moves each center touched by the batch by update_rate * mean(f_j - c)
/// over its members; untouched centers are copied unchanged.
inline CenterBank update_centers(const CenterBank& bank, const Matrix& features,
                                 std::span<const int> labels) {
  require(features.cols() == bank.dim(), ErrorCode::DimensionMismatch,
          "feature width does not match center width");
  require(bank.update_rate >= 0.0 && bank.update_rate <= 1.0, ErrorCode::InvalidArgument,
          "update_rate must lie in [0, 1]");
  detail::check_finite(features.view(), "features");
  detail::check_labels(labels, features.rows(), bank.classes());

  Matrix delta(bank.classes(), bank.dim());
  std::vector<std::size_t> counts(bank.classes(), 0);
  for (std::size_t j = 0; j < features.rows(); ++j) {
    const auto y = static_cast<std::size_t>(labels[j]);
    ++counts[y];
    const auto f = features.row(j);
    const auto c = bank.centers.row(y);
    auto d = delta.row(y);
    for (std::size_t k = 0; k < f.size(); ++k) d[k] += f[k] - c[k];
  }
  CenterBank next = bank;
  for (std::size_t y = 0; y < bank.classes(); ++y) {
    if (counts[y] == 0) continue;
    auto c = next.centers.row(y);
    const auto d = delta.row(y);
    for (std::size_t k = 0; k < c.size(); ++k) {
      c[k] += bank.update_rate * d[k] / static_cast<double>(counts[y]);
    }
  }
  return next;
}

// ---------------------------------------------------------------------------
// Triplet loss

/// The margin alpha used for the extractors.
inline constexpr double kTripletMargin = 0.5;

enum class TripletMining {
  batch_hard,  // hardest positive and hardest negative per anchor
  all,         // mean over every valid (anchor, positive, negative)
};

inline void check_triplet_batch(const Matrix& features, std::span<const int> labels) {
  require(labels.size() == features.rows(), ErrorCode::DimensionMismatch,
          "label count does not match batch size");
  require(features.cols() >= 1, ErrorCode::DimensionMismatch, "feature width must be >= 1");
  detail::check_finite(features.view(), "features");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  require(counts.size() >= 2, ErrorCode::NoValidTriplet, "batch needs at least two identities");
  for (const auto& [label, count] : counts) {
    require(count >= 2, ErrorCode::NoValidTriplet,
            "identity " + std::to_string(label) + " appears once; no positive pair");
  }
}

/// Mean over anchors of [d_p - d_n + margin]_+ on Euclidean distances.
/// Ties in the hardest positive / negative resolve to the lowest index; the
/// hinge subgradient at zero is 0, as is the distance gradient at d = 0.
inline Evaluation triplet_loss_with_grad(const Matrix& features, std::span<const int> labels,
                                         double margin = kTripletMargin,
                                         TripletMining mining = TripletMining::batch_hard) {
  check_triplet_batch(features, labels);
  const std::size_t batch = features.rows();
  const std::size_t dim = features.cols();

  Matrix dist(batch, batch);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = i + 1; j < batch; ++j) {
      const double d = detail::euclidean(features.row(i), features.row(j));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  Evaluation out{0.0, Matrix(batch, dim)};
  // Adds s * d(dist(a, b))/d(features) into the gradient.
  auto accumulate = [&](std::size_t a, std::size_t b, double s) {
    const double d = dist(a, b);
    if (d == 0.0) return;
    const auto fa = features.row(a);
    const auto fb = features.row(b);
    auto ga = out.grad.row(a);
    auto gb = out.grad.row(b);
    for (std::size_t k = 0; k < dim; ++k) {
      const double u = s * (fa[k] - fb[k]) / d;
      ga[k] += u;
      gb[k] -= u;
    }
  };

  if (mining == TripletMining::batch_hard) {
    const double scale = 1.0 / static_cast<double>(batch);
    for (std::size_t a = 0; a < batch; ++a) {
      std::size_t pos = batch;
      std::size_t neg = batch;
      for (std::size_t j = 0; j < batch; ++j) {
        if (j == a) continue;
        if (labels[j] == labels[a]) {
          if (pos == batch || dist(a, j) > dist(a, pos)) pos = j;
        } else if (neg == batch || dist(a, j) < dist(a, neg)) {
          neg = j;
        }
      }
      const double hinge = dist(a, pos) - dist(a, neg) + margin;
      if (hinge > 0.0) {
        out.value += hinge * scale;
        accumulate(a, pos, scale);
        accumulate(a, neg, -scale);
      }
    }
    return out;
  }

  std::size_t triplets = 0;
  for (std::size_t a = 0; a < batch; ++a) {
    for (std::size_t p = 0; p < batch; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t n = 0; n < batch; ++n) {
        if (labels[n] != labels[a]) ++triplets;
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(triplets);
  for (std::size_t a = 0; a < batch; ++a) {
    for (std::size_t p = 0; p < batch; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t n = 0; n < batch; ++n) {
        if (labels[n] == labels[a]) continue;
        const double hinge = dist(a, p) - dist(a, n) + margin;
        if (hinge > 0.0) {
          out.value += hinge * scale;
          accumulate(a, p, scale);
          accumulate(a, n, -scale);
        }
      }
    }
  }
  return out;
}

inline double triplet_loss_batch_hard(const Matrix& features, std::span<const int> labels,
                                      double margin = kTripletMargin) {
  return triplet_loss_with_grad(features, labels, margin, TripletMining::batch_hard).value;
}

/// Smallest distance of the batch-hard loss to a non-differentiable point:
/// the hinge at zero, a tie for hardest positive, or a tie for hardest
/// negative. Gradient checks need this well above the finite-difference step.
inline double triplet_kink_distance(const Matrix& features, std::span<const int> labels,
                                    double margin = kTripletMargin) {
  check_triplet_batch(features, labels);
  const std::size_t batch = features.rows();
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < batch; ++a) {
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t j = 0; j < batch; ++j) {
      if (j == a) continue;
      const double d = detail::euclidean(features.row(a), features.row(j));
      (labels[j] == labels[a] ? pos : neg).push_back(d);
    }
    std::sort(pos.begin(), pos.end(), std::greater<>());
    std::sort(neg.begin(), neg.end());
    closest = std::min(closest, std::abs(pos[0] - neg[0] + margin));
    closest = std::min(closest, pos[0]);
    if (pos.size() > 1) closest = std::min(closest, pos[0] - pos[1]);
    if (neg.size() > 1) closest = std::min(closest, neg[1] - neg[0]);
  }
  return closest;
}

// ---------------------------------------------------------------------------
// Combined objectives

/// The extractor objective: id + triplet + beta * center.
inline constexpr double kCenterWeight = 0.0005;

inline double total_loss(double id, double triplet, double center, double beta = kCenterWeight) {
  const double value = id + triplet + beta * center;
  require(std::isfinite(id) && std::isfinite(triplet) && std::isfinite(center) &&
              std::isfinite(beta) && std::isfinite(value),
          ErrorCode::NonFinite, "total_loss inputs must be finite");
  return value;
}

/// The attribute-guided network objective: reid + alpha * type + beta * color.
inline double agn_loss(double reid, double type_ce, double color_ce, double alpha = 1.0,
                       double beta = 1.0) {
  const double value = reid + alpha * type_ce + beta * color_ce;
  require(std::isfinite(reid) && std::isfinite(type_ce) && std::isfinite(color_ce) &&
              std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(value),
          ErrorCode::NonFinite, "agn_loss inputs must be finite");
  return value;
}

// ---------------------------------------------------------------------------
// Learning-rate schedule

struct TrainSchedule {
  double base_lr = 3.5e-4;
  double warmup_start_lr = 3.5e-5;
  int warmup_epochs = 10;
  std::vector<int> decay_epochs = {40, 70};
  // Each decay divides by this; division keeps the plateaus exactly at
  // base / 10^k, which multiplying by 0.1 does not.
  double decay_divisor = 10.0;
  int total_epochs = 120;

  void validate() const {
    require(warmup_epochs >= 0 && total_epochs > 0, ErrorCode::InvalidArgument,
            "epoch counts must be nonnegative");
    require(decay_divisor > 0.0, ErrorCode::InvalidArgument, "decay divisor must be positive");
    int previous = warmup_epochs;
    for (int e : decay_epochs) {
      require(e > previous, ErrorCode::InvalidArgument, "decay epochs must increase past warm-up");
      previous = e;
    }
    require(previous <= total_epochs, ErrorCode::InvalidArgument,
            "last decay epoch exceeds total epochs");
  }
};

inline double lr_at_epoch(const TrainSchedule& schedule, int epoch) {
  schedule.validate();
  if (epoch < 0 || epoch >= schedule.total_epochs) {
    fail(ErrorCode::EpochOutOfRange, "epoch " + std::to_string(epoch) + " outside [0, " +
                                         std::to_string(schedule.total_epochs) + ")");
  }
  if (epoch < schedule.warmup_epochs) {
    const double t = static_cast<double>(epoch) / schedule.warmup_epochs;
    return schedule.warmup_start_lr + t * (schedule.base_lr - schedule.warmup_start_lr);
  }
  double divisor = 1.0;
  for (int e : schedule.decay_epochs) {
    if (epoch >= e) divisor *= schedule.decay_divisor;
  }
  return schedule.base_lr / divisor;
}

// ---------------------------------------------------------------------------
// P x K identity sampler

/// P distinct identities, K indices each, grouped by identity. Identities
/// are chosen uniformly; images within an identity without replacement when
/// it has at least K, with replacement otherwise.
inline std::vector<std::size_t> pk_sample(std::span<const int> labels, std::size_t P,
                                          std::size_t K, std::uint64_t seed) {
  require(P >= 1 && K >= 1, ErrorCode::InvalidArgument, "P and K must be positive");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  if (by_label.size() < P) {
    fail(ErrorCode::NotEnoughIdentities, "requested " + std::to_string(P) +
                                             " identities but only " +
                                             std::to_string(by_label.size()) + " exist");
  }
  std::vector<int> ids;
  ids.reserve(by_label.size());
  for (const auto& [label, _] : by_label) ids.push_back(label);

  Rng rng(seed);
  rng.shuffle(ids);
  std::vector<std::size_t> out;
  out.reserve(P * K);
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<std::size_t> pool = by_label[ids[p]];
    if (pool.size() >= K) {
      rng.shuffle(pool);
      out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(K));
    } else {
      for (std::size_t k = 0; k < K; ++k) out.push_back(pool[rng.below(pool.size())]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

/// A scalar function of a flat parameter vector with its analytic gradient.
using DifferentiableFn = std::function<double(std::span<const double> point, std::vector<double>* grad)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
};

/// Central differences at step epsilon. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradientCheck gradient_check(const DifferentiableFn& fn, std::span<const double> point,
                                    double epsilon = 1e-5, double floor = 1e-6) {
  require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
  std::vector<double> analytic;
  const double base = fn(point, &analytic);
  require(std::isfinite(base), ErrorCode::NonFinite, "kernel value is not finite");
  require(analytic.size() == point.size(), ErrorCode::DimensionMismatch,
          "gradient length does not match point length");

  std::vector<double> probe(point.begin(), point.end());
  GradientCheck result;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + epsilon;
    const double up = fn(probe, nullptr);
    probe[i] = saved - epsilon;
    const double down = fn(probe, nullptr);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    require(std::isfinite(numeric) && std::isfinite(analytic[i]), ErrorCode::NonFinite,
            "gradient at coordinate " + std::to_string(i) + " is not finite");
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
    }
  }
  return result;
}

/// Wraps the loss kernels as flat-vector functions for gradient_check.
inline DifferentiableFn id_loss_fn(std::size_t batch, std::size_t classes, std::vector<int> labels) {
  return [=](std::span<const double> p, std::vector<double>* grad) {
    const Matrix logits(batch, classes, std::vector<double>(p.begin(), p.end()));
    auto eval = id_loss_with_grad(logits, labels);
    if (grad) grad->assign(eval.grad.data().begin(), eval.grad.data().end());
    return eval.value;
  };
}

/// Parameters are the batch features followed by the center bank.
inline DifferentiableFn center_loss_fn(std::size_t batch, std::size_t classes, std::size_t dim,
                                       std::vector<int> labels) {
  return [=](std::span<const double> p, std::vector<double>* grad) {
    const std::size_t nf = batch * dim;
    const Matrix features(batch, dim, std::vector<double>(p.begin(), p.begin() + nf));
    const CenterBank bank{Matrix(classes, dim, std::vector<double>(p.begin() + nf, p.end())), 0.5};
    auto eval = center_loss_with_grad(features, labels, bank);
    if (grad) {
      grad->assign(eval.grad_features.data().begin(), eval.grad_features.data().end());
      grad->insert(grad->end(), eval.grad_centers.data().begin(), eval.grad_centers.data().end());
    }
    return eval.value;
  };
}

inline DifferentiableFn triplet_loss_fn(std::size_t batch, std::size_t dim, std::vector<int> labels,
                                        double margin = kTripletMargin,
                                        TripletMining mining = TripletMining::batch_hard) {
  return [=](std::span<const double> p, std::vector<double>* grad) {
    const Matrix features(batch, dim, std::vector<double>(p.begin(), p.end()));
    auto eval = triplet_loss_with_grad(features, labels, margin, mining);
    if (grad) grad->assign(eval.grad.data().begin(), eval.grad.data().end());
    return eval.value;
  };
}

}  // namespace reid::loss
