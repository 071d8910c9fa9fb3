#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "reid/losses.hpp"
#include "reid/rng.hpp"

namespace reid::tools {

struct CheckRecord {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

inline std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.below(classes));
  return labels;
}

inline std::vector<double> random_point(Rng& rng, std::size_t n, double scale) {
  std::vector<double> p(n);
  for (auto& v : p) v = scale * rng.normal();
  return p;
}

/// Worst relative gradient error of the three differentiable kernels over
/// `points` seeded evaluation points each.
inline std::vector<CheckRecord> gradient_checks(std::uint64_t seed, std::size_t points,
                                                double tolerance = 1e-4) {
  Rng rng(seed);
  double id_worst = 0.0;
  double center_worst = 0.0;
  double triplet_worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    {
      const auto labels = random_labels(rng, 3, 5);
      const auto p = random_point(rng, 15, 2.0);
      id_worst = std::max(id_worst, loss::gradient_check(loss::id_loss_fn(3, 5, labels), p).max_relative_error);
    }
    {
      const auto labels = random_labels(rng, 4, 3);
      const auto p = random_point(rng, 4 * 3 + 3 * 3, 1.0);
      center_worst = std::max(
          center_worst, loss::gradient_check(loss::center_loss_fn(4, 3, 3, labels), p).max_relative_error);
    }
    {
      const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
      std::vector<double> p;
      // Resample until the point is away from every kink.
      do {
        p = random_point(rng, 8 * 4, 1.0);
      } while (loss::triplet_kink_distance(Matrix(8, 4, p), labels) < 1e-3);
      triplet_worst = std::max(
          triplet_worst, loss::gradient_check(loss::triplet_loss_fn(8, 4, labels), p).max_relative_error);
    }
  }
  return {
      {"id_loss_gradient", id_worst < tolerance, id_worst, tolerance},
      {"center_loss_gradient", center_worst < tolerance, center_worst, tolerance},
      {"triplet_loss_gradient", triplet_worst < tolerance, triplet_worst, tolerance},
  };
}

inline std::vector<CheckRecord> loss_value_checks() {
  std::vector<CheckRecord> out;
  {
    const Matrix logits(1, 4, 0.25);
    const std::vector<int> labels = {2};
    const double err = std::abs(loss::id_loss(logits, labels) - std::log(4.0));
    out.push_back({"id_loss_uniform_ln4", err <= 1e-12, err, 1e-12});
  }
  {
    const Matrix logits(1, 4, std::vector<double>{0.0, 50.0, 0.0, 0.0});
    const std::vector<int> labels = {1};
    const double v = loss::id_loss(logits, labels);
    out.push_back({"id_loss_confident", v < 1e-20, v, 1e-20});
  }
  {
    // Two identities on adjacent edges of a unit square: every anchor's
    // hardest positive and nearest negative are both at distance 1.
    const Matrix f(4, 2, std::vector<double>{0, 0, 1, 0, 1, 1, 0, 1});
    const std::vector<int> labels = {0, 0, 1, 1};
    const double v = loss::triplet_loss_batch_hard(f, labels, loss::kTripletMargin);
    out.push_back({"triplet_equidistant_margin", v == 0.5, v, 0.0});
  }
  {
    const Matrix centers(2, 3, std::vector<double>{1, 2, 3, -1, 0, 4});
    const Matrix f(3, 3, std::vector<double>{1, 2, 3, -1, 0, 4, 1, 2, 3});
    const std::vector<int> labels = {0, 1, 0};
    const double v = loss::center_loss(f, labels, loss::CenterBank{centers, 0.5});
    out.push_back({"center_loss_at_centers", v == 0.0, v, 0.0});
  }
  {
    const loss::TrainSchedule schedule;
    const int epochs[] = {0, 10, 40, 70};
    const double expected[] = {3.5e-5, 3.5e-4, 3.5e-5, 3.5e-6};
    for (int i = 0; i < 4; ++i) {
      const double v = loss::lr_at_epoch(schedule, epochs[i]);
      out.push_back({"lr_epoch_" + std::to_string(epochs[i]), v == expected[i], v, 0.0});
    }
  }
  return out;
}

}  // namespace reid::tools
