#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "reid/losses.hpp"
#include "reid/rng.hpp"
#include "test_util.hpp"

namespace reid::loss {
namespace {

using reid::testing::error_of;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

// --- id_loss ---------------------------------------------------------------

TEST(IdLoss, UniformLogitsGiveLogN) {
  const Matrix logits(1, 4, 3.7);
  const std::vector<int> labels = {0};
  EXPECT_NEAR(id_loss(logits, labels), std::log(4.0), 1e-12);
}

TEST(IdLoss, DominantTrueClassVanishes) {
  const Matrix logits(1, 4, std::vector<double>{0.0, 0.0, 50.0, 0.0});
  const std::vector<int> labels = {2};
  EXPECT_LT(id_loss(logits, labels), 1e-20);
}

TEST(IdLoss, FixedBatchMatchesFrozenOracle) {
  // Expected value from a 40-digit direct summation of the definition.
  const Matrix logits(3, 5, std::vector<double>{0.3, -1.2, 2.5, 0.0, 0.7,    //
                                                1.1, 1.1, -0.4, 3.3, -2.0,   //
                                                -0.5, 0.25, 0.125, -1.75, 0.9});
  const std::vector<int> labels = {2, 0, 4};
  EXPECT_NEAR(id_loss(logits, labels), 1.1937662228953270952, 1e-12);
  EXPECT_NEAR(id_loss(logits, labels), static_cast<double>(oracle::id_loss(logits, labels)), 1e-12);
}

TEST(IdLoss, SeededBatchesMatchOracle) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Matrix logits = random_matrix(rng, 3, 5, 3.0);
    std::vector<int> labels(3);
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    EXPECT_NEAR(id_loss(logits, labels), static_cast<double>(oracle::id_loss(logits, labels)), 1e-12);
  }
}

TEST(IdLoss, NonNegativeAndLogNOnlyWhenUniform) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const Matrix logits = random_matrix(rng, 4, 6, 2.0);
    const std::vector<int> labels = {0, 1, 2, 3};
    EXPECT_GE(id_loss(logits, labels), 0.0);
  }
  for (std::size_t n : {2u, 3u, 10u, 100u}) {
    const Matrix uniform(2, n, -1.5);
    const std::vector<int> labels = {0, static_cast<int>(n - 1)};
    EXPECT_NEAR(id_loss(uniform, labels), std::log(static_cast<double>(n)), 1e-12);
  }
}

TEST(IdLoss, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  std::vector<double> p(15);
  for (auto& v : p) v = rng.normal();
  const auto check = gradient_check(id_loss_fn(3, 5, {1, 4, 0}), p, 1e-5);
  EXPECT_LT(check.max_relative_error, 1e-4);
}

TEST(IdLoss, Errors) {
  const Matrix logits(2, 3, 0.0);
  const std::vector<int> bad = {0, 3};
  EXPECT_EQ(error_of([&] { id_loss(logits, bad); }), ErrorCode::LabelOutOfRange);
  const std::vector<int> negative = {-1, 0};
  EXPECT_EQ(error_of([&] { id_loss(logits, negative); }), ErrorCode::LabelOutOfRange);
  Matrix nan_logits(2, 3, 0.0);
  nan_logits(1, 1) = std::nan("");
  const std::vector<int> ok = {0, 1};
  EXPECT_EQ(error_of([&] { id_loss(nan_logits, ok); }), ErrorCode::NonFinite);
}

// --- center loss -----------------------------------------------------------

TEST(CenterLoss, ZeroAtCenters) {
  const Matrix centers(2, 2, std::vector<double>{1, 1, -3, 2});
  const Matrix f(3, 2, std::vector<double>{-3, 2, 1, 1, 1, 1});
  const std::vector<int> labels = {1, 0, 0};
  EXPECT_EQ(center_loss(f, labels, {centers, 0.5}), 0.0);
}

TEST(CenterLoss, HalfSquaredNorm) {
  const Matrix centers(1, 2, 0.0);
  const Matrix f(1, 2, std::vector<double>{1, 0});
  const std::vector<int> labels = {0};
  EXPECT_DOUBLE_EQ(center_loss(f, labels, {centers, 0.5}), 0.5);
}

TEST(CenterLoss, FixedBatchMatchesFrozenOracle) {
  const Matrix f(4, 3, std::vector<double>{0.5, -1.0, 2.0, 1.5, 0.25, -0.75, -2.0, 0.0, 1.0, 0.1, 0.2, 0.3});
  const Matrix c(3, 3, std::vector<double>{0.0, -0.5, 1.0, 1.0, 1.0, 1.0, -1.0, 0.5, 0.0});
  const std::vector<int> labels = {0, 2, 0, 1};
  EXPECT_NEAR(center_loss(f, labels, {c, 0.5}), 7.2824999999999999939, 1e-12);
  EXPECT_NEAR(center_loss(f, labels, {c, 0.5}), static_cast<double>(oracle::center_loss(f, labels, c)), 1e-12);
}

TEST(CenterLoss, SumsWithoutBatchAveraging) {
  const Matrix c(1, 1, 0.0);
  const Matrix one(1, 1, 2.0);
  const Matrix two(2, 1, 2.0);
  EXPECT_DOUBLE_EQ(center_loss(two, std::vector<int>{0, 0}, {c, 0.5}),
                   2.0 * center_loss(one, std::vector<int>{0}, {c, 0.5}));
}

TEST(CenterLoss, GradientMatchesFiniteDifferences) {
  Rng rng(23);
  std::vector<double> p(4 * 3 + 3 * 3);
  for (auto& v : p) v = rng.normal();
  const auto check = gradient_check(center_loss_fn(4, 3, 3, {0, 2, 2, 1}), p);
  EXPECT_LT(check.max_relative_error, 1e-4);
}

TEST(CenterLoss, Errors) {
  const Matrix c(2, 3, 0.0);
  const Matrix f(1, 2, 0.0);
  EXPECT_EQ(error_of([&] { center_loss(f, std::vector<int>{0}, {c, 0.5}); }), ErrorCode::DimensionMismatch);
  const Matrix g(1, 3, 0.0);
  EXPECT_EQ(error_of([&] { center_loss(g, std::vector<int>{2}, {c, 0.5}); }), ErrorCode::LabelOutOfRange);
}

// --- center update ---------------------------------------------------------

TEST(UpdateCenters, FullRateSnapsToFeature) {
  const CenterBank bank{Matrix(2, 2, 0.0), 1.0};
  const Matrix f(2, 2, std::vector<double>{1, 2, 3, 4});
  const auto next = update_centers(bank, f, std::vector<int>{1, 0});
  EXPECT_EQ(next.centers, Matrix(2, 2, std::vector<double>{3, 4, 1, 2}));
}

TEST(UpdateCenters, ZeroRateLeavesBank) {
  const CenterBank bank{Matrix(2, 2, std::vector<double>{1, 1, 2, 2}), 0.0};
  const Matrix f(2, 2, std::vector<double>{5, 5, 7, 7});
  EXPECT_EQ(update_centers(bank, f, std::vector<int>{0, 1}).centers, bank.centers);
}

TEST(UpdateCenters, HalfRateMovesHalfwayToMean) {
  // Members (2, 0) and (4, 2) have mean (3, 1); center (1, 1) moves to (2, 1).
  const CenterBank bank{Matrix(2, 2, std::vector<double>{1, 1, 9, 9}), 0.5};
  const Matrix f(2, 2, std::vector<double>{2, 0, 4, 2});
  const auto next = update_centers(bank, f, std::vector<int>{0, 0});
  EXPECT_DOUBLE_EQ(next.centers(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(next.centers(0, 1), 1.0);
  EXPECT_EQ(next.centers(1, 0), 9.0);  // untouched
  EXPECT_EQ(bank.centers(0, 0), 1.0);  // input bank not mutated
}

// --- triplet loss ----------------------------------------------------------

TEST(TripletLoss, EquidistantConfigurationGivesMargin) {
  const Matrix f(4, 2, std::vector<double>{0, 0, 1, 0, 1, 1, 0, 1});
  const std::vector<int> labels = {0, 0, 1, 1};
  EXPECT_EQ(triplet_loss_batch_hard(f, labels, kTripletMargin), 0.5);
  EXPECT_EQ(kTripletMargin, 0.5);
}

TEST(TripletLoss, SeparatedClustersGiveZero) {
  const Matrix f(4, 1, std::vector<double>{0, 0, 10, 10});
  const std::vector<int> labels = {0, 0, 1, 1};
  EXPECT_EQ(triplet_loss_batch_hard(f, labels, 0.5), 0.0);
}

TEST(TripletLoss, FixedBatchMatchesFrozenOracle) {
  const Matrix f(8, 2, std::vector<double>{0, 0, 0.4, 0.1, 0.2, 0.5, -0.3, 0.2, 1.0, 0.1, 0.6, 0.4, 1.2, -0.3, 0.9, 0.8});
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  EXPECT_NEAR(triplet_loss_batch_hard(f, labels, 0.5), 0.67659341120277884186, 1e-12);
}

TEST(TripletLoss, SeededBatchesMatchBruteForce) {
  Rng rng(29);
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  for (int t = 0; t < 100; ++t) {
    const Matrix f = random_matrix(rng, 8, 5);
    EXPECT_NEAR(triplet_loss_batch_hard(f, labels, 0.5),
                static_cast<double>(oracle::triplet_batch_hard(f, labels, 0.5)), 1e-12);
  }
}

TEST(TripletLoss, TranslationAndRotationInvariant) {
  Rng rng(31);
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  for (int t = 0; t < 30; ++t) {
    const Matrix f = random_matrix(rng, 6, 2);
    const double base = triplet_loss_batch_hard(f, labels);
    EXPECT_GE(base, 0.0);
    const double dx = rng.normal() * 5, dy = rng.normal() * 5;
    const double angle = rng.uniform(0.0, 6.283185307179586);
    Matrix moved(6, 2), rotated(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
      moved(i, 0) = f(i, 0) + dx;
      moved(i, 1) = f(i, 1) + dy;
      rotated(i, 0) = std::cos(angle) * f(i, 0) - std::sin(angle) * f(i, 1);
      rotated(i, 1) = std::sin(angle) * f(i, 0) + std::cos(angle) * f(i, 1);
    }
    EXPECT_NEAR(triplet_loss_batch_hard(moved, labels), base, 1e-12);
    EXPECT_NEAR(triplet_loss_batch_hard(rotated, labels), base, 1e-12);
  }
}

TEST(TripletLoss, AllTripletsModeIsBoundedByBatchHard) {
  Rng rng(37);
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
  for (int t = 0; t < 30; ++t) {
    const Matrix f = random_matrix(rng, 6, 3);
    const double all = triplet_loss_with_grad(f, labels, 0.5, TripletMining::all).value;
    EXPECT_LE(all, triplet_loss_batch_hard(f, labels, 0.5) + 1e-12);
    EXPECT_GE(all, 0.0);
  }
}

TEST(TripletLoss, GradientAwayFromKinks) {
  Rng rng(41);
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  int checked = 0;
  while (checked < 20) {
    const Matrix f = random_matrix(rng, 8, 4);
    if (triplet_kink_distance(f, labels) < 1e-3) continue;
    for (auto mining : {TripletMining::batch_hard, TripletMining::all}) {
      const auto check = gradient_check(triplet_loss_fn(8, 4, labels, 0.5, mining), f.storage());
      EXPECT_LT(check.max_relative_error, 1e-4);
    }
    ++checked;
  }
}

TEST(TripletLoss, NoValidTriplet) {
  const Matrix f(3, 2, 0.0);
  EXPECT_EQ(error_of([&] { triplet_loss_batch_hard(f, std::vector<int>{0, 0, 1}); }), ErrorCode::NoValidTriplet);
  EXPECT_EQ(error_of([&] { triplet_loss_batch_hard(f, std::vector<int>{0, 0, 0}); }), ErrorCode::NoValidTriplet);
  EXPECT_EQ(error_of([&] { triplet_loss_batch_hard(f, std::vector<int>{0, 1}); }), ErrorCode::DimensionMismatch);
}

// --- combined objectives ---------------------------------------------------

TEST(TotalLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(total_loss(1.0, 0.5, 2000.0, 0.0005), 2.5);
  EXPECT_EQ(total_loss(1.25, 0.75, 123.0, 0.0), 2.0);
  EXPECT_EQ(kCenterWeight, 0.0005);
  Rng rng(43);
  for (int t = 0; t < 20; ++t) {
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform(0, 100), beta = rng.uniform();
    EXPECT_EQ(total_loss(a, b, c, beta), a + b + beta * c);
    // Linear in each component.
    EXPECT_NEAR(total_loss(2 * a, b, c, beta) - total_loss(a, b, c, beta), a, 1e-12);
    EXPECT_NEAR(total_loss(a, b, 2 * c, beta) - total_loss(a, b, c, beta), beta * c, 1e-12);
  }
  EXPECT_EQ(error_of([] { total_loss(std::nan(""), 0, 0); }), ErrorCode::NonFinite);
}

TEST(AgnLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(agn_loss(1.0, 0.2, 0.3, 1.0, 1.0), 1.5);
  EXPECT_EQ(agn_loss(0.7, 5.0, 9.0, 0.0, 0.0), 0.7);
  Rng rng(47);
  for (int t = 0; t < 20; ++t) {
    const double r = rng.uniform(), ty = rng.uniform(), co = rng.uniform();
    EXPECT_EQ(agn_loss(r, ty, co), r + ty + co);
    EXPECT_NEAR(agn_loss(r, 3 * ty, co, 0.5) - agn_loss(r, ty, co, 0.5), ty, 1e-12);
  }
  EXPECT_EQ(error_of([] { agn_loss(1.0, 1.0, std::numeric_limits<double>::infinity()); }), ErrorCode::NonFinite);
}

TEST(AgnLoss, AttributeTermsFromIdLoss) {
  const Matrix type_logits(2, 3, std::vector<double>{1, 0, 0, 0, 2, 0});
  const Matrix color_logits(2, 4, 0.0);
  const double type_ce = id_loss(type_logits, std::vector<int>{0, 1});
  const double color_ce = id_loss(color_logits, std::vector<int>{3, 2});
  EXPECT_NEAR(color_ce, std::log(4.0), 1e-12);
  EXPECT_DOUBLE_EQ(agn_loss(0.5, type_ce, color_ce), 0.5 + type_ce + color_ce);
}

// --- schedule --------------------------------------------------------------

TEST(Schedule, PlateauValuesExact) {
  const TrainSchedule s;
  EXPECT_EQ(lr_at_epoch(s, 0), 3.5e-5);
  EXPECT_EQ(lr_at_epoch(s, 10), 3.5e-4);
  EXPECT_EQ(lr_at_epoch(s, 39), 3.5e-4);
  EXPECT_EQ(lr_at_epoch(s, 40), 3.5e-5);
  EXPECT_EQ(lr_at_epoch(s, 69), 3.5e-5);
  EXPECT_EQ(lr_at_epoch(s, 70), 3.5e-6);
  EXPECT_EQ(lr_at_epoch(s, 119), 3.5e-6);
}

TEST(Schedule, WarmupMidpoint) {
  EXPECT_NEAR(lr_at_epoch(TrainSchedule{}, 5), 1.925e-4, 1e-18);
}

TEST(Schedule, ShapeProperties) {
  const TrainSchedule s;
  for (int e = 1; e <= 10; ++e) EXPECT_GE(lr_at_epoch(s, e), lr_at_epoch(s, e - 1));
  for (int e = 11; e < 40; ++e) EXPECT_EQ(lr_at_epoch(s, e), lr_at_epoch(s, 10));
  for (int e = 41; e < 70; ++e) EXPECT_EQ(lr_at_epoch(s, e), lr_at_epoch(s, 40));
  EXPECT_NEAR(lr_at_epoch(s, 39) / lr_at_epoch(s, 40), 10.0, 1e-12);
  EXPECT_NEAR(lr_at_epoch(s, 69) / lr_at_epoch(s, 70), 10.0, 1e-12);
}

TEST(Schedule, EpochOutOfRange) {
  EXPECT_EQ(error_of([] { lr_at_epoch(TrainSchedule{}, -1); }), ErrorCode::EpochOutOfRange);
  EXPECT_EQ(error_of([] { lr_at_epoch(TrainSchedule{}, 120); }), ErrorCode::EpochOutOfRange);
}

// --- P x K sampler ---------------------------------------------------------

std::vector<int> grid_labels(int ids, int per_id) {
  std::vector<int> labels;
  for (int i = 0; i < ids; ++i) {
    for (int k = 0; k < per_id; ++k) labels.push_back(i);
  }
  return labels;
}

TEST(PkSample, Contract) {
  const auto labels = grid_labels(4, 3);
  const auto idx = pk_sample(labels, 2, 2, 99);
  ASSERT_EQ(idx.size(), 4u);
  std::map<int, int> per_id;
  for (auto i : idx) ++per_id[labels[i]];
  EXPECT_EQ(per_id.size(), 2u);
  for (const auto& [id, count] : per_id) EXPECT_EQ(count, 2);
}

TEST(PkSample, NotEnoughIdentities) {
  const auto labels = grid_labels(3, 4);
  EXPECT_EQ(error_of([&] { pk_sample(labels, 4, 2, 1); }), ErrorCode::NotEnoughIdentities);
}

TEST(PkSample, DeterministicPerSeed) {
  const auto labels = grid_labels(20, 5);
  EXPECT_EQ(pk_sample(labels, 8, 4, 12345), pk_sample(labels, 8, 4, 12345));
  EXPECT_NE(pk_sample(labels, 8, 4, 12345), pk_sample(labels, 8, 4, 54321));
}

TEST(PkSample, WithoutReplacementWhenPossible) {
  const auto labels = grid_labels(5, 6);
  const auto idx = pk_sample(labels, 5, 6, 3);
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 30u);
}

TEST(PkSample, ReplacementKeepsBatchShape) {
  const std::vector<int> labels = {0, 1, 1, 1, 1};
  const auto idx = pk_sample(labels, 2, 4, 5);
  ASSERT_EQ(idx.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(labels[idx[i]], labels[idx[i / 4 * 4]]);
  }
}

TEST(PkSample, OutputSatisfiesTripletPrecondition) {
  Rng rng(53);
  for (int t = 0; t < 30; ++t) {
    std::vector<int> labels(40);
    for (auto& l : labels) l = static_cast<int>(rng.below(8));
    const std::size_t P = 2 + rng.below(3);
    const std::size_t K = 2 + rng.below(3);
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < P) continue;
    const auto idx = pk_sample(labels, P, K, rng.next());
    Matrix f(idx.size(), 2);
    std::vector<int> batch;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      batch.push_back(labels[idx[i]]);
      f(i, 0) = static_cast<double>(i);
    }
    EXPECT_NO_THROW(check_triplet_batch(f, batch));
  }
}

// --- gradient check harness ------------------------------------------------

TEST(GradientCheck, DetectsWrongGradient) {
  const DifferentiableFn wrong = [](std::span<const double> p, std::vector<double>* g) {
    if (g) g->assign(p.size(), 1.0);  // true gradient is 2x
    double s = 0.0;
    for (double v : p) s += v * v;
    return s;
  };
  const std::vector<double> p = {1.0, -2.0, 0.5};
  EXPECT_GT(gradient_check(wrong, p).max_relative_error, 0.1);
}

TEST(GradientCheck, NonFiniteKernel) {
  const DifferentiableFn bad = [](std::span<const double>, std::vector<double>* g) {
    if (g) g->assign(1, 0.0);
    return std::numeric_limits<double>::infinity();
  };
  EXPECT_EQ(error_of([&] { gradient_check(bad, std::vector<double>{0.0}); }), ErrorCode::NonFinite);
}

}  // namespace
}  // namespace reid::loss
