#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace bacrs;

namespace {

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t dim, int classes) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector x;
    x.dim = dim;
    for (std::uint32_t j = 0; j < dim; ++j)
      if (rng.bernoulli(0.5)) x.entries.emplace_back(j, rng.uniform01() * 2.0 - 1.0);
    d.x.push_back(x);
    d.y.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes))));
  }
  return d;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

}  // namespace

TEST(Objective, LogisticGradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const std::size_t dim = 3 + rng.uniform_index(5);
    const auto data = random_dataset(rng, 4 + rng.uniform_index(8), dim, 2);
    std::vector<double> w(dim);
    for (auto& v : w) v = rng.uniform01() * 2 - 1;
    const double b = rng.uniform01() - 0.5;
    const double l2 = 0.1 * rng.uniform01();
    const auto o = logistic_objective(w, b, data, l2);
    const double h = 1e-5;
    for (std::size_t j = 0; j < dim; ++j) {
      auto wp = w;
      auto wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (logistic_objective(wp, b, data, l2).loss - logistic_objective(wm, b, data, l2).loss) / (2 * h);
      EXPECT_LT(rel_err(o.grad_w[j], fd), 1e-4);
    }
    const double fdb = (logistic_objective(w, b + h, data, l2).loss - logistic_objective(w, b - h, data, l2).loss) / (2 * h);
    EXPECT_LT(rel_err(o.grad_b[0], fdb), 1e-4);
  }
}

TEST(Objective, SoftmaxGradientMatchesFiniteDifferences) {
  Rng rng(22);
  for (int t = 0; t < 20; ++t) {
    const std::size_t dim = 2 + rng.uniform_index(4);
    const std::size_t classes = 2 + rng.uniform_index(4);
    const auto data = random_dataset(rng, 4 + rng.uniform_index(8), dim, static_cast<int>(classes));
    std::vector<double> w(dim * classes);
    std::vector<double> b(classes);
    for (auto& v : w) v = rng.uniform01() * 2 - 1;
    for (auto& v : b) v = rng.uniform01() - 0.5;
    const double l2 = 0.1 * rng.uniform01();
    const auto o = softmax_objective(w, b, classes, data, l2);
    const double h = 1e-5;
    for (std::size_t j = 0; j < w.size(); ++j) {
      auto wp = w;
      auto wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd = (softmax_objective(wp, b, classes, data, l2).loss -
                         softmax_objective(wm, b, classes, data, l2).loss) / (2 * h);
      EXPECT_LT(rel_err(o.grad_w[j], fd), 1e-4);
    }
    for (std::size_t c = 0; c < classes; ++c) {
      auto bp = b;
      auto bm = b;
      bp[c] += h;
      bm[c] -= h;
      const double fd = (softmax_objective(w, bp, classes, data, l2).loss -
                         softmax_objective(w, bm, classes, data, l2).loss) / (2 * h);
      EXPECT_LT(rel_err(o.grad_b[c], fd), 1e-4);
    }
  }
}

TEST(Objective, NumericallyStable) {
  EXPECT_NEAR(softplus(1000.0), 1000.0, 1e-9);
  EXPECT_NEAR(softplus(-1000.0), 0.0, 1e-12);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  std::vector<double> z{1000.0, 1000.0};
  EXPECT_NEAR(softmax_inplace(z), 1000.0 + std::log(2.0), 1e-9);
  EXPECT_NEAR(z[0], 0.5, 1e-12);
}

TEST(Train, LossDecreasesOnSeparableData) {
  Dataset d;
  for (int i = 0; i < 200; ++i) {
    FeatureVector x;
    x.dim = 4;
    const int y = i % 2;
    x.entries = {{static_cast<std::uint32_t>(y), 1.0}, {2, 0.5}};
    d.x.push_back(x);
    d.y.push_back(y);
  }
  TrainHyper h;
  h.epochs = 8;
  h.batch_size = 16;
  h.learning_rate = 0.5;
  const auto p = train_linear(d, 1, 4, h);
  ASSERT_EQ(p.loss_history.size(), 9u);
  EXPECT_NEAR(p.loss_history.front(), std::log(2.0), 1e-12);
  for (std::size_t e = 1; e < p.loss_history.size(); ++e) EXPECT_LT(p.loss_history[e], p.loss_history[e - 1]);
  EXPECT_GT(p.weights[1], 0.0);
  EXPECT_LT(p.weights[0], 0.0);
}

TEST(Train, SoftmaxLearnsClasses) {
  Dataset d;
  for (int i = 0; i < 300; ++i) {
    FeatureVector x;
    x.dim = 3;
    const int y = i % 3;
    x.entries = {{static_cast<std::uint32_t>(y), 1.0}};
    d.x.push_back(x);
    d.y.push_back(y);
  }
  TrainHyper h;
  h.epochs = 5;
  h.batch_size = 32;
  h.learning_rate = 1.0;
  const auto p = train_linear(d, 3, 3, h);
  EXPECT_NEAR(p.loss_history.front(), std::log(3.0), 1e-12);
  EXPECT_LT(p.loss_history.back(), 0.5);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < 3; ++j)
      if (c != j) {
        EXPECT_GT(p.weights[c * 3 + c], p.weights[c * 3 + j]);
      }
}

TEST(Train, BitIdenticalForSameSeed) {
  Rng rng(5);
  const auto data = random_dataset(rng, 150, 10, 2);
  TrainHyper h;
  h.epochs = 3;
  h.batch_size = 7;
  h.l2 = 1e-3;
  const auto a = train_linear(data, 1, 10, h);
  const auto b = train_linear(data, 1, 10, h);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.loss_history, b.loss_history);
  h.seed = 6;
  EXPECT_NE(train_linear(data, 1, 10, h).weights, a.weights);
}

TEST(Train, LazyL2MatchesDenseUpdate) {
  // With batch = n the update is plain gradient descent, so one epoch can be
  // replayed densely from the objective's gradient.
  Rng rng(8);
  const auto data = random_dataset(rng, 20, 6, 2);
  TrainHyper h;
  h.epochs = 1;
  h.batch_size = 20;
  h.l2 = 0.05;
  h.learning_rate = 0.3;
  const auto p = train_linear(data, 1, 6, h);
  std::vector<double> w(6, 0.0);
  const auto o = logistic_objective(w, 0.0, data, h.l2);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(p.weights[j], -h.learning_rate * o.grad_w[j], 1e-12);
  EXPECT_NEAR(p.bias[0], -h.learning_rate * o.grad_b[0], 1e-12);
}

TEST(Train, Validation) {
  Dataset empty;
  EXPECT_THROW(train_linear(empty, 1, 3, {}), data_error);
  TrainHyper bad;
  bad.learning_rate = 0;
  Rng rng(1);
  const auto d = random_dataset(rng, 5, 3, 2);
  EXPECT_THROW(train_linear(d, 1, 3, bad), usage_error);
  bad = {};
  bad.batch_size = 0;
  EXPECT_THROW(train_linear(d, 1, 3, bad), usage_error);
}

TEST(Train, DivergenceIsReported) {
  Dataset d;
  FeatureVector x;
  x.dim = 1;
  x.entries = {{0, 1e200}};
  d.x = {x, x};
  d.y = {1, 1};
  TrainHyper h;
  h.learning_rate = 1e200;
  h.epochs = 2;
  EXPECT_THROW(train_linear(d, 1, 1, h), numeric_error);
}
