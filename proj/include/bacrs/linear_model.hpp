#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "bacrs/error.hpp"
#include "bacrs/features.hpp"
#include "bacrs/random.hpp"

namespace bacrs {

struct TrainHyper {
  double learning_rate = 0.1;  // epoch e uses learning_rate / sqrt(e)
  int epochs = 10;
  int batch_size = 256;
  double l2 = 1e-6;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(learning_rate > 0.0)) throw usage_error("learning_rate must be > 0");
    if (epochs < 1) throw usage_error("epochs must be >= 1");
    if (batch_size < 1) throw usage_error("batch_size must be >= 1");
    if (!(l2 >= 0.0)) throw usage_error("l2 must be >= 0");
  }
};

// Labeled sparse examples. For the binary objective labels are 0/1; for the
// softmax objective they are class indices.
struct Dataset {
  std::vector<FeatureVector> x;
  std::vector<int> y;

  std::size_t size() const { return x.size(); }
  const FeatureVector& features(std::size_t i) const { return x[i]; }
  int label(std::size_t i) const { return y[i]; }
};

// Anything that can hand out labeled examples by index; features may be
// computed on demand.
template <class S>
concept ExampleSource = requires(const S& s, std::size_t i) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.label(i) } -> std::convertible_to<int>;
  { s.features(i) } -> std::convertible_to<FeatureVector>;
};

inline double sparse_dot(std::span<const double> w, const FeatureVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries) s += w[i] * v;
  return s;
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Softmax of `z` in place; returns log-sum-exp.
inline double softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : z) v /= s;
  return m + std::log(s);
}

struct Objective {
  double loss = 0.0;
  std::vector<double> grad_w;
  std::vector<double> grad_b;
};

// Mean logistic loss + (l2/2)|w|^2 with its full gradient. The bias is not
// regularized.
template <ExampleSource Source>
Objective logistic_objective(std::span<const double> w, double b, const Source& data, double l2,
                             bool with_gradient = true) {
  Objective o;
  if (with_gradient) {
    o.grad_w.assign(w.size(), 0.0);
    o.grad_b.assign(1, 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.features(i);
    const double z = sparse_dot(w, x) + b;
    const int y = data.label(i);
    o.loss += (y == 1 ? softplus(-z) : softplus(z)) * inv_n;
    if (with_gradient) {
      const double r = (sigmoid(z) - y) * inv_n;
      for (const auto& [j, v] : x.entries) o.grad_w[j] += r * v;
      o.grad_b[0] += r;
    }
  }
  double ss = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    ss += w[j] * w[j];
    if (with_gradient) o.grad_w[j] += l2 * w[j];
  }
  o.loss += 0.5 * l2 * ss;
  return o;
}

// Mean softmax cross-entropy + (l2/2)|W|^2. W is row-major classes x dim.
template <ExampleSource Source>
Objective softmax_objective(std::span<const double> w, std::span<const double> b, std::size_t classes,
                            const Source& data, double l2, bool with_gradient = true) {
  const std::size_t dim = w.size() / classes;
  Objective o;
  if (with_gradient) {
    o.grad_w.assign(w.size(), 0.0);
    o.grad_b.assign(classes, 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  std::vector<double> z(classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& x = data.features(i);
    for (std::size_t c = 0; c < classes; ++c) z[c] = sparse_dot(w.subspan(c * dim, dim), x) + b[c];
    const auto y = static_cast<std::size_t>(data.label(i));
    const double zy = z[y];
    const double lse = softmax_inplace(z);
    o.loss += (lse - zy) * inv_n;
    if (with_gradient) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double r = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
        for (const auto& [j, v] : x.entries) o.grad_w[c * dim + j] += r * v;
        o.grad_b[c] += r;
      }
    }
  }
  double ss = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    ss += w[j] * w[j];
    if (with_gradient) o.grad_w[j] += l2 * w[j];
  }
  o.loss += 0.5 * l2 * ss;
  return o;
}

struct LinearParams {
  std::size_t classes = 1;  // 1 means a single logistic output
  std::size_t dim = 0;
  std::vector<double> weights;  // classes x dim, row-major
  std::vector<double> bias;     // classes
  std::vector<double> loss_history;  // full objective before training and after each epoch
};

namespace detail {

// Weights stored as scale * v so the L2 shrinkage of every step is O(1).
class ScaledWeights {
public:
  explicit ScaledWeights(std::size_t n) : v_(n, 0.0) {}

  double get(std::size_t j) const { return scale_ * v_[j]; }

  void shrink(double factor) {
    scale_ *= factor;
    if (scale_ < 1e-9) materialize();
  }

  void add(std::size_t j, double delta) { v_[j] += delta / scale_; }

  void materialize() {
    for (auto& x : v_) x *= scale_;
    scale_ = 1.0;
  }

  std::vector<double> take() {
    materialize();
    return std::move(v_);
  }

private:
  std::vector<double> v_;
  double scale_ = 1.0;
};

}  // namespace detail

// Mini-batch gradient descent on the mean cross-entropy + (l2/2)|W|^2.
// Weights start at zero; batch order comes from a per-epoch seeded shuffle,
// so the result is bit-identical for a given seed.
template <ExampleSource Source>
LinearParams train_linear(const Source& data, std::size_t classes, std::size_t dim, const TrainHyper& hyper) {
  hyper.validate();
  if (data.size() == 0) throw data_error("training set is empty");
  const bool binary = classes == 1;
  const std::size_t outputs = classes;
  detail::ScaledWeights w(outputs * dim);
  std::vector<double> bias(outputs, 0.0);

  LinearParams out;
  out.classes = classes;
  out.dim = dim;
  auto full_loss = [&](std::span<const double> weights) {
    return binary ? logistic_objective(weights, bias[0], data, hyper.l2, false).loss
                  : softmax_objective(weights, bias, classes, data, hyper.l2, false).loss;
  };
  {
    std::vector<double> zeros(outputs * dim, 0.0);
    out.loss_history.push_back(full_loss(zeros));
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(outputs * dim, 0.0);
  std::vector<double> grad_b(outputs, 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> is_touched(dim, 0);
  std::vector<double> z(outputs);
  const auto batch = static_cast<std::size_t>(hyper.batch_size);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    const double lr = hyper.learning_rate / std::sqrt(static_cast<double>(epoch));
    Rng rng(derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv_m = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = data.features(order[k]);
        const int y = data.label(order[k]);
        for (std::size_t c = 0; c < outputs; ++c) {
          double s = bias[c];
          for (const auto& [j, v] : x.entries) s += w.get(c * dim + j) * v;
          z[c] = s;
        }
        if (binary) {
          z[0] = sigmoid(z[0]) - y;
        } else {
          softmax_inplace(z);
          z[static_cast<std::size_t>(y)] -= 1.0;
        }
        for (const auto& [j, v] : x.entries) {
          if (!is_touched[j]) {
            is_touched[j] = 1;
            touched.push_back(j);
          }
          for (std::size_t c = 0; c < outputs; ++c) grad[c * dim + j] += z[c] * v * inv_m;
        }
        for (std::size_t c = 0; c < outputs; ++c) grad_b[c] += z[c] * inv_m;
      }
      // w <- (1 - lr*l2) w - lr * g_data
      w.shrink(1.0 - lr * hyper.l2);
      std::sort(touched.begin(), touched.end());
      for (auto j : touched) {
        for (std::size_t c = 0; c < outputs; ++c) {
          auto& g = grad[c * dim + j];
          w.add(c * dim + j, -lr * g);
          g = 0.0;
        }
        is_touched[j] = 0;
      }
      touched.clear();
      for (std::size_t c = 0; c < outputs; ++c) {
        bias[c] -= lr * grad_b[c];
        grad_b[c] = 0.0;
      }
    }
    w.materialize();
    std::vector<double> snapshot(outputs * dim);
    for (std::size_t j = 0; j < snapshot.size(); ++j) snapshot[j] = w.get(j);
    const double loss = full_loss(snapshot);
    if (!std::isfinite(loss)) throw numeric_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    out.loss_history.push_back(loss);
  }
  out.weights = w.take();
  out.bias = std::move(bias);
  return out;
}

}  // namespace bacrs
