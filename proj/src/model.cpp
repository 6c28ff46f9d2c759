/*
 * Copyright 2026 The Meerkat Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "meerkat/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "meerkat/prng.hpp"

namespace meerkat {
namespace {

void check_dim(const ModelSpec& spec, const Eigen::VectorXd& w) {
  if (w.size() != spec.dim) {
    throw std::invalid_argument("parameter vector has wrong dimension");
  }
}

void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.inputs.rows() < 1) {
    throw std::invalid_argument("batch must contain at least one sample");
  }
  if (batch.inputs.rows() != batch.labels.size()) {
    throw std::invalid_argument("batch inputs/labels size mismatch");
  }
}

Eigen::Index mlp_param_count(const std::vector<Eigen::Index>& layers) {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    n += layers[l + 1] * layers[l] + layers[l + 1];
  }
  return n;
}

// Stable softmax probabilities for one logit vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

double log_sum_exp(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

struct MlpForward {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  // activations[0] = input, activations[l] = post-activation of layer l.
  std::vector<Eigen::VectorXd> activations;
  Eigen::VectorXd logits;
};

MlpForward mlp_forward(const ModelSpec& spec, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& x) {
  MlpForward f;
  const auto& layers = spec.layers;
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const Eigen::Index rows = layers[l + 1], cols = layers[l];
    Eigen::MatrixXd weight(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      weight.row(r) = w.segment(off + r * cols, cols).transpose();
    }
    off += rows * cols;
    Eigen::VectorXd bias = w.segment(off, rows);
    off += rows;
    f.weights.push_back(std::move(weight));
    f.biases.push_back(std::move(bias));
  }
  f.activations.push_back(x);
  for (std::size_t l = 0; l < f.weights.size(); ++l) {
    Eigen::VectorXd pre = f.weights[l] * f.activations.back() + f.biases[l];
    if (l + 1 == f.weights.size()) {
      f.logits = std::move(pre);
    } else {
      f.activations.push_back(pre.array().tanh().matrix());
    }
  }
  return f;
}

}  // namespace

ModelSpec make_quadratic(Eigen::MatrixXd a, Eigen::VectorXd b) {
  if (a.rows() != a.cols() || a.rows() != b.size()) {
    throw std::invalid_argument("quadratic: A must be square and match b");
  }
  ModelSpec spec;
  spec.kind = ModelKind::PlQuadratic;
  spec.dim = b.size();
  spec.quad_a = std::move(a);
  spec.quad_b = std::move(b);
  return spec;
}

ModelSpec make_logistic(Eigen::Index feature_dim, Eigen::Index num_classes) {
  if (feature_dim < 1 || num_classes < 2) {
    throw std::invalid_argument("logistic: need feature_dim >= 1, classes >= 2");
  }
  ModelSpec spec;
  spec.kind = ModelKind::Logistic;
  spec.feature_dim = feature_dim;
  spec.num_classes = num_classes;
  spec.dim = feature_dim * num_classes;
  return spec;
}

ModelSpec make_mlp(std::vector<Eigen::Index> layers) {
  if (layers.size() < 2) {
    throw std::invalid_argument("mlp: need at least input and output layers");
  }
  ModelSpec spec;
  spec.kind = ModelKind::Mlp;
  spec.layers = std::move(layers);
  spec.feature_dim = spec.layers.front();
  spec.num_classes = spec.layers.back();
  spec.dim = mlp_param_count(spec.layers);
  return spec;
}

double loss(const ModelSpec& spec, const Eigen::VectorXd& w, const Batch& batch) {
  check_dim(spec, w);
  switch (spec.kind) {
    case ModelKind::PlQuadratic:
      return 0.5 * w.dot(spec.quad_a * w) - spec.quad_b.dot(w);
    case ModelKind::Logistic: {
      check_batch(spec, batch);
      if (batch.inputs.cols() != spec.feature_dim) {
        throw std::invalid_argument("batch feature dimension mismatch");
      }
      const Eigen::Index b_size = batch.inputs.rows();
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          weight(w.data(), spec.num_classes, spec.feature_dim);
      double total = 0.0;
      for (Eigen::Index i = 0; i < b_size; ++i) {
        const Eigen::VectorXd logits = weight * batch.inputs.row(i).transpose();
        total += log_sum_exp(logits) - logits[batch.labels[i]];
      }
      return total / static_cast<double>(b_size);
    }
    case ModelKind::Mlp: {
      check_batch(spec, batch);
      const Eigen::Index b_size = batch.inputs.rows();
      double total = 0.0;
      for (Eigen::Index i = 0; i < b_size; ++i) {
        MlpForward f = mlp_forward(spec, w, batch.inputs.row(i).transpose());
        total += log_sum_exp(f.logits) - f.logits[batch.labels[i]];
      }
      return total / static_cast<double>(b_size);
    }
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd grad(const ModelSpec& spec, const Eigen::VectorXd& w,
                     const Batch& batch) {
  check_dim(spec, w);
  switch (spec.kind) {
    case ModelKind::PlQuadratic:
      return spec.quad_a * w - spec.quad_b;
    case ModelKind::Logistic: {
      check_batch(spec, batch);
      if (batch.inputs.cols() != spec.feature_dim) {
        throw std::invalid_argument("batch feature dimension mismatch");
      }
      const Eigen::Index b_size = batch.inputs.rows();
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          weight(w.data(), spec.num_classes, spec.feature_dim);
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g =
          Eigen::MatrixXd::Zero(spec.num_classes, spec.feature_dim);
      for (Eigen::Index i = 0; i < b_size; ++i) {
        const Eigen::VectorXd x = batch.inputs.row(i).transpose();
        Eigen::VectorXd p = softmax(weight * x);
        p[batch.labels[i]] -= 1.0;
        g.noalias() += p * x.transpose();
      }
      g /= static_cast<double>(b_size);
      return Eigen::Map<const Eigen::VectorXd>(g.data(), spec.dim);
    }
    case ModelKind::Mlp: {
      check_batch(spec, batch);
      const Eigen::Index b_size = batch.inputs.rows();
      Eigen::VectorXd g = Eigen::VectorXd::Zero(spec.dim);
      for (Eigen::Index i = 0; i < b_size; ++i) {
        MlpForward f = mlp_forward(spec, w, batch.inputs.row(i).transpose());
        Eigen::VectorXd delta = softmax(f.logits);
        delta[batch.labels[i]] -= 1.0;
        // Backward pass, writing flat gradients layer by layer from the end.
        std::vector<Eigen::MatrixXd> wgrads(f.weights.size());
        std::vector<Eigen::VectorXd> bgrads(f.weights.size());
        for (std::size_t l = f.weights.size(); l-- > 0;) {
          wgrads[l] = delta * f.activations[l].transpose();
          bgrads[l] = delta;
          if (l > 0) {
            Eigen::VectorXd back = f.weights[l].transpose() * delta;
            delta = back.cwiseProduct(
                (1.0 - f.activations[l].array().square()).matrix());
          }
        }
        Eigen::Index off = 0;
        for (std::size_t l = 0; l < f.weights.size(); ++l) {
          const Eigen::Index rows = wgrads[l].rows(), cols = wgrads[l].cols();
          for (Eigen::Index r = 0; r < rows; ++r) {
            g.segment(off + r * cols, cols) += wgrads[l].row(r).transpose();
          }
          off += rows * cols;
          g.segment(off, rows) += bgrads[l];
          off += rows;
        }
      }
      return g / static_cast<double>(b_size);
    }
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd init_params(const ModelSpec& spec, std::uint64_t seed) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.dim);
  if (spec.kind == ModelKind::Mlp) {
    GaussianStream stream(seed);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < spec.layers.size(); ++l) {
      const Eigen::Index rows = spec.layers[l + 1], cols = spec.layers[l];
      const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
      for (Eigen::Index i = 0; i < rows * cols; ++i) {
        w[off + i] = scale * stream.next_normal();
      }
      off += rows * cols + rows;  // biases stay zero
    }
  }
  return w;
}

double pl_constant(const ModelSpec& spec) {
  if (spec.kind != ModelKind::PlQuadratic) {
    throw std::invalid_argument("pl_constant: quadratic models only");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.quad_a);
  const double tol = 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
  double mu = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev > tol && (mu == 0.0 || ev < mu)) mu = ev;
  }
  return mu;
}

double smoothness(const ModelSpec& spec) {
  if (spec.kind != ModelKind::PlQuadratic) {
    throw std::invalid_argument("smoothness: quadratic models only");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spec.quad_a);
  return es.eigenvalues().maxCoeff();
}

Eigen::VectorXd quad_optimum(const ModelSpec& spec) {
  if (spec.kind != ModelKind::PlQuadratic) {
    throw std::invalid_argument("quad_optimum: quadratic models only");
  }
  return spec.quad_a.completeOrthogonalDecomposition().solve(spec.quad_b);
}

double quad_optimal_value(const ModelSpec& spec) {
  const Eigen::VectorXd w_star = quad_optimum(spec);
  return 0.5 * w_star.dot(spec.quad_a * w_star) - spec.quad_b.dot(w_star);
}

}  // namespace meerkat
