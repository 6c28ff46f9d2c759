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

#include "meerkat/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "meerkat/prng.hpp"

namespace meerkat {

SparseMask make_mask(Eigen::Index dim, std::vector<Eigen::Index> support) {
  std::sort(support.begin(), support.end());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] < 0 || support[i] >= dim) {
      throw std::invalid_argument("mask index out of range");
    }
    if (i > 0 && support[i] == support[i - 1]) {
      throw std::invalid_argument("mask indices must be distinct");
    }
  }
  SparseMask mask;
  mask.dim = dim;
  mask.support = std::move(support);
  mask.density =
      dim > 0 ? static_cast<double>(mask.support.size()) / static_cast<double>(dim)
              : 0.0;
  return mask;
}

Eigen::VectorXd embed(const SparseMask& mask, const Eigen::VectorXd& values) {
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(mask.dim);
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    dense[mask.support[i]] = values[i];
  }
  return dense;
}

Eigen::VectorXd restrict_to(const SparseMask& mask, const Eigen::VectorXd& dense) {
  Eigen::VectorXd values(mask.support_size());
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    values[i] = dense[mask.support[i]];
  }
  return values;
}

double support_dot(const SparseMask& mask, const Eigen::VectorXd& values,
                   const Eigen::VectorXd& dense) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mask.support_size(); ++i) {
    acc += values[i] * dense[mask.support[i]];
  }
  return acc;
}

Eigen::VectorXd avg_squared_gradients(const ModelSpec& spec,
                                      const Eigen::VectorXd& w,
                                      const std::vector<Batch>& calib) {
  if (calib.empty()) {
    throw std::invalid_argument("avg_squared_gradients: empty calibration set");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.dim);
  for (const Batch& batch : calib) {
    acc += grad(spec, w, batch).array().square().matrix();
  }
  return acc / static_cast<double>(calib.size());
}

SparseMask top_k_mask(const Eigen::VectorXd& scores, double density) {
  if (!(density > 0.0 && density <= 1.0)) {
    throw std::invalid_argument("top_k_mask: density must be in (0, 1]");
  }
  if (!scores.allFinite()) {
    throw std::invalid_argument("top_k_mask: scores must be finite");
  }
  const Eigen::Index d = scores.size();
  const Eigen::Index k = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(density * static_cast<double>(d))));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Descending score, ties broken by lower index.
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores[a] > scores[b];
  });
  order.resize(static_cast<std::size_t>(k));
  SparseMask mask = make_mask(d, std::move(order));
  mask.density = density;
  return mask;
}

SparseMask baseline_mask(BaselineMaskKind kind, const Eigen::VectorXd& w,
                         double density, std::uint64_t seed) {
  switch (kind) {
    case BaselineMaskKind::WeightMagnitude:
      return top_k_mask(w.cwiseAbs(), density);
    case BaselineMaskKind::Full: {
      std::vector<Eigen::Index> all(static_cast<std::size_t>(w.size()));
      std::iota(all.begin(), all.end(), Eigen::Index{0});
      return make_mask(w.size(), std::move(all));
    }
    case BaselineMaskKind::Random: {
      if (!(density > 0.0 && density <= 1.0)) {
        throw std::invalid_argument("baseline_mask: density must be in (0, 1]");
      }
      const Eigen::Index d = w.size();
      const Eigen::Index k = std::max<Eigen::Index>(
          1, static_cast<Eigen::Index>(std::floor(density * static_cast<double>(d))));
      // Seeded Fisher-Yates prefix sample without replacement.
      std::vector<Eigen::Index> pool(static_cast<std::size_t>(d));
      std::iota(pool.begin(), pool.end(), Eigen::Index{0});
      GaussianStream stream(seed);
      for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index j =
            i + static_cast<Eigen::Index>(stream.next_u64() %
                                          static_cast<std::uint64_t>(d - i));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(static_cast<std::size_t>(k));
      SparseMask mask = make_mask(d, std::move(pool));
      mask.density = density;
      return mask;
    }
  }
  throw std::logic_error("unreachable");
}

void save_mask(const SparseMask& mask, std::ostream& out) {
  out << "dim=" << mask.dim << " density=" << mask.density << "\n";
  for (Eigen::Index idx : mask.support) {
    out << idx << "\n";
  }
}

SparseMask load_mask(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("mask file: missing header");
  }
  Eigen::Index dim = 0;
  double density = 0.0;
  std::istringstream hs(header);
  std::string tok;
  while (hs >> tok) {
    if (tok.rfind("dim=", 0) == 0) {
      dim = std::stoll(tok.substr(4));
    } else if (tok.rfind("density=", 0) == 0) {
      density = std::stod(tok.substr(8));
    } else {
      throw std::runtime_error("mask file: bad header token '" + tok + "'");
    }
  }
  std::vector<Eigen::Index> support;
  long long idx;
  while (in >> idx) {
    support.push_back(static_cast<Eigen::Index>(idx));
  }
  SparseMask mask = make_mask(dim, std::move(support));
  mask.density = density;
  return mask;
}

void save_mask_file(const SparseMask& mask, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open mask file for write: " + path);
  save_mask(mask, out);
}

SparseMask load_mask_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mask file: " + path);
  return load_mask(in);
}

}  // namespace meerkat
