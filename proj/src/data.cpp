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

#include "meerkat/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "meerkat/prng.hpp"

namespace meerkat {
namespace {

void seeded_shuffle(std::vector<Eigen::Index>& v, GaussianStream& stream) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.next_u64() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// Marsaglia-Tsang gamma sampler driven by the deterministic stream.
double sample_gamma(double shape, GaussianStream& stream) {
  if (shape < 1.0) {
    const double u = stream.next_uniform();
    return sample_gamma(shape + 1.0, stream) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = stream.next_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = stream.next_uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return d * v;
    }
  }
}

std::vector<double> sample_dirichlet(double alpha, int k, GaussianStream& stream) {
  std::vector<double> g(static_cast<std::size_t>(k));
  double total = 0.0;
  for (double& v : g) {
    v = sample_gamma(alpha, stream);
    total += v;
  }
  for (double& v : g) v /= total;
  return g;
}

}  // namespace

Dataset make_blobs(int num_classes, Eigen::Index per_class,
                   Eigen::Index feature_dim, double spread, std::uint64_t seed) {
  if (num_classes < 2) {
    throw std::invalid_argument("make_blobs: need at least 2 classes");
  }
  if (per_class < 1 || feature_dim < 1) {
    throw std::invalid_argument("make_blobs: per_class and feature_dim must be >= 1");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(num_classes) * per_class;
  Dataset ds;
  ds.inputs.resize(n, feature_dim);
  ds.labels.resize(n);
  ds.num_classes = num_classes;
  GaussianStream stream(mix64(seed ^ 0x626C6F6273ull));
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(feature_dim);
    // Unit-separated class means on the coordinate axes, stacked in levels
    // when there are more classes than features.
    mean[c % feature_dim] = 1.0 + static_cast<double>(c / feature_dim);
    for (Eigen::Index i = 0; i < per_class; ++i, ++row) {
      for (Eigen::Index f = 0; f < feature_dim; ++f) {
        ds.inputs(row, f) = mean[f] + spread * stream.next_normal();
      }
      ds.labels[row] = c;
    }
  }
  return ds;
}

std::vector<std::vector<Eigen::Index>> partition(const Dataset& ds,
                                                 const PartitionSpec& spec) {
  const Eigen::Index n = ds.size();
  const int k = spec.num_clients;
  if (k < 1 || static_cast<Eigen::Index>(k) > n) {
    throw std::invalid_argument("partition: need 1 <= K <= N");
  }
  GaussianStream stream(mix64(spec.seed ^ 0x706172ull));
  std::vector<std::vector<Eigen::Index>> parts(static_cast<std::size_t>(k));

  switch (spec.kind) {
    case PartitionKind::Iid: {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      seeded_shuffle(order, stream);
      // Split sizes differ by at most one.
      Eigen::Index pos = 0;
      for (int c = 0; c < k; ++c) {
        const Eigen::Index count = n / k + (c < static_cast<int>(n % k) ? 1 : 0);
        parts[static_cast<std::size_t>(c)].assign(order.begin() + pos,
                                                  order.begin() + pos + count);
        pos += count;
      }
      break;
    }
    case PartitionKind::SingleLabel: {
      const int c_count = ds.num_classes;
      for (int label = 0; label < c_count; ++label) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (ds.labels[i] == label) idx.push_back(i);
        }
        std::vector<int> owners;
        for (int c = 0; c < k; ++c) {
          if (c % c_count == label) owners.push_back(c);
        }
        if (owners.empty()) owners.push_back(label % k);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          parts[static_cast<std::size_t>(owners[i % owners.size()])].push_back(idx[i]);
        }
      }
      break;
    }
    case PartitionKind::Dirichlet: {
      if (!(spec.alpha > 0.0)) {
        throw std::invalid_argument("partition: dirichlet alpha must be > 0");
      }
      for (int label = 0; label < ds.num_classes; ++label) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (ds.labels[i] == label) idx.push_back(i);
        }
        if (idx.empty()) continue;
        seeded_shuffle(idx, stream);
        const std::vector<double> prop = sample_dirichlet(spec.alpha, k, stream);
        // Largest-remainder apportionment of this class across clients.
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(k));
        std::vector<std::pair<double, int>> frac;
        Eigen::Index assigned = 0;
        for (int c = 0; c < k; ++c) {
          const double exact = prop[static_cast<std::size_t>(c)] *
                               static_cast<double>(idx.size());
          counts[static_cast<std::size_t>(c)] =
              static_cast<Eigen::Index>(std::floor(exact));
          assigned += counts[static_cast<std::size_t>(c)];
          frac.emplace_back(exact - std::floor(exact), c);
        }
        std::stable_sort(frac.begin(), frac.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(idx.size()) - assigned;
             ++r) {
          ++counts[static_cast<std::size_t>(frac[static_cast<std::size_t>(r)].second)];
        }
        std::size_t pos = 0;
        for (int c = 0; c < k; ++c) {
          for (Eigen::Index j = 0; j < counts[static_cast<std::size_t>(c)]; ++j) {
            parts[static_cast<std::size_t>(c)].push_back(idx[pos++]);
          }
        }
      }
      // Empty clients break 1/K aggregation; rebalance from the largest.
      for (auto& part : parts) {
        while (part.empty()) {
          auto largest = std::max_element(
              parts.begin(), parts.end(),
              [](const auto& a, const auto& b) { return a.size() < b.size(); });
          part.push_back(largest->back());
          largest->pop_back();
        }
      }
      break;
    }
  }
  return parts;
}

std::vector<Batch> batches(const Dataset& ds,
                           const std::vector<Eigen::Index>& indices,
                           Eigen::Index batch_size, std::uint64_t seed) {
  if (indices.empty()) {
    throw std::invalid_argument("batches: empty index list");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("batches: batch_size must be >= 1");
  }
  std::vector<Eigen::Index> order = indices;
  GaussianStream stream(mix64(seed ^ 0x626174ull));
  seeded_shuffle(order, stream);
  std::vector<Batch> result;
  for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), pos + static_cast<std::size_t>(batch_size));
    result.push_back(gather(ds, {order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(end)}));
  }
  return result;
}

Batch gather(const Dataset& ds, const std::vector<Eigen::Index>& indices) {
  Batch batch;
  batch.inputs.resize(static_cast<Eigen::Index>(indices.size()), ds.inputs.cols());
  batch.labels.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    batch.inputs.row(static_cast<Eigen::Index>(i)) = ds.inputs.row(indices[i]);
    batch.labels[static_cast<Eigen::Index>(i)] = ds.labels[indices[i]];
  }
  return batch;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open dataset file for write: " + path);
  out.precision(17);
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index f = 0; f < ds.inputs.cols(); ++f) {
      out << ds.inputs(i, f) << ",";
    }
    out << ds.labels[i] << "\n";
  }
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<double> fields;
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      fields.push_back(std::stod(cell));
    }
    if (fields.size() < 2) throw std::runtime_error("dataset csv: bad row");
    labels.push_back(static_cast<int>(fields.back()));
    fields.pop_back();
    rows.push_back(std::move(fields));
  }
  Dataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  ds.labels.resize(static_cast<Eigen::Index>(labels.size()));
  int max_label = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t f = 0; f < rows[i].size(); ++f) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i][f];
    }
    ds.labels[static_cast<Eigen::Index>(i)] = labels[i];
    max_label = std::max(max_label, labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

}  // namespace meerkat
