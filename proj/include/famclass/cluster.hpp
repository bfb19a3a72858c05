#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "famclass/common.hpp"
#include "famclass/features.hpp"
#include "famclass/forest.hpp"

// Density-initialized weighted K-means. Rows are dense real vectors (binary
// feature rows become 0/1 doubles); centers live in real space since the
// mean update produces fractional coordinates. All tie breaks go to the
// lowest index so clustering is deterministic.

namespace famclass {

struct WeightVector {
  std::vector<double> w;  // per-dimension; sums to 1, each in [0,1]

  std::size_t size() const { return w.size(); }
};

// w_i = v_i / sum(v); negative importances are clipped to zero first. An
// all-zero vector falls back to uniform weights with a warning.
inline WeightVector normalize_weights(const ImportanceVector& importances) {
  WeightVector out;
  out.w.resize(importances.values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.w.size(); ++i) {
    out.w[i] = importances.values[i] > 0.0 ? importances.values[i] : 0.0;
    total += out.w[i];
  }
  if (total <= 0.0) {
    log_warn("all feature importances are zero; falling back to uniform weights");
    if (!out.w.empty())
      std::fill(out.w.begin(), out.w.end(), 1.0 / static_cast<double>(out.w.size()));
    return out;
  }
  for (double& v : out.w) v /= total;
  return out;
}

inline WeightVector uniform_weights(std::size_t dimension) {
  WeightVector out;
  out.w.assign(dimension, dimension == 0 ? 0.0 : 1.0 / static_cast<double>(dimension));
  return out;
}

// d(a, b) = sqrt(sum_i w_i (a_i - b_i)^2)
inline double weighted_distance(const std::vector<double>& a, const std::vector<double>& b,
                                const WeightVector& weights) {
  if (a.size() != b.size() || a.size() != weights.size())
    throw DimensionMismatch("weighted_distance: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += weights.w[i] * d * d;
  }
  return std::sqrt(sum);
}

inline double weighted_distance_sq(const std::vector<double>& a, const std::vector<double>& b,
                                   const WeightVector& weights) {
  double d = weighted_distance(a, b, weights);
  return d * d;
}

using DenseRows = std::vector<std::vector<double>>;

inline DenseRows dense_rows_from(const LabeledDataset& ds) {
  DenseRows rows(ds.rows.size(), std::vector<double>(ds.dimension(), 0.0));
  for (std::size_t r = 0; r < ds.rows.size(); ++r)
    for (std::uint32_t c : ds.rows[r].vec.columns) rows[r][c] = 1.0;
  return rows;
}

inline std::vector<double> dense_from_vec(const FeatureVector& v) {
  std::vector<double> out(v.dimension, 0.0);
  for (std::uint32_t c : v.columns) out[c] = 1.0;
  return out;
}

// Mean of all C(m,2) pairwise weighted distances. Partial sums are computed
// per row and reduced in row order so the result is run-to-run identical
// even when parallelized.
inline double average_distance(const DenseRows& rows, const WeightVector& weights) {
  const std::size_t m = rows.size();
  if (m < 2) throw TooFewSamples("average_distance needs at least 2 rows");
  std::vector<double> partial(m, 0.0);
  parallel_for(m, [&](std::size_t p) {
    double s = 0.0;
    for (std::size_t q = p + 1; q < m; ++q) s += weighted_distance(rows[p], rows[q], weights);
    partial[p] = s;
  });
  double total = 0.0;
  for (double s : partial) total += s;
  double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
  return total / pairs;
}

// Dens(p) = #{q in 1..m : avg - d(p,q) > 0}. The step function is strict,
// so a row at exactly the average distance does not count, and the row
// itself counts whenever avg > 0 (its self-distance is zero).
inline std::size_t density(const DenseRows& rows, std::size_t p, double avg,
                           const WeightVector& weights) {
  std::size_t count = 0;
  for (std::size_t q = 0; q < rows.size(); ++q)
    if (avg - weighted_distance(rows[p], rows[q], weights) > 0.0) ++count;
  return count;
}

// Density-based initialization: repeatedly take the densest remaining row
// as a center, then drop every remaining row within the average distance of
// it. If the pool empties before k centers exist, the remainder falls back
// to farthest-point selection over all rows.
inline std::vector<std::size_t> density_init(const DenseRows& rows, std::size_t k,
                                             const WeightVector& weights) {
  const std::size_t m = rows.size();
  if (k < 1 || k > m) throw TooFewSamples("density_init: need 1 <= k <= number of rows");
  if (m == 1) return {0};

  const double avg = average_distance(rows, weights);
  std::vector<std::size_t> dens(m, 0);
  parallel_for(m, [&](std::size_t p) { dens[p] = density(rows, p, avg, weights); });

  std::vector<char> removed(m, 0);
  std::vector<std::size_t> centers;
  while (centers.size() < k) {
    std::size_t best = m;
    for (std::size_t p = 0; p < m; ++p)
      if (!removed[p] && (best == m || dens[p] > dens[best])) best = p;
    if (best == m) break;  // pool exhausted
    centers.push_back(best);
    removed[best] = 1;
    for (std::size_t q = 0; q < m; ++q)
      if (!removed[q] && avg - weighted_distance(rows[best], rows[q], weights) > 0.0)
        removed[q] = 1;
  }

  if (centers.size() < k) {
    log_warn("density init exhausted after " + std::to_string(centers.size()) +
             " centers; completing " + std::to_string(k) +
             " with farthest-point selection");
    std::vector<char> is_center(m, 0);
    for (std::size_t c : centers) is_center[c] = 1;
    while (centers.size() < k) {
      std::size_t best = m;
      double best_dist = -1.0;
      for (std::size_t p = 0; p < m; ++p) {
        if (is_center[p]) continue;
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t c : centers)
          nearest = std::min(nearest, weighted_distance(rows[p], rows[c], weights));
        if (nearest > best_dist) {
          best_dist = nearest;
          best = p;
        }
      }
      if (best == m) throw InternalError("density_init: ran out of rows before k centers");
      centers.push_back(best);
      is_center[best] = 1;
    }
  }
  return centers;
}

struct ClusterModel {
  std::size_t k = 0;
  DenseRows centers;
  std::vector<std::uint32_t> assignments;  // per row
  WeightVector weights;
  std::size_t iterations_run = 0;
  std::vector<double> wcss_history;  // weighted within-cluster SSE per iteration
};

struct KMeansConfig {
  std::size_t max_iter = 300;
  double tol = 1e-6;  // max center displacement at convergence
};

inline ClusterModel kmeans(const DenseRows& rows, std::size_t k, const WeightVector& weights,
                           const KMeansConfig& cfg = {}) {
  const std::size_t m = rows.size();
  if (m == 0) throw TooFewSamples("kmeans: empty row set");
  if (k < 1 || k > m) throw TooFewSamples("kmeans: need 1 <= k <= number of rows");
  const std::size_t dim = rows[0].size();
  if (weights.size() != dim) throw DimensionMismatch("kmeans: weight dimension mismatch");

  ClusterModel model;
  model.k = k;
  model.weights = weights;
  for (std::size_t c : density_init(rows, k, weights)) model.centers.push_back(rows[c]);
  model.assignments.assign(m, 0);

  auto assign_all = [&]() {
    parallel_for(m, [&](std::size_t r) {
      std::size_t best = 0;
      double best_d = weighted_distance(rows[r], model.centers[0], weights);
      for (std::size_t c = 1; c < k; ++c) {
        double d = weighted_distance(rows[r], model.centers[c], weights);
        if (d < best_d) {  // ties keep the lower cluster index
          best_d = d;
          best = c;
        }
      }
      model.assignments[r] = static_cast<std::uint32_t>(best);
    });
  };

  for (std::size_t iter = 0; iter < cfg.max_iter; ++iter) {
    assign_all();

    // Re-seed empty clusters at the row farthest from its assigned center,
    // then redo the assignment. Bounded: a duplicate-heavy row set may be
    // unable to fill every cluster.
    for (std::size_t attempt = 0; attempt < k; ++attempt) {
      std::vector<std::size_t> sizes(k, 0);
      for (std::uint32_t a : model.assignments) ++sizes[a];
      std::size_t empty = k;
      for (std::size_t c = 0; c < k; ++c)
        if (sizes[c] == 0) {
          empty = c;
          break;
        }
      if (empty == k) break;
      std::size_t farthest = 0;
      double far_d = -1.0;
      for (std::size_t r = 0; r < m; ++r) {
        double d = weighted_distance(rows[r], model.centers[model.assignments[r]], weights);
        if (d > far_d) {
          far_d = d;
          farthest = r;
        }
      }
      if (far_d <= 0.0) break;  // every row sits on a center already
      log_warn("empty cluster " + std::to_string(empty) + "; re-seeding at row " +
               std::to_string(farthest));
      model.centers[empty] = rows[farthest];
      assign_all();
    }

    // Center update: member means (the minimizer of the weighted SSE).
    DenseRows new_centers(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t r = 0; r < m; ++r) {
      auto c = model.assignments[r];
      ++sizes[c];
      for (std::size_t i = 0; i < dim; ++i) new_centers[c][i] += rows[r][i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        new_centers[c] = model.centers[c];  // unfillable cluster keeps its center
        continue;
      }
      for (std::size_t i = 0; i < dim; ++i)
        new_centers[c][i] /= static_cast<double>(sizes[c]);
    }

    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      moved = std::max(moved, weighted_distance(model.centers[c], new_centers[c], weights));
    model.centers = std::move(new_centers);
    model.iterations_run = iter + 1;

    double wcss = 0.0;
    for (std::size_t r = 0; r < m; ++r)
      wcss += weighted_distance_sq(rows[r], model.centers[model.assignments[r]], weights);
    model.wcss_history.push_back(wcss);

    if (moved <= cfg.tol) break;
  }
  assign_all();  // final assignment against converged centers
  return model;
}

// Mean silhouette under the weighted distance; scores k for the "auto" mode.
inline double mean_silhouette(const DenseRows& rows, const std::vector<std::uint32_t>& assign,
                              std::size_t k, const WeightVector& weights) {
  const std::size_t m = rows.size();
  std::vector<std::size_t> sizes(k, 0);
  for (std::uint32_t a : assign) ++sizes[a];
  std::vector<double> scores(m, 0.0);
  parallel_for(m, [&](std::size_t r) {
    std::vector<double> mean_d(k, 0.0);
    for (std::size_t q = 0; q < m; ++q) {
      if (q == r) continue;
      mean_d[assign[q]] += weighted_distance(rows[r], rows[q], weights);
    }
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t denom = sizes[c] - (assign[r] == c ? 1 : 0);
      mean_d[c] = denom == 0 ? 0.0 : mean_d[c] / static_cast<double>(denom);
    }
    if (sizes[assign[r]] <= 1) {
      scores[r] = 0.0;
      return;
    }
    double a = mean_d[assign[r]];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != assign[r]) b = std::min(b, mean_d[c]);
    double denom = std::max(a, b);
    scores[r] = denom > 0.0 ? (b - a) / denom : 0.0;
  });
  double total = 0.0;
  for (double s : scores) total += s;
  return m == 0 ? 0.0 : total / static_cast<double>(m);
}

// k in [2, 10] (clamped to m) maximizing the mean silhouette; ties go to the
// smaller k.
inline std::size_t pick_k_by_silhouette(const DenseRows& rows, const WeightVector& weights,
                                        const KMeansConfig& cfg = {}) {
  std::size_t best_k = 1;
  double best_score = -std::numeric_limits<double>::infinity();
  const std::size_t hi = std::min<std::size_t>(10, rows.size());
  for (std::size_t k = 2; k <= hi; ++k) {
    ClusterModel model = kmeans(rows, k, weights, cfg);
    double score = mean_silhouette(rows, model.assignments, k, weights);
    log_debug("silhouette sweep: k=" + std::to_string(k) + " score=" + std::to_string(score));
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace famclass
