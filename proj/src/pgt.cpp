#include "gauss/pgt.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include "gauss/io.hpp"

namespace gauss {

namespace {

// Squared distances from every column of y to `center`.
VectorXd sq_dist_to(const MatrixXd& y, const VectorXd& center) {
  return (y.colwise() - center).colwise().squaredNorm().transpose();
}

MatrixXd kmeanspp_init(const MatrixXd& y, int k, Rng& rng) {
  const int n = static_cast<int>(y.cols());
  MatrixXd centroids(y.rows(), k);
  centroids.col(0) = y.col(static_cast<int>(rng.index(n)));
  VectorXd d2 = sq_dist_to(y, centroids.col(0));
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int pick;
    if (total > 0.0) {
      // Draw proportional to squared distance.
      double r = rng.uniform() * total;
      pick = n - 1;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += d2[j];
        if (r < acc) {
          pick = j;
          break;
        }
      }
    } else {
      // All points coincide with chosen centroids; any point works.
      pick = static_cast<int>(rng.index(n));
    }
    centroids.col(c) = y.col(pick);
    d2 = d2.cwiseMin(sq_dist_to(y, centroids.col(c)));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const SpectraMatrix& y, int k, std::uint64_t seed,
                    int max_iter, double tol) {
  const MatrixXd& pts = y.values;
  const int n = static_cast<int>(pts.cols());
  if (k < 1) throw DataError("kmeans: k must be at least 1");
  if (k > n)
    throw DataError("kmeans: k=" + std::to_string(k) + " exceeds " +
                    std::to_string(n) + " points");

  Rng rng(derive_seed(seed, seed_label::kKmeans));
  KMeansResult result;
  result.centroids = kmeanspp_init(pts, k, rng);
  result.labels.assign(n, 0);

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment.
    MatrixXd d2(k, n);
    for (int c = 0; c < k; ++c)
      d2.row(c) = sq_dist_to(pts, result.centroids.col(c)).transpose();
    double inertia = 0.0;
    std::vector<int> counts(k, 0);
    for (int j = 0; j < n; ++j) {
      int best;
      inertia += d2.col(j).minCoeff(&best);
      result.labels[j] = best;
      ++counts[best];
    }
    result.inertia = inertia;
    result.iterations = iter + 1;
    result.inertia_history.push_back(inertia);
    assert(inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12);
    prev_inertia = inertia;

    // Update; empty clusters are re-seeded at the farthest point.
    MatrixXd next = MatrixXd::Zero(pts.rows(), k);
    for (int j = 0; j < n; ++j) next.col(result.labels[j]) += pts.col(j);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.col(c) /= counts[c];
      } else {
        int farthest = 0;
        double worst = -1.0;
        for (int j = 0; j < n; ++j) {
          const double d = d2(result.labels[j], j);
          if (d > worst) {
            worst = d;
            farthest = j;
          }
        }
        next.col(c) = pts.col(farthest);
      }
    }

    const double shift = (next - result.centroids).norm();
    const double scale = std::max(result.centroids.norm(), 1e-12);
    result.centroids = next;
    if (shift <= tol * scale) {
      // Final assignment against the settled centroids.
      for (int c = 0; c < k; ++c)
        d2.row(c) = sq_dist_to(pts, result.centroids.col(c)).transpose();
      double final_inertia = 0.0;
      for (int j = 0; j < n; ++j) {
        int best;
        final_inertia += d2.col(j).minCoeff(&best);
        result.labels[j] = best;
      }
      assert(final_inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12);
      result.inertia = final_inertia;
      result.inertia_history.push_back(final_inertia);
      break;
    }
  }
  if (!result.centroids.allFinite())
    throw NumericError("kmeans: non-finite centroid");
  return result;
}

AbundanceMatrix one_hot_pseudo_gt(const std::vector<int>& labels, int k) {
  if (k < 1) throw DataError("one_hot_pseudo_gt: k must be at least 1");
  AbundanceMatrix out;
  out.values = MatrixXd::Zero(k, static_cast<int>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= k)
      throw DataError("one_hot_pseudo_gt: label " + std::to_string(labels[j]) +
                      " outside [0," + std::to_string(k) + ")");
    out.values(labels[j], static_cast<int>(j)) = 1.0;
  }
  return out;
}

AbundanceMatrix load_external_pgt(const std::string& path, int k, int n) {
  AbundanceMatrix s = io::read_abundance_csv(path);
  if (s.sources() != k || s.pixels() != n)
    throw DataError("external pseudo-ground-truth is " +
                    std::to_string(s.sources()) + "x" +
                    std::to_string(s.pixels()) + ", expected " +
                    std::to_string(k) + "x" + std::to_string(n) + ": " + path);
  s.values = s.values.cwiseMax(0.0).cwiseMin(1.0);
  for (int j = 0; j < s.pixels(); ++j) {
    const double sum = s.values.col(j).sum();
    if (std::abs(sum - 1.0) > 1e-3)
      throw DataError("external pseudo-ground-truth column " +
                      std::to_string(j) + " sums to " + std::to_string(sum) +
                      " (corrupt input): " + path);
    s.values.col(j) /= sum;
  }
  return s;
}

}  // namespace gauss
