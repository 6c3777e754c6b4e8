#pragma once

#include <string>
#include <vector>

#include "gauss/types.hpp"

namespace gauss {

struct KMeansResult {
  MatrixXd centroids;       // bands x clusters
  std::vector<int> labels;  // one per pixel, in [0, K)
  double inertia = 0.0;     // sum of squared distances to assigned centroid
  int iterations = 0;
  std::vector<double> inertia_history;  // one value per assignment pass
};

// Lloyd's algorithm with k-means++ initialization over the columns of Y.
// Stops when the total centroid movement falls below `tol` relative to the
// centroid norms, or after `max_iter` iterations. An empty cluster is
// re-seeded at the point currently farthest from its centroid. Inertia is
// non-increasing across iterations (asserted in debug builds).
KMeansResult kmeans(const SpectraMatrix& y, int k, std::uint64_t seed,
                    int max_iter = 300, double tol = 1e-6);

// One-hot columns from cluster labels; exact ANC + ASC by construction.
// The cluster order is whatever k-means produced; nothing here promises a
// correspondence with the true endmember order (metrics::align handles
// that downstream, and the cross-entropy target only needs consistency).
AbundanceMatrix one_hot_pseudo_gt(const std::vector<int>& labels, int k);

// Abundance CSV produced by an external unmixing algorithm. Columns whose
// sum is within 1e-3 of one are renormalized; anything further off is
// treated as corrupt input. Entries are clamped to [0,1].
AbundanceMatrix load_external_pgt(const std::string& path, int k, int n);

}  // namespace gauss
