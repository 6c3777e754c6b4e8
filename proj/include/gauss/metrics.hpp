#pragma once

#include <vector>

#include "gauss/types.hpp"

namespace gauss::metrics {

// Minimum-cost one-to-one assignment over a square cost matrix
// (Jonker-Volgenant style shortest augmenting paths, O(n^3)).
// Returns perm with perm[row] = assigned column.
std::vector<int> solve_assignment(const MatrixXd& cost);

// Bijection matching estimated sources to true ones by minimum total
// spectral angle between endmember columns; perm[k] names the estimated
// source paired with true source k.
std::vector<int> align(const EndmemberMatrix& a_true, const EndmemberMatrix& a_est);

// Spectral angle between two vectors; throws DataError on a zero vector.
double spectral_angle(const VectorXd& a, const VectorXd& b);

// Abundance metrics (estimate rows already aligned to the truth).
double armse(const AbundanceMatrix& s, const AbundanceMatrix& s_est);
double aaad(const AbundanceMatrix& s, const AbundanceMatrix& s_est);
double aaid(const AbundanceMatrix& s, const AbundanceMatrix& s_est);

// Endmember metrics (estimate columns already aligned to the truth).
double asad(const EndmemberMatrix& a, const EndmemberMatrix& a_est);
double asid(const EndmemberMatrix& a, const EndmemberMatrix& a_est);

struct EvalReport {
  double armse = 0.0;
  double aaad = 0.0;
  double aaid = 0.0;
  double asad = 0.0;
  double asid = 0.0;
  std::vector<int> permutation;
};

// Aligns once (on endmembers), applies the permutation to both the
// abundance rows and endmember columns of the estimates, then computes all
// five metrics.
EvalReport evaluate(const AbundanceMatrix& s_true, const AbundanceMatrix& s_est,
                    const EndmemberMatrix& a_true, const EndmemberMatrix& a_est);

}  // namespace gauss::metrics
