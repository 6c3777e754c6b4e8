#include "gauss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gauss::metrics {

std::vector<int> solve_assignment(const MatrixXd& cost) {
  if (cost.rows() != cost.cols() || cost.rows() == 0)
    throw DataError("solve_assignment: cost matrix must be square");
  if (!cost.allFinite())
    throw NumericError("solve_assignment: non-finite cost");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials; p[j] = row assigned to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j]) perm[p[j] - 1] = j - 1;
  return perm;
}

double spectral_angle(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0)
    throw DataError("spectral_angle: zero-norm vector");
  const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

std::vector<int> align(const EndmemberMatrix& a_true, const EndmemberMatrix& a_est) {
  if (a_true.sources() != a_est.sources() || a_true.bands() != a_est.bands())
    throw DataError("align: endmember shapes differ");
  const int k = a_true.sources();
  MatrixXd cost(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      cost(i, j) = spectral_angle(a_true.values.col(i), a_est.values.col(j));
  return solve_assignment(cost);
}

namespace {
int common_pixels(const AbundanceMatrix& s, const AbundanceMatrix& t) {
  if (s.sources() != t.sources() || s.pixels() != t.pixels())
    throw DataError("abundance metric: shapes differ");
  if (s.pixels() == 0) throw DataError("abundance metric: empty input");
  return s.pixels();
}

// Symmetric KL between two non-negative vectors, entries clamped at
// kLogEps inside the logs.
double symmetric_kl(const VectorXd& p, const VectorXd& q) {
  Eigen::ArrayXd pc = p.array().max(kLogEps);
  Eigen::ArrayXd qc = q.array().max(kLogEps);
  Eigen::ArrayXd lr = (pc / qc).log();
  return ((pc - qc) * lr).sum();
}
}  // namespace

double armse(const AbundanceMatrix& s, const AbundanceMatrix& s_est) {
  const int n = common_pixels(s, s_est);
  return std::sqrt((s.values - s_est.values).squaredNorm() /
                   (static_cast<double>(n) * s.sources()));
}

double aaad(const AbundanceMatrix& s, const AbundanceMatrix& s_est) {
  const int n = common_pixels(s, s_est);
  double total = 0.0;
  for (int j = 0; j < n; ++j)
    total += spectral_angle(s.values.col(j), s_est.values.col(j));
  return total / n;
}

double aaid(const AbundanceMatrix& s, const AbundanceMatrix& s_est) {
  const int n = common_pixels(s, s_est);
  double total = 0.0;
  for (int j = 0; j < n; ++j)
    total += symmetric_kl(s.values.col(j), s_est.values.col(j));
  return total / n;
}

double asad(const EndmemberMatrix& a, const EndmemberMatrix& a_est) {
  if (a.sources() != a_est.sources() || a.bands() != a_est.bands())
    throw DataError("asad: shapes differ");
  double total = 0.0;
  for (int k = 0; k < a.sources(); ++k)
    total += spectral_angle(a.values.col(k), a_est.values.col(k));
  return total / a.sources();
}

double asid(const EndmemberMatrix& a, const EndmemberMatrix& a_est) {
  if (a.sources() != a_est.sources() || a.bands() != a_est.bands())
    throw DataError("asid: shapes differ");
  double total = 0.0;
  for (int k = 0; k < a.sources(); ++k) {
    const double na = a.values.col(k).template lpNorm<1>();
    const double nb = a_est.values.col(k).template lpNorm<1>();
    if (na == 0.0 || nb == 0.0) throw DataError("asid: zero-norm spectrum");
    total += symmetric_kl(a.values.col(k) / na, a_est.values.col(k) / nb);
  }
  return total / a.sources();
}

EvalReport evaluate(const AbundanceMatrix& s_true, const AbundanceMatrix& s_est,
                    const EndmemberMatrix& a_true, const EndmemberMatrix& a_est) {
  if (s_true.sources() != a_true.sources() ||
      s_est.sources() != a_est.sources())
    throw DataError("evaluate: abundance and endmember source counts differ");
  EvalReport report;
  report.permutation = align(a_true, a_est);

  AbundanceMatrix s_aligned;
  s_aligned.values.resize(s_est.sources(), s_est.pixels());
  EndmemberMatrix a_aligned;
  a_aligned.values.resize(a_est.bands(), a_est.sources());
  for (int k = 0; k < s_est.sources(); ++k) {
    s_aligned.values.row(k) = s_est.values.row(report.permutation[k]);
    a_aligned.values.col(k) = a_est.values.col(report.permutation[k]);
  }

  report.armse = armse(s_true, s_aligned);
  report.aaad = aaad(s_true, s_aligned);
  report.aaid = aaid(s_true, s_aligned);
  report.asad = asad(a_true, a_aligned);
  report.asid = asid(a_true, a_aligned);
  return report;
}

}  // namespace gauss::metrics
