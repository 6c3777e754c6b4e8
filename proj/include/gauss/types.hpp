#pragma once

#include <Eigen/Dense>

#include "gauss/common.hpp"

namespace gauss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Tolerance for the abundance sum-to-one constraint.
inline constexpr double kAscTol = 1e-6;

// Hyperspectral cube, width x height x bands. Storage is pixel-major
// (all bands of pixel 0, then pixel 1, ...) with pixels in row-major
// order, matching the on-disk format. Reflectances, so values >= 0.
struct HsiCube {
  int width = 0;   // columns
  int height = 0;  // rows
  int bands = 0;
  std::vector<double> data;

  HsiCube() = default;
  HsiCube(int w, int h, int b)
      : width(w), height(h), bands(b),
        data(static_cast<std::size_t>(w) * h * b, 0.0) {}

  int pixels() const { return width * height; }

  // (row, col) -> flat pixel index; row-major.
  int pixel_index(int row, int col) const { return row * width + col; }

  double& at(int row, int col, int band) {
    return data[static_cast<std::size_t>(pixel_index(row, col)) * bands + band];
  }
  double at(int row, int col, int band) const {
    return data[static_cast<std::size_t>(pixel_index(row, col)) * bands + band];
  }

  void validate() const {
    if (width <= 0 || height <= 0 || bands <= 0)
      throw DataError("cube: non-positive dimension");
    if (data.size() != static_cast<std::size_t>(width) * height * bands)
      throw DataError("cube: payload size does not match dimensions");
    for (double v : data) {
      if (!(v >= 0.0)) throw DataError("cube: negative or NaN reflectance");
    }
  }
};

// B x N matrix, one pixel spectrum per column.
struct SpectraMatrix {
  MatrixXd values;  // bands x pixels

  int bands() const { return static_cast<int>(values.rows()); }
  int pixels() const { return static_cast<int>(values.cols()); }

  void validate() const {
    if (values.size() == 0) throw DataError("spectra: empty matrix");
    if ((values.array() < 0.0).any() || !values.allFinite())
      throw DataError("spectra: negative or non-finite entry");
  }
};

// (B * |S|) x N matrix, one stacked neighborhood vector per column.
struct NeighborhoodMatrix {
  MatrixXd values;
  int bands = 0;

  int cardinality() const {
    return bands > 0 ? static_cast<int>(values.rows()) / bands : 0;
  }
  int pixels() const { return static_cast<int>(values.cols()); }
};

// K x N matrix, one abundance column per pixel. Columns live on the
// probability simplex (ANC + ASC).
struct AbundanceMatrix {
  MatrixXd values;  // sources x pixels

  int sources() const { return static_cast<int>(values.rows()); }
  int pixels() const { return static_cast<int>(values.cols()); }

  void validate(double tol = kAscTol) const {
    if (values.size() == 0) throw DataError("abundances: empty matrix");
    if ((values.array() < 0.0).any() || !values.allFinite())
      throw DataError("abundances: negative or non-finite entry");
    for (int j = 0; j < values.cols(); ++j) {
      double s = values.col(j).sum();
      if (std::abs(s - 1.0) > tol)
        throw DataError("abundances: column " + std::to_string(j) +
                        " sums to " + std::to_string(s));
    }
  }
};

// B x K matrix, one endmember spectrum per column.
struct EndmemberMatrix {
  MatrixXd values;  // bands x sources

  int bands() const { return static_cast<int>(values.rows()); }
  int sources() const { return static_cast<int>(values.cols()); }

  void validate() const {
    if (values.size() == 0) throw DataError("endmembers: empty matrix");
    if ((values.array() < 0.0).any() || !values.allFinite())
      throw DataError("endmembers: negative or non-finite entry");
  }
};

}  // namespace gauss
