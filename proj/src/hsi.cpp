#include "gauss/hsi.hpp"

#include <algorithm>

namespace gauss {

SpectraMatrix cube_to_matrix(const HsiCube& cube) {
  const int n = cube.pixels();
  SpectraMatrix out;
  out.values.resize(cube.bands, n);
  for (int j = 0; j < n; ++j) {
    for (int b = 0; b < cube.bands; ++b) {
      out.values(b, j) = cube.data[static_cast<std::size_t>(j) * cube.bands + b];
    }
  }
  return out;
}

HsiCube matrix_to_cube(const SpectraMatrix& m, int width, int height) {
  if (width <= 0 || height <= 0)
    throw DataError("matrix_to_cube: non-positive dimensions");
  if (m.pixels() != width * height)
    throw DataError("matrix_to_cube: " + std::to_string(m.pixels()) +
                    " columns cannot fill a " + std::to_string(width) + "x" +
                    std::to_string(height) + " image");
  HsiCube cube(width, height, m.bands());
  for (int j = 0; j < m.pixels(); ++j) {
    for (int b = 0; b < m.bands(); ++b) {
      cube.data[static_cast<std::size_t>(j) * cube.bands + b] = m.values(b, j);
    }
  }
  return cube;
}

namespace {
// Moore scan order, frozen.
constexpr int kOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                {0, 1},   {1, -1}, {1, 0},  {1, 1}};
}  // namespace

VectorXd extract_neighborhood(const HsiCube& cube, int row, int col) {
  if (row < 0 || row >= cube.height || col < 0 || col >= cube.width)
    throw DataError("extract_neighborhood: pixel (" + std::to_string(row) +
                    "," + std::to_string(col) + ") outside image");
  const int b = cube.bands;
  VectorXd out(8 * b);
  for (int i = 0; i < 8; ++i) {
    int r = std::clamp(row + kOffsets[i][0], 0, cube.height - 1);
    int c = std::clamp(col + kOffsets[i][1], 0, cube.width - 1);
    const std::size_t base = static_cast<std::size_t>(cube.pixel_index(r, c)) * b;
    for (int k = 0; k < b; ++k) out[i * b + k] = cube.data[base + k];
  }
  return out;
}

NeighborhoodMatrix build_neighborhood_matrix(const HsiCube& cube) {
  NeighborhoodMatrix out;
  out.bands = cube.bands;
  out.values.resize(8 * cube.bands, cube.pixels());
  for (int row = 0; row < cube.height; ++row) {
    for (int col = 0; col < cube.width; ++col) {
      out.values.col(cube.pixel_index(row, col)) =
          extract_neighborhood(cube, row, col);
    }
  }
  return out;
}

}  // namespace gauss
