#pragma once

#include "gauss/types.hpp"

namespace gauss {

// Column j of the matrix view is the pixel at row m = j / w, col n = j % w
// (row-major). Inverse of matrix_to_cube.
SpectraMatrix cube_to_matrix(const HsiCube& cube);

// Exact inverse of cube_to_matrix. Throws DataError if w * h != columns.
HsiCube matrix_to_cube(const SpectraMatrix& m, int width, int height);

// The 8 Moore neighbors of (row, col), stacked band-blocks in scan order
// NW, N, NE, W, E, SW, S, SE. Out-of-image neighbors are clamped to the
// nearest edge pixel (replication), so every pixel has a full neighborhood.
// The scan order is frozen: approximation-network weights depend on it.
VectorXd extract_neighborhood(const HsiCube& cube, int row, int col);

// (8 * B) x N matrix whose column j is extract_neighborhood at pixel j.
NeighborhoodMatrix build_neighborhood_matrix(const HsiCube& cube);

}  // namespace gauss
