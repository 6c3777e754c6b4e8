#pragma once

#include <string>

#include "gauss/hsi.hpp"
#include "gauss/nn.hpp"

namespace gauss {

// The three sub-networks of the unmixing architecture. Layer widths follow
// the fixed recipe below (floor division), |S| = 8:
//   approximation (AN): 8B -> floor(8B/2) -> floor(8B/8) -> B, biased,
//     hidden relu, linear output;
//   unmixing (UN): B -> floor(B/2) -> floor(B/8) -> K, no bias, hidden
//     relu, softmax output;
//   mixing (MN): K -> floor(B/4) -> B, no bias, hidden relu, relu_eps
//     output so reconstructed spectra stay strictly positive.
struct GaussModel {
  nn::Network an;
  nn::Network un;
  nn::Network mn;
  int bands = 0;
  int sources = 0;
  int neighborhood = 8;
  bool pretrained = false;  // set once the initializer schedule has run
};

// Seeded construction. Requires B >= 8 (so no floor produces an empty
// layer) and K >= 2.
GaussModel build_model(int bands, int sources, std::uint64_t seed);

// Smoothed center-pixel estimates from stacked neighborhoods; B x N,
// unconstrained sign (consumers clamp where they need positivity).
MatrixXd an_forward(const GaussModel& model, const NeighborhoodMatrix& nbhd);

// Abundances from (smoothed) spectra; softmax puts every column on the
// probability simplex.
AbundanceMatrix un_forward(const GaussModel& model, const MatrixXd& spectra);

// Reconstructed spectra from abundances; strictly positive.
MatrixXd mn_forward(const GaussModel& model, const MatrixXd& abundances);

// Endmember spectra: the mixing network's response to the identity matrix
// (column k = response to the k-th one-hot abundance).
EndmemberMatrix extract_endmembers(const GaussModel& model);

// Full inference pipeline: neighborhoods -> AN -> UN.
AbundanceMatrix estimate_abundances(const GaussModel& model, const HsiCube& cube);

// Model checkpoint: a directory holding manifest.json plus one nn-core
// checkpoint per sub-network.
void save_model(const GaussModel& model, const nn::AdamParams& hp,
                const std::string& dir);
GaussModel load_model(const std::string& dir);

}  // namespace gauss
