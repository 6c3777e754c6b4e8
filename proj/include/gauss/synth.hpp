#pragma once

#include <optional>
#include <vector>

#include "gauss/io.hpp"
#include "gauss/types.hpp"

namespace gauss::synth {

struct SynthConfig {
  int width = 100;
  int height = 100;
  int sources = 4;
  int tile = 25;        // tile edge in pixels; width and height must divide
  int superpixel = 3;   // odd stamp edge
  double pure_tile_fraction = 0.25;
  int smoothing_passes = 3;
  std::optional<double> noise_snr_db;  // nullopt = noiseless
  std::uint64_t seed = 0;

  void validate() const;
};

struct AbundanceField {
  AbundanceMatrix matrix;  // K x (w*h), columns in row-major pixel order
  int width = 0;
  int height = 0;

  double at(int row, int col, int source) const {
    return matrix.values(source, row * width + col);
  }
};

// Structured abundance maps: random simplex stamps on a tile grid, a share
// of tiles held pure (one-hot), irregular boundary growth, then 3x3 mean
// filtering. Output satisfies ANC and ASC exactly after the final column
// renormalization. Deterministic in cfg.seed.
AbundanceField generate_abundances(const SynthConfig& cfg);

// One 3x3 mean-filter pass over every row of `field`, each row read as a
// width x height plane in row-major pixel order; borders replicate.
MatrixXd mean_filter_3x3(const MatrixXd& field, int width, int height);

// Natural cubic spline through the entry's samples, evaluated at the
// target wavelengths; negative interpolants are clamped to zero. Targets
// outside the sampled range or fewer than 4 knots are errors.
std::vector<double> resample_spectrum(const io::SpectralLibraryEntry& entry,
                                      const std::vector<double>& target_wavelengths);

// Y = A * S, plus zero-mean Gaussian noise scaled to the requested
// per-image SNR when given; results are clamped to >= 0.
SpectraMatrix mix_lmm(const EndmemberMatrix& a, const AbundanceMatrix& s,
                      std::optional<double> noise_snr_db, std::uint64_t seed);

}  // namespace gauss::synth
