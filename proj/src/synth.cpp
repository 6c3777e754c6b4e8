#include "gauss/synth.hpp"

#include <algorithm>
#include <cmath>

namespace gauss::synth {

void SynthConfig::validate() const {
  if (width <= 0 || height <= 0) throw DataError("synth: non-positive dims");
  if (sources < 2) throw DataError("synth: need at least 2 sources");
  if (tile <= 0 || width % tile != 0 || height % tile != 0)
    throw DataError("synth: width and height must be divisible by tile");
  if (superpixel < 1 || superpixel % 2 == 0)
    throw DataError("synth: superpixel must be odd");
  if (pure_tile_fraction < 0.0 || pure_tile_fraction > 1.0)
    throw DataError("synth: pure_tile_fraction outside [0,1]");
  if (smoothing_passes < 0) throw DataError("synth: negative smoothing passes");
}

namespace {

// Uniform draw from the K-simplex (normalized exponentials).
VectorXd random_simplex(int k, Rng& rng) {
  VectorXd v(k);
  for (int i = 0; i < k; ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    v[i] = -std::log(u);
  }
  return v / v.sum();
}

int dominant_source(const MatrixXd& field, int idx) {
  int best;
  field.col(idx).maxCoeff(&best);
  return best;
}

}  // namespace

AbundanceField generate_abundances(const SynthConfig& cfg) {
  cfg.validate();
  const int w = cfg.width, h = cfg.height, k = cfg.sources;
  const int n = w * h;
  const int tiles_x = w / cfg.tile, tiles_y = h / cfg.tile;
  const int num_tiles = tiles_x * tiles_y;
  if (num_tiles == 0) throw DataError("synth: zero tiles");

  Rng rng(derive_seed(cfg.seed, seed_label::kSynthAbundance));
  MatrixXd field = MatrixXd::Zero(k, n);
  std::vector<char> occupied(n, 0);

  // Pure tiles: a random subset, each held one-hot at a random source.
  const int num_pure =
      static_cast<int>(std::lround(cfg.pure_tile_fraction * num_tiles));
  std::vector<int> tile_order(num_tiles);
  for (int t = 0; t < num_tiles; ++t) tile_order[t] = t;
  rng.shuffle(tile_order);
  std::vector<char> pure(num_tiles, 0);
  for (int i = 0; i < num_pure; ++i) pure[tile_order[i]] = 1;

  std::vector<int> mixed_tiles;
  for (int t = 0; t < num_tiles; ++t) {
    if (!pure[t]) {
      mixed_tiles.push_back(t);
      continue;
    }
    const int src = static_cast<int>(rng.index(k));
    const int ty = t / tiles_x, tx = t % tiles_x;
    for (int r = ty * cfg.tile; r < (ty + 1) * cfg.tile; ++r) {
      for (int c = tx * cfg.tile; c < (tx + 1) * cfg.tile; ++c) {
        field(src, r * w + c) = 1.0;
        occupied[r * w + c] = 1;
      }
    }
  }

  // Stamp random simplex vectors over superpixels of the mixed tiles until
  // 95% of all pixels are occupied or the draw budget runs out. Stamps are
  // clipped at tile edges.
  if (!mixed_tiles.empty()) {
    const int half = cfg.superpixel / 2;
    long occupied_count = 0;
    for (char o : occupied) occupied_count += o;
    const long target = static_cast<long>(std::ceil(0.95 * n));
    const long budget = 50L * n;
    for (long draw = 0; draw < budget && occupied_count < target; ++draw) {
      const int t = mixed_tiles[rng.index(mixed_tiles.size())];
      const int ty = t / tiles_x, tx = t % tiles_x;
      const int r0 = ty * cfg.tile, c0 = tx * cfg.tile;
      const int r = r0 + static_cast<int>(rng.index(cfg.tile));
      const int c = c0 + static_cast<int>(rng.index(cfg.tile));
      if (occupied[r * w + c]) continue;
      const VectorXd v = random_simplex(k, rng);
      const int rlo = std::max(r - half, r0), rhi = std::min(r + half, r0 + cfg.tile - 1);
      const int clo = std::max(c - half, c0), chi = std::min(c + half, c0 + cfg.tile - 1);
      for (int rr = rlo; rr <= rhi; ++rr) {
        for (int cc = clo; cc <= chi; ++cc) {
          const int idx = rr * w + cc;
          field.col(idx) = v;
          if (!occupied[idx]) {
            occupied[idx] = 1;
            ++occupied_count;
          }
        }
      }
    }
  }

  // Pixels the loop never reached get a uniform mixture so every column
  // is a valid distribution before filtering.
  for (int idx = 0; idx < n; ++idx) {
    if (!occupied[idx]) field.col(idx).setConstant(1.0 / k);
  }

  // Irregular boundary growth: each pass, a pixel adjacent to a different
  // region takes one random such neighbor's vector with probability 1/2.
  for (int pass = 0; pass < cfg.smoothing_passes; ++pass) {
    const MatrixXd snapshot = field;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int idx = r * w + c;
        const int own = dominant_source(snapshot, idx);
        int candidates[8];
        int num_candidates = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            const int nidx = rr * w + cc;
            if (dominant_source(snapshot, nidx) != own)
              candidates[num_candidates++] = nidx;
          }
        }
        if (num_candidates > 0 && rng.uniform() < 0.5)
          field.col(idx) = snapshot.col(candidates[rng.index(num_candidates)]);
      }
    }
  }

  // 3x3 mean filtering per source plane.
  for (int pass = 0; pass < cfg.smoothing_passes; ++pass)
    field = mean_filter_3x3(field, w, h);

  // Exact ASC.
  for (int j = 0; j < n; ++j) field.col(j) /= field.col(j).sum();

  AbundanceField out;
  out.width = w;
  out.height = h;
  out.matrix.values = std::move(field);
  out.matrix.validate();
  return out;
}

MatrixXd mean_filter_3x3(const MatrixXd& field, int width, int height) {
  if (field.cols() != static_cast<long>(width) * height)
    throw DataError("mean_filter_3x3: field columns do not match dimensions");
  MatrixXd out(field.rows(), field.cols());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      VectorXd acc = VectorXd::Zero(field.rows());
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = std::clamp(r + dr, 0, height - 1);
          const int cc = std::clamp(c + dc, 0, width - 1);
          acc += field.col(rr * width + cc);
        }
      }
      out.col(r * width + c) = acc / 9.0;
    }
  }
  return out;
}

std::vector<double> resample_spectrum(const io::SpectralLibraryEntry& entry,
                                      const std::vector<double>& target_wavelengths) {
  const std::size_t n = entry.wavelengths.size();
  if (n < 4)
    throw DataError("resample_spectrum: need at least 4 knots, got " +
                    std::to_string(n));
  const std::vector<double>& x = entry.wavelengths;
  const std::vector<double>& y = entry.reflectance;

  // Natural cubic spline: second derivatives from the tridiagonal system
  // (Thomas algorithm), m[0] = m[n-1] = 0.
  std::vector<double> m(n, 0.0);
  {
    std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x[i] - x[i - 1];
      const double h1 = x[i + 1] - x[i];
      diag[i] = (h0 + h1) / 3.0;
      upper[i] = h1 / 6.0;
      rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    // Forward sweep over rows 1..n-2; lower coefficient of row i is h0/6.
    for (std::size_t i = 2; i + 1 < n; ++i) {
      const double lower = (x[i] - x[i - 1]) / 6.0;
      const double factor = lower / diag[i - 1];
      diag[i] -= factor * upper[i - 1];
      rhs[i] -= factor * rhs[i - 1];
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
      if (i == 1) break;
    }
  }

  std::vector<double> out;
  out.reserve(target_wavelengths.size());
  for (double t : target_wavelengths) {
    if (t < x.front() || t > x.back())
      throw DataError("resample_spectrum: target " + std::to_string(t) +
                      " nm outside sampled range [" + std::to_string(x.front()) +
                      ", " + std::to_string(x.back()) + "]");
    // Interval lookup; x is strictly increasing.
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    std::size_t i = (it == x.begin()) ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
    if (i >= n - 1) i = n - 2;
    const double hseg = x[i + 1] - x[i];
    const double dx = t - x[i];
    const double value =
        y[i] + dx * ((y[i + 1] - y[i]) / hseg - hseg * (2.0 * m[i] + m[i + 1]) / 6.0) +
        dx * dx * m[i] / 2.0 + dx * dx * dx * (m[i + 1] - m[i]) / (6.0 * hseg);
    out.push_back(std::max(value, 0.0));
  }
  return out;
}

SpectraMatrix mix_lmm(const EndmemberMatrix& a, const AbundanceMatrix& s,
                      std::optional<double> noise_snr_db, std::uint64_t seed) {
  if (a.sources() != s.sources())
    throw DataError("mix_lmm: endmember sources (" + std::to_string(a.sources()) +
                    ") != abundance sources (" + std::to_string(s.sources()) + ")");
  SpectraMatrix out;
  out.values = a.values * s.values;
  if (noise_snr_db) {
    const double signal_power = out.values.squaredNorm() / out.values.size();
    const double sigma =
        std::sqrt(signal_power / std::pow(10.0, *noise_snr_db / 10.0));
    Rng rng(derive_seed(seed, seed_label::kSynthNoise));
    for (int j = 0; j < out.values.cols(); ++j)
      for (int b = 0; b < out.values.rows(); ++b)
        out.values(b, j) += sigma * rng.normal();
  }
  out.values = out.values.cwiseMax(0.0);
  return out;
}

}  // namespace gauss::synth
