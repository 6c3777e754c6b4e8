#include "gauss/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gauss::io {

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream f(path, mode);
  if (!f) throw DataError("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream f(path, mode);
  if (!f) throw DataError("cannot open for reading: " + path);
  return f;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_cube(const HsiCube& cube, const std::string& path) {
  cube.validate();
  nlohmann::json header = {{"width", cube.width},
                           {"height", cube.height},
                           {"bands", cube.bands},
                           {"dtype", "f32"}};
  auto f = open_out(path, std::ios::binary);
  f << header.dump() << '\n';
  std::vector<float> payload(cube.data.size());
  for (std::size_t i = 0; i < cube.data.size(); ++i)
    payload[i] = static_cast<float>(cube.data[i]);
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!f) throw DataError("write failed: " + path);
}

HsiCube load_cube(const std::string& path) {
  auto f = open_in(path, std::ios::binary);
  std::string line;
  if (!std::getline(f, line)) throw DataError("cube file truncated: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed cube header in " + path + ": " + e.what());
  }
  if (!header.contains("width") || !header.contains("height") ||
      !header.contains("bands") || !header.contains("dtype"))
    throw DataError("cube header missing fields: " + path);
  if (header["dtype"] != "f32")
    throw DataError("unsupported cube dtype in " + path);
  const int w = header["width"], h = header["height"], b = header["bands"];
  if (w <= 0 || h <= 0 || b <= 0)
    throw DataError("cube header has non-positive dimension: " + path);

  HsiCube cube(w, h, b);
  std::vector<float> payload(cube.data.size());
  f.read(reinterpret_cast<char*>(payload.data()),
         static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (f.gcount() !=
      static_cast<std::streamsize>(payload.size() * sizeof(float)))
    throw DataError("cube payload shorter than header promises: " + path);
  char extra;
  if (f.read(&extra, 1))
    throw DataError("cube payload longer than header promises: " + path);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (!(payload[i] >= 0.0f))
      throw DataError("cube contains negative or NaN reflectance: " + path);
    cube.data[i] = payload[i];
  }
  return cube;
}

void write_matrix_csv(const MatrixXd& m, const std::vector<std::string>& header,
                      const std::string& path) {
  if (static_cast<int>(header.size()) != m.cols())
    throw DataError("csv header names " + std::to_string(header.size()) +
                    " columns, matrix has " + std::to_string(m.cols()));
  auto f = open_out(path, std::ios::out);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) f << ',';
    f << header[i];
  }
  f << '\n';
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c) f << ',';
      f << format_double(m(r, c));
    }
    f << '\n';
  }
  if (!f) throw DataError("write failed: " + path);
}

CsvMatrix read_matrix_csv(const std::string& path) {
  auto f = open_in(path, std::ios::in);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  CsvMatrix out;
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) out.header.push_back(cell);
  const std::size_t ncols = out.header.size();
  if (ncols == 0) throw DataError("csv header row empty: " + path);

  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(ncols);
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError("csv cell is not a number in " + path + ": '" + cell + "'");
      }
    }
    if (row.size() != ncols)
      throw DataError("csv row " + std::to_string(rows.size() + 1) + " has " +
                      std::to_string(row.size()) + " cells, header names " +
                      std::to_string(ncols) + ": " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("csv has no data rows: " + path);
  out.values.resize(static_cast<int>(rows.size()), static_cast<int>(ncols));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < ncols; ++c)
      out.values(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  return out;
}

namespace {
std::vector<std::string> numbered(const std::string& prefix, int n) {
  std::vector<std::string> names;
  names.reserve(n);
  for (int i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}
}  // namespace

void write_abundance_csv(const AbundanceMatrix& s, const std::string& path) {
  write_matrix_csv(s.values, numbered("px", s.pixels()), path);
}

AbundanceMatrix read_abundance_csv(const std::string& path) {
  AbundanceMatrix s;
  s.values = read_matrix_csv(path).values;
  return s;
}

void write_endmember_csv(const EndmemberMatrix& a, const std::string& path,
                         const std::vector<std::string>& names) {
  write_matrix_csv(a.values,
                   names.empty() ? numbered("em", a.sources()) : names, path);
}

EndmemberMatrix read_endmember_csv(const std::string& path) {
  EndmemberMatrix a;
  a.values = read_matrix_csv(path).values;
  return a;
}

void write_pgm(const MatrixXd& plane, const std::string& path) {
  const int h = static_cast<int>(plane.rows());
  const int w = static_cast<int>(plane.cols());
  if (h == 0 || w == 0) throw DataError("pgm: empty image");
  auto f = open_out(path, std::ios::binary);
  f << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> row(w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double v = std::clamp(plane(r, c), 0.0, 1.0);
      row[c] = static_cast<unsigned char>(v * 255.0 + 0.5);
    }
    f.write(reinterpret_cast<const char*>(row.data()), w);
  }
  if (!f) throw DataError("write failed: " + path);
}

SpectralLibraryEntry load_spectral_library_entry(const std::string& path) {
  CsvMatrix csv = read_matrix_csv(path);
  if (csv.header.size() != 2 || csv.header[0] != "wavelength_nm" ||
      csv.header[1] != "reflectance")
    throw DataError("spectral library file needs header "
                    "'wavelength_nm,reflectance': " + path);
  SpectralLibraryEntry entry;
  entry.name = std::filesystem::path(path).stem().string();
  const int n = static_cast<int>(csv.values.rows());
  entry.wavelengths.resize(n);
  entry.reflectance.resize(n);
  for (int i = 0; i < n; ++i) {
    entry.wavelengths[i] = csv.values(i, 0);
    entry.reflectance[i] = csv.values(i, 1);
    if (i > 0 && entry.wavelengths[i] <= entry.wavelengths[i - 1])
      throw DataError("wavelengths not strictly increasing: " + path);
    if (entry.reflectance[i] < 0.0 || entry.reflectance[i] > 1.0)
      throw DataError("reflectance outside [0,1]: " + path);
  }
  return entry;
}

}  // namespace gauss::io
