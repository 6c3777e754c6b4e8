#pragma once

#include <string>
#include <vector>

#include "gauss/types.hpp"

namespace gauss::io {

// Cube file: one UTF-8 JSON header line
//   {"width":w,"height":h,"bands":B,"dtype":"f32"}
// terminated by '\n', then w*h*B little-endian 32-bit floats, pixel-major
// with pixels in row-major order.
void save_cube(const HsiCube& cube, const std::string& path);
HsiCube load_cube(const std::string& path);

// CSV with a single header row naming columns; doubles are written with
// enough digits to round-trip exactly.
struct CsvMatrix {
  std::vector<std::string> header;
  MatrixXd values;
};
void write_matrix_csv(const MatrixXd& m, const std::vector<std::string>& header,
                      const std::string& path);
CsvMatrix read_matrix_csv(const std::string& path);

// Abundance CSV: one column per pixel, K rows. Endmember CSV: one column
// per source, B rows.
void write_abundance_csv(const AbundanceMatrix& s, const std::string& path);
AbundanceMatrix read_abundance_csv(const std::string& path);
void write_endmember_csv(const EndmemberMatrix& a, const std::string& path,
                         const std::vector<std::string>& names = {});
EndmemberMatrix read_endmember_csv(const std::string& path);

// Binary portable graymap (P5, maxval 255). `plane` is height x width in
// [0,1]; values map linearly to 0..255.
void write_pgm(const MatrixXd& plane, const std::string& path);

// Spectral library file: CSV with columns wavelength_nm,reflectance.
struct SpectralLibraryEntry {
  std::vector<double> wavelengths;  // nanometers, strictly increasing
  std::vector<double> reflectance;  // values in [0,1]
  std::string name;                 // file stem
};
SpectralLibraryEntry load_spectral_library_entry(const std::string& path);

}  // namespace gauss::io
