// File formats shared by the CLI and tests: curve/SRVF CSV, distance-matrix
// CSV, backbone-only PDB output, and the run manifest with content hashes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "protshape/curve.hpp"

namespace protshape::io {

// CSV with header "index,x,y,z", one row per point.
void write_curve_csv(const std::filesystem::path& path, const Curve& curve);
Curve read_curve_csv(const std::filesystem::path& path);

void write_srvf_csv(const std::filesystem::path& path, const Srvf& q);
Srvf read_srvf_csv(const std::filesystem::path& path);

// Square matrix with fragment ids as row and column headers.
void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& ids,
                      const std::vector<std::vector<double>>& matrix);

// Backbone-only PDB: ATOM records N/CA/C per residue, residues numbered from
// 1, occupancy 1.00, B-factor 0.00. The curve length must be divisible by 3.
void write_backbone_pdb(const std::filesystem::path& path, const Curve& curve,
                        char chain = 'A');

// FNV-1a 64-bit over the file bytes, as a hex string.
std::string file_hash(const std::filesystem::path& path);

}  // namespace protshape::io
