#pragma once

#include "ustab/market.hpp"

#include <iosfwd>
#include <string>

namespace ustab {

// Columnar binary cache, little-endian:
//   "USTB" | u32 version | u32 steps | u64 paths | u64 seed | f64 horizon |
//   f64 rho | u8 has_params [f64 mu kappa theta sigma v0 rho horizon] |
//   u32 field_count | per field: u8 name_len, name, u32 columns |
//   per field: paths * columns f64, row-major.
inline constexpr std::uint32_t kBundleFormatVersion = 1;

void write_bundle(std::ostream& out, const PathBundle& bundle);
PathBundle read_bundle(std::istream& in);
void write_bundle_file(const std::string& path, const PathBundle& bundle);
PathBundle read_bundle_file(const std::string& path);

// path,B_T,W_T,V_T,S_T,Z_T with 17 significant digits.
void export_terminals_csv(std::ostream& out, const PathBundle& bundle);

}  // namespace ustab
