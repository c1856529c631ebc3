#pragma once

#include "becfocus/deposition.hpp"
#include "becfocus/gpe.hpp"

#include <cstdint>
#include <string>

namespace becfocus {

/// Binary grid files.
///
/// Header (native byte order, 112 bytes):
///   char[8]  magic "BECGRID"
///   uint32   format version (1)
///   uint32   endianness tag 0x01020304 as written by the producer
///   uint32   kind (1 complex 3D field, 2 real 2D map)
///   uint32   reserved (0)
///   int64[3] points per axis (n_z = 1 for 2D maps)
///   double[3] extents (m)
///   double[3] box centres (m)
///   double   time (s)
///   double   scale (speed for deposit maps, 1 otherwise)
/// followed by the samples in row-major order (last axis fastest): interleaved
/// re/im doubles for fields, doubles for maps. Readers byte-swap when the tag
/// reads 0x04030201.
inline constexpr std::uint32_t grid_format_version = 1;
inline constexpr std::uint32_t grid_endian_tag = 0x01020304;

enum class GridKind : std::uint32_t { ComplexField = 1, RealMap = 2 };

void write_field(const std::string& path, const ComplexField3D& field);
ComplexField3D read_field(const std::string& path);

/// Writes the raw (literal time-integral) deposit with the speed in the scale slot.
void write_deposit(const std::string& path, const DepositMap& map);
DepositMap read_deposit(const std::string& path);

/// x, y, n0 (atoms/m^2), raw (atoms s/m^3) rows.
void write_deposit_csv(const std::string& path, const DepositMap& map);

} // namespace becfocus
