#pragma once

#include "fpimpute/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace fpimpute::nn {

// Network checkpoint layout (host byte order, doubles stored raw so the
// round trip is bit-exact):
//   "FPMLP\0\0\0"  u32 version  u32 n_sizes  i32 sizes[n_sizes]
//   u8 activation[n_sizes - 1]
//   f64 weights, row-major, layer by layer
//   f64 biases, layer by layer
inline constexpr std::uint32_t kMlpFormatVersion = 1;

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

void save_mlp(const std::filesystem::path& path, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& path);

namespace io {
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);
}  // namespace io

}  // namespace fpimpute::nn
