#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ptycho/block_vector.hpp"
#include "ptycho/recon.hpp"

namespace ptycho {

/// Binary tensor dump: 16-byte header (12-byte magic "PTYAF.TENSOR", u32
/// format version), then u32 little-endian dims (blocks, side, side,
/// complexity flag), then row-major float64 payload (re/im interleaved when
/// complex). Little-endian hosts assumed.
void write_tensor(const std::filesystem::path& path, const BlockVector& stack);
BlockVector read_tensor(const std::filesystem::path& path);

struct RealTensor {
  int count = 0;
  int side = 0;
  std::vector<double> values;
};

void write_real_tensor(const std::filesystem::path& path, std::span<const double> values, int count,
                       int side);
RealTensor read_real_tensor(const std::filesystem::path& path);

/// 8-bit binary portable graymap, min-max scaled.
void write_pgm(const std::filesystem::path& path, std::span<const double> values, int rows, int cols);

/// Grayscale panels (real, imaginary, magnitude per block) for a stack.
void export_stack_images(const std::filesystem::path& dir, const std::string& prefix,
                         const BlockVector& stack);

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);
RunTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace ptycho
