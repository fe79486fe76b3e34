#pragma once

#include <cstdint>
#include <filesystem>

#include "specembed/tensor.hpp"

namespace specembed {

// On-disk tensor layout (all little-endian):
//   offset 0:  magic "MMTF" (4 bytes)
//   offset 4:  version, 1 byte = 1
//   offset 5:  dtype, 1 byte (0 = float32, 1 = float64)
//   offset 6:  rank, uint16
//   offset 8:  dims, rank x uint32
//   then:      row-major payload, product(dims) * dtype width bytes
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

void write_tensor(const std::filesystem::path& path, const Tensor& t,
                  DType dtype = DType::f64);

// Reads any valid tensor file; float32 payloads widen to double in memory.
// Malformed input raises FormatError naming the byte offset.
Tensor read_tensor(const std::filesystem::path& path, DType* dtype_out = nullptr);

}  // namespace specembed
