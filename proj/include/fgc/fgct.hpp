#pragma once

#include "fgc/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fgc {

// FGCT tensor file, all integers little-endian:
//   bytes 0-3  magic "FGCT"
//   u16        version (1)
//   u8         dtype code (1 = float32)
//   u8         ndim
//   ndim x u32 dims, outermost first
//   payload    row-major little-endian float32
// A 2-D grid is stored with dims [height, width].

inline constexpr std::uint16_t kFgctVersion = 1;
inline constexpr std::uint8_t kFgctFloat32 = 1;

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t element_count() const;
};

void write_fgct(std::ostream& out, const Tensor& tensor);
Tensor read_fgct(std::istream& in);

/// Grids are narrowed to float32 on write.
void write_fgct(const std::filesystem::path& path, const DensityGrid& grid);
void write_fgct(const std::filesystem::path& path, const BinaryGrid& grid);
DensityGrid read_fgct_grid(const std::filesystem::path& path);

Tensor to_tensor(const DensityGrid& grid);
DensityGrid to_grid(const Tensor& tensor);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fgc
