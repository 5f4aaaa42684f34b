#pragma once

#include "fgc/types.hpp"

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgc {

/// Dense row-major 2-D grid; element (x, y) lives at y * width + x.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width < 0 || height < 0) throw InputError("negative grid dimensions");
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    bool same_shape(const Grid& other) const { return width_ == other.width_ && height_ == other.height_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using DensityGrid = Grid<double>;
/// 0/1 grids: background channel and unknown-region masks.
using BinaryGrid = Grid<std::uint8_t>;

/// Fixed-order sum of all cells.
inline double integral(const DensityGrid& g) {
    return std::accumulate(g.values().begin(), g.values().end(), 0.0);
}

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw InputError(std::string("grid dimension mismatch: ") + what + " (" +
                                    std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                                    std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
    }
}

}  // namespace fgc
