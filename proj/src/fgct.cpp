#include "fgc/fgct.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fgc {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'C', 'T'};

template <class T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out += static_cast<char>(u & 0xFF);
        u = static_cast<U>(u >> 8);
    }
}

template <class T>
T get_le(const unsigned char* p) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i);
    return static_cast<T>(u);
}

std::string encode(const Tensor& tensor) {
    if (tensor.dims.size() > 255) throw InputError("FGCT supports at most 255 dimensions");
    if (tensor.values.size() != tensor.element_count()) throw InputError("FGCT payload does not match dims");
    std::string out(kMagic, 4);
    put_le<std::uint16_t>(out, kFgctVersion);
    out += static_cast<char>(kFgctFloat32);
    out += static_cast<char>(tensor.dims.size());
    for (auto d : tensor.dims) put_le<std::uint32_t>(out, d);
    out.reserve(out.size() + 4 * tensor.values.size());
    for (float v : tensor.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void write_fgct(std::ostream& out, const Tensor& tensor) {
    const std::string bytes = encode(tensor);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("FGCT write failed");
}

Tensor read_fgct(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = std::move(ss).str();
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 8 || std::memcmp(p, kMagic, 4) != 0) throw InputError("not an FGCT file");
    const auto version = get_le<std::uint16_t>(p + 4);
    if (version != kFgctVersion) throw InputError("unsupported FGCT version " + std::to_string(version));
    if (p[6] != kFgctFloat32) throw InputError("unsupported FGCT dtype " + std::to_string(p[6]));
    const std::size_t ndim = p[7];
    std::size_t pos = 8;
    if (bytes.size() < pos + 4 * ndim) throw InputError("truncated FGCT header");
    Tensor t;
    for (std::size_t i = 0; i < ndim; ++i, pos += 4) t.dims.push_back(get_le<std::uint32_t>(p + pos));
    const std::size_t n = t.element_count();
    if (bytes.size() != pos + 4 * n) throw InputError("FGCT payload size mismatch");
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i, pos += 4) t.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + pos));
    return t;
}

Tensor to_tensor(const DensityGrid& grid) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())};
    t.values.reserve(grid.size());
    for (double v : grid.values()) t.values.push_back(static_cast<float>(v));
    return t;
}

DensityGrid to_grid(const Tensor& tensor) {
    if (tensor.dims.size() != 2) throw InputError("expected a 2-D FGCT tensor");
    DensityGrid g(static_cast<int>(tensor.dims[1]), static_cast<int>(tensor.dims[0]));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = tensor.values[i];
    return g;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw InputError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_fgct(const std::filesystem::path& path, const DensityGrid& grid) {
    write_file_atomic(path, encode(to_tensor(grid)));
}

void write_fgct(const std::filesystem::path& path, const BinaryGrid& grid) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(grid.height()), static_cast<std::uint32_t>(grid.width())};
    t.values.reserve(grid.size());
    for (auto v : grid.values()) t.values.push_back(v ? 1.0f : 0.0f);
    write_file_atomic(path, encode(t));
}

DensityGrid read_fgct_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return to_grid(read_fgct(in));
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace fgc
