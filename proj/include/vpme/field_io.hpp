#pragma once

// Binary field snapshots.
//
// Layout (little-endian):
//   char[8]   magic "VPMEFLD1"
//   uint32    components (1 = scalar, 3 = vector)
//   uint32    nodes per axis N
//   float64   half width L
//   float64   spacing h
//   uint32    name length n
//   char[n]   field name (no terminator)
//   float64[N³ · components]  values, x index fastest, then y, then z;
//                             vector components interleaved (x, y, z)

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "mesh.hpp"

namespace vpme {

static_assert(std::endian::native == std::endian::little, "snapshot format assumes a little-endian host");

inline constexpr char snapshot_magic[8] = {'V', 'P', 'M', 'E', 'F', 'L', 'D', '1'};

struct FieldSnapshot {
    std::string name;
    GridSpec grid;
    std::uint32_t components = 1;
    std::vector<double> data;
};

namespace detail {

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw SchemaError("truncated field snapshot header");
    return v;
}

inline void write_snapshot_raw(const std::string& path, const std::string& name, const GridSpec& g,
                               std::uint32_t components, const double* data, std::size_t count) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open snapshot for writing: " + path);
    os.write(snapshot_magic, sizeof snapshot_magic);
    put(os, components);
    put(os, static_cast<std::uint32_t>(g.nodes));
    put(os, g.half_width);
    put(os, g.spacing());
    put(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!os) throw std::runtime_error("failed writing snapshot: " + path);
}

}  // namespace detail

inline void write_snapshot(const std::string& path, const std::string& name, const ScalarField& f) {
    detail::write_snapshot_raw(path, name, f.grid, 1, f.values.data(), f.values.size());
}

inline void write_snapshot(const std::string& path, const std::string& name, const VectorField& f) {
    static_assert(sizeof(Vec3) == 3 * sizeof(double));
    detail::write_snapshot_raw(path, name, f.grid, 3, &f.values.data()->x, 3 * f.values.size());
}

inline FieldSnapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open snapshot: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, snapshot_magic, 8) != 0)
        throw SchemaError("not a field snapshot (bad magic): " + path);
    FieldSnapshot s;
    s.components = detail::get<std::uint32_t>(is);
    s.grid.nodes = static_cast<int>(detail::get<std::uint32_t>(is));
    s.grid.half_width = detail::get<double>(is);
    (void)detail::get<double>(is);  // spacing is derived from (L, N)
    const auto len = detail::get<std::uint32_t>(is);
    s.name.resize(len);
    if (!is.read(s.name.data(), len)) throw SchemaError("truncated field snapshot name");
    if (s.components != 1 && s.components != 3) throw SchemaError("snapshot has invalid component count");
    s.data.resize(s.grid.node_count() * s.components);
    if (!is.read(reinterpret_cast<char*>(s.data.data()), static_cast<std::streamsize>(s.data.size() * sizeof(double))))
        throw SchemaError("truncated field snapshot payload: " + path);
    return s;
}

}  // namespace vpme
