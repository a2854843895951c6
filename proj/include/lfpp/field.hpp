#ifndef LFPP_FIELD_HPP
#define LFPP_FIELD_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/crc.hpp>

#include "errors.hpp"
#include "lattice.hpp"

namespace lfpp {

enum class FieldKind : std::uint8_t {
    CoarseDGFF = 0,
    FineDGFF = 1,
    CoupledFine = 2,
    CircleAverage = 3,
};

inline std::string_view to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::CoarseDGFF: return "coarse-dgff";
        case FieldKind::FineDGFF: return "fine-dgff";
        case FieldKind::CoupledFine: return "coupled-fine";
        case FieldKind::CircleAverage: return "circle-average";
    }
    return "unknown";
}

/// Values of a field on {0..n}^2, row-major (index = y*(n+1) + x).
///
/// `n` is the scale of the array itself. Fine-mesh fields carry the
/// refinement `m` they were built with, so their coarse scale is n/m.
/// Circle-average fields live on the coarse lattice and record the m of the
/// coupling that produced them.
struct FieldSample {
    int n = 0;
    int m = 1;
    FieldKind kind = FieldKind::CoarseDGFF;
    std::uint64_t seed = 0;
    std::vector<double> values;

    FieldSample() = default;
    FieldSample(int n_, int m_, FieldKind kind_, std::uint64_t seed_)
        : n(n_), m(m_), kind(kind_), seed(seed_), values(vertex_count(n_), 0.0) {}

    double& at(int x, int y) { return values[vertex_index(n, x, y)]; }
    double at(int x, int y) const { return values[vertex_index(n, x, y)]; }
    double at(LatticePoint p) const { return at(p.x, p.y); }

    bool is_fine() const noexcept { return kind == FieldKind::FineDGFF || kind == FieldKind::CoupledFine; }
    int coarse_scale() const noexcept { return is_fine() ? n / m : n; }

    friend bool operator==(const FieldSample&, const FieldSample&) = default;
};

inline constexpr std::string_view kSnapshotMagic = "LFPPFLD1";
inline constexpr std::string_view kSnapshotFamily = "LFPPFLD";

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename T>
T get_le(std::span<const unsigned char> in, std::size_t& pos) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    if (pos + sizeof(T) > in.size()) throw FormatError("field snapshot truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(in[pos + i]) << (8 * i));
    pos += sizeof(T);
    return std::bit_cast<T>(bits);
}

}  // namespace detail

/// Snapshot layout: magic "LFPPFLD1", u32 n, u32 m, u8 kind, u64 seed,
/// then (n+1)^2 little-endian float64 values, row-major.
inline std::vector<unsigned char> encode_snapshot(const FieldSample& field) {
    if (field.values.size() != vertex_count(field.n)) throw InvalidArgument("field array length does not match n");
    std::vector<unsigned char> out(kSnapshotMagic.begin(), kSnapshotMagic.end());
    out.reserve(8 + 4 + 4 + 1 + 8 + 8 * field.values.size());
    detail::put_le(out, static_cast<std::uint32_t>(field.n));
    detail::put_le(out, static_cast<std::uint32_t>(field.m));
    detail::put_le(out, static_cast<std::uint8_t>(field.kind));
    detail::put_le(out, field.seed);
    for (double v : field.values) detail::put_le(out, v);
    return out;
}

inline FieldSample decode_snapshot(std::span<const unsigned char> bytes) {
    if (bytes.size() < kSnapshotMagic.size()) throw FormatError("not a field snapshot (too short)");
    const std::string_view magic(reinterpret_cast<const char*>(bytes.data()), kSnapshotMagic.size());
    if (magic != kSnapshotMagic) {
        if (magic.substr(0, kSnapshotFamily.size()) == kSnapshotFamily) {
            throw FormatError("unsupported field snapshot version '" + std::string(magic) + "' (expected '" +
                              std::string(kSnapshotMagic) + "')");
        }
        throw FormatError("not a field snapshot (bad magic)");
    }
    std::size_t pos = kSnapshotMagic.size();
    FieldSample field;
    field.n = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
    field.m = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
    const auto kind = detail::get_le<std::uint8_t>(bytes, pos);
    if (kind > static_cast<std::uint8_t>(FieldKind::CircleAverage)) throw FormatError("unknown field kind tag");
    field.kind = static_cast<FieldKind>(kind);
    field.seed = detail::get_le<std::uint64_t>(bytes, pos);
    if (field.n < 1 || field.n > 65536 || field.m < 1) throw FormatError("field snapshot has invalid n or m");
    const std::size_t count = vertex_count(field.n);
    if (bytes.size() - pos != 8 * count) throw FormatError("field snapshot payload size does not match n");
    field.values.resize(count);
    for (auto& v : field.values) v = detail::get_le<double>(bytes, pos);
    return field;
}

inline void write_snapshot(const std::string& path, const FieldSample& field) {
    const auto bytes = encode_snapshot(field);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path + "'");
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline FieldSample read_snapshot(const std::string& path) { return decode_snapshot(read_file_bytes(path)); }

inline std::uint32_t crc32(std::span<const unsigned char> bytes) {
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

/// CRC-32 of the snapshot encoding; identical fields give identical checksums.
inline std::uint32_t checksum(const FieldSample& field) { return crc32(encode_snapshot(field)); }

}  // namespace lfpp

#endif  // LFPP_FIELD_HPP
