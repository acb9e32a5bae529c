#include "awdiff/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "awdiff/errors.hpp"

namespace awdiff {

namespace {

constexpr char kMagic[4] = {'A', 'W', 'T', '1'};

void put_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw CorruptionError("raw tensor: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw CorruptionError("raw tensor: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace

std::size_t RawTensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

void write_raw_tensor(std::ostream& out, const RawTensor& tensor) {
    if (tensor.dims.empty()) throw ParameterError("raw tensor: rank must be >= 1");
    if (tensor.values.size() != tensor.element_count())
        throw InvariantError("raw tensor: value count does not match dims");
    out.write(kMagic, 4);
    put_u32_le(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (auto d : tensor.dims) put_u32_le(out, d);
    for (double v : tensor.values) put_f64_le(out, v);
    if (!out) throw IoError("raw tensor: write failed");
}

RawTensor read_raw_tensor(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("raw tensor: bad magic (expected AWT1)");
    std::uint32_t rank = get_u32_le(in);
    if (rank == 0 || rank > 8) throw FormatError("raw tensor: unsupported rank " + std::to_string(rank));
    RawTensor t;
    t.dims.resize(rank);
    std::size_t count = 1;
    for (auto& d : t.dims) {
        d = get_u32_le(in);
        if (d == 0) throw FormatError("raw tensor: zero dimension");
        if (count > std::numeric_limits<std::size_t>::max() / d)
            throw FormatError("raw tensor: dimension overflow");
        count *= d;
    }
    t.values.resize(count);
    for (auto& v : t.values) v = get_f64_le(in);
    return t;
}

void write_raw_tensor(const std::string& path, const RawTensor& tensor) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    write_raw_tensor(out, tensor);
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

RawTensor read_raw_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    RawTensor t = read_raw_tensor(in);
    // A trailing byte means the file does not contain exactly one tensor.
    char extra;
    if (in.read(&extra, 1))
        throw CorruptionError("raw tensor: trailing bytes in " + path);
    return t;
}

} // namespace awdiff
