#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace awdiff {

/// Raw tensor file format used for images, pyramids and parameter blobs:
///   magic "AWT1", little-endian u32 rank, u32 dims[rank],
///   then prod(dims) little-endian IEEE-754 doubles.
struct RawTensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;

    std::size_t element_count() const;
};

void write_raw_tensor(const std::string& path, const RawTensor& tensor);
RawTensor read_raw_tensor(const std::string& path);

// Stream variants so several tensors can share one file (parameter blobs).
void write_raw_tensor(std::ostream& out, const RawTensor& tensor);
RawTensor read_raw_tensor(std::istream& in);

} // namespace awdiff
