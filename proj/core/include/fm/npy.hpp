#pragma once

// Reader/writer for the v1.0 array-file format, restricted to 2-D
// little-endian float32 arrays in C order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fm {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::int64_t> shape;
};

// Encodes the full file image (preamble, padded header, payload).
std::vector<std::uint8_t> encode_npy(const RowMatrixF& m);

// Parses and checks the preamble and header only. Throws FormatError.
NpyHeader parse_npy_header(std::span<const std::uint8_t> bytes,
                           std::size_t* payload_offset);

// Decodes a complete file image. Header fields are verified before any
// payload byte is touched. Does not check finiteness.
RowMatrixF decode_npy(std::span<const std::uint8_t> bytes);

void write_npy(const std::filesystem::path& path, const RowMatrixF& m);
RowMatrixF read_npy(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace fm
