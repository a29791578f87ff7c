#include "fm/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fm/error.hpp"

namespace fm {
namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreamble = 10;  // magic + version + header length

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }

float float_from_bits(std::uint32_t u) { return std::bit_cast<float>(u); }

void put_le32(std::uint8_t* dst, std::uint32_t v) {
  dst[0] = static_cast<std::uint8_t>(v);
  dst[1] = static_cast<std::uint8_t>(v >> 8);
  dst[2] = static_cast<std::uint8_t>(v >> 16);
  dst[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint32_t get_le32(const std::uint8_t* src) {
  return static_cast<std::uint32_t>(src[0]) |
         (static_cast<std::uint32_t>(src[1]) << 8) |
         (static_cast<std::uint32_t>(src[2]) << 16) |
         (static_cast<std::uint32_t>(src[3]) << 24);
}

// Minimal scanner over the Python-literal header dict.
class HeaderScanner {
 public:
  explicit HeaderScanner(std::string text) : text_(std::move(text)) {}

  NpyHeader parse() {
    NpyHeader h;
    bool have_descr = false, have_order = false, have_shape = false;
    skip_ws();
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') break;
      const std::string key = quoted();
      skip_ws();
      expect(':');
      skip_ws();
      if (key == "descr") {
        h.descr = quoted();
        have_descr = true;
      } else if (key == "fortran_order") {
        h.fortran_order = boolean();
        have_order = true;
      } else if (key == "shape") {
        h.shape = tuple();
        have_shape = true;
      } else {
        throw FormatError("unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      skip_ws();
      if (peek() != '}') throw FormatError("malformed header dict");
    }
    if (!have_descr || !have_order || !have_shape)
      throw FormatError("header missing descr, fortran_order or shape");
    return h;
  }

 private:
  char peek() const {
    if (pos_ >= text_.size()) throw FormatError("truncated header dict");
    return text_[pos_];
  }
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n'))
      ++pos_;
  }
  void expect(char c) {
    if (peek() != c)
      throw FormatError(std::string("malformed header: expected '") + c + "'");
    ++pos_;
  }
  std::string quoted() {
    const char q = peek();
    if (q != '\'' && q != '"') throw FormatError("malformed header: expected string");
    ++pos_;
    const auto end = text_.find(q, pos_);
    if (end == std::string::npos) throw FormatError("unterminated header string");
    std::string s = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return s;
  }
  bool boolean() {
    if (text_.compare(pos_, 4, "True") == 0) {
      pos_ += 4;
      return true;
    }
    if (text_.compare(pos_, 5, "False") == 0) {
      pos_ += 5;
      return false;
    }
    throw FormatError("malformed header: fortran_order must be True or False");
  }
  std::vector<std::int64_t> tuple() {
    std::vector<std::int64_t> dims;
    expect('(');
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        break;
      }
      std::int64_t v = 0;
      bool any = false;
      while (pos_ < text_.size() && text_[pos_] >= '0' && text_[pos_] <= '9') {
        v = v * 10 + (text_[pos_] - '0');
        if (v > (std::int64_t{1} << 40)) throw FormatError("shape dimension too large");
        ++pos_;
        any = true;
      }
      if (!any) throw FormatError("malformed shape tuple");
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
    }
    return dims;
  }

  std::string text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_npy(const RowMatrixF& m) {
  std::ostringstream dict;
  dict << "{'descr': '<f4', 'fortran_order': False, 'shape': (" << m.rows()
       << ", " << m.cols() << "), }";
  std::string header = dict.str();
  // Total preamble + header is padded to a multiple of 64 and ends in '\n'.
  const std::size_t unpadded = kPreamble + header.size() + 1;
  const std::size_t padded = (unpadded + 63) / 64 * 64;
  header.append(padded - unpadded, ' ');
  header.push_back('\n');

  const std::size_t count = static_cast<std::size_t>(m.size());
  std::vector<std::uint8_t> out(kPreamble + header.size() + 4 * count);
  std::memcpy(out.data(), kMagic, 6);
  out[6] = 1;
  out[7] = 0;
  out[8] = static_cast<std::uint8_t>(header.size() & 0xff);
  out[9] = static_cast<std::uint8_t>(header.size() >> 8);
  std::memcpy(out.data() + kPreamble, header.data(), header.size());

  std::uint8_t* payload = out.data() + kPreamble + header.size();
  const float* src = m.data();
  for (std::size_t i = 0; i < count; ++i) put_le32(payload + 4 * i, float_bits(src[i]));
  return out;
}

NpyHeader parse_npy_header(std::span<const std::uint8_t> bytes,
                           std::size_t* payload_offset) {
  if (bytes.size() < kPreamble || std::memcmp(bytes.data(), kMagic, 6) != 0)
    throw FormatError("bad magic: not an array file");
  if (bytes[6] != 1 || bytes[7] != 0)
    throw FormatError("unsupported format version " + std::to_string(bytes[6]) +
                      "." + std::to_string(bytes[7]));
  const std::size_t header_len =
      static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < kPreamble + header_len)
    throw FormatError("truncated header");

  std::string text(reinterpret_cast<const char*>(bytes.data() + kPreamble), header_len);
  NpyHeader h = HeaderScanner(std::move(text)).parse();
  if (h.descr != "<f4") throw FormatError("unsupported dtype '" + h.descr + "'");
  if (h.fortran_order) throw FormatError("unsupported order: fortran_order is True");
  if (h.shape.size() != 2)
    throw FormatError("unsupported shape rank " + std::to_string(h.shape.size()));
  if (payload_offset) *payload_offset = kPreamble + header_len;
  return h;
}

RowMatrixF decode_npy(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  const NpyHeader h = parse_npy_header(bytes, &offset);
  const auto rows = h.shape[0];
  const auto cols = h.shape[1];
  const auto count = static_cast<std::size_t>(rows * cols);
  if (bytes.size() - offset != 4 * count)
    throw FormatError("payload size " + std::to_string(bytes.size() - offset) +
                      " does not match shape (" + std::to_string(rows) + ", " +
                      std::to_string(cols) + ")");
  RowMatrixF m(rows, cols);
  float* dst = m.data();
  for (std::size_t i = 0; i < count; ++i)
    dst[i] = float_from_bits(get_le32(bytes.data() + offset + 4 * i));
  return m;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  errno = 0;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open", path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw_io("read failed", path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  errno = 0;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_io("write failed", path.string());
}

void write_npy(const std::filesystem::path& path, const RowMatrixF& m) {
  write_file_bytes(path, encode_npy(m));
}

RowMatrixF read_npy(const std::filesystem::path& path) {
  return decode_npy(read_file_bytes(path));
}

}  // namespace fm
