#include "specembed/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "specembed/errors.hpp"

namespace specembed {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'T', 'F'};
constexpr std::uint8_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::string bytes)
      : path_(path.string()), bytes_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  const char* take(std::size_t n, const char* what) {
    if (remaining() < n) {
      fail(std::string("truncated file: need ") + std::to_string(n) + " bytes for " + what +
           ", have " + std::to_string(remaining()));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint8_t u8(const char* what) {
    return static_cast<std::uint8_t>(*take(1, what));
  }

  std::uint16_t u16(const char* what) {
    const char* p = take(2, what);
    return static_cast<std::uint16_t>(static_cast<std::uint8_t>(p[0]) |
                                      (static_cast<std::uint8_t>(p[1]) << 8));
  }

  std::uint32_t u32(const char* what) {
    const char* p = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(path_ + ": " + msg + " at offset " + std::to_string(pos_));
  }

 private:
  std::string path_;
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  if (t.empty()) throw ParamError("write_tensor: tensor is empty");
  if (t.rank() > std::numeric_limits<std::uint16_t>::max()) {
    throw ParamError("write_tensor: rank exceeds uint16");
  }
  std::string buf;
  buf.reserve(8 + 4 * t.rank() + t.size() * 8);
  buf.append(kMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  buf.push_back(static_cast<char>(dtype));
  put_u16(buf, static_cast<std::uint16_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw ParamError("write_tensor: dim exceeds uint32");
    }
    put_u32(buf, static_cast<std::uint32_t>(d));
  }
  if (dtype == DType::f64) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      put_u64(buf, std::bit_cast<std::uint64_t>(t[i]));
    }
  } else {
    for (std::size_t i = 0; i < t.size(); ++i) {
      put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(t[i])));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path, DType* dtype_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(path, std::move(bytes));

  const char* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic at offset 0 (expected \"MMTF\")");
  }
  const std::uint8_t version = r.u8("version");
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version) +
                      " at offset 4");
  }
  const std::uint8_t dtype_byte = r.u8("dtype");
  if (dtype_byte > 1) {
    throw FormatError(path.string() + ": unknown dtype " + std::to_string(dtype_byte) +
                      " at offset 5");
  }
  const DType dtype = static_cast<DType>(dtype_byte);
  const std::uint16_t rank = r.u16("rank");
  if (rank == 0) {
    throw FormatError(path.string() + ": rank must be >= 1 at offset 6");
  }

  std::vector<std::size_t> dims(rank);
  std::uint64_t count = 1;
  for (std::uint16_t i = 0; i < rank; ++i) {
    const std::size_t dim_offset = r.offset();
    const std::uint32_t d = r.u32("dim");
    if (d == 0) {
      throw FormatError(path.string() + ": zero dim at offset " + std::to_string(dim_offset));
    }
    count *= d;
    if (count > (std::uint64_t{1} << 40)) {
      throw FormatError(path.string() + ": dim product overflow at offset " +
                        std::to_string(dim_offset));
    }
    dims[i] = d;
  }

  const std::size_t width = dtype == DType::f64 ? 8 : 4;
  const std::uint64_t payload = count * width;
  if (r.remaining() != payload) {
    r.fail("payload length mismatch: expected " + std::to_string(payload) + " bytes, have " +
           std::to_string(r.remaining()));
  }

  Tensor t(dims);
  if (dtype == DType::f64) {
    const char* p = r.take(static_cast<std::size_t>(payload), "payload");
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(p[i * 8 + b])) << (8 * b);
      }
      t[i] = std::bit_cast<double>(bits);
    }
  } else {
    const char* p = r.take(static_cast<std::size_t>(payload), "payload");
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i * 4 + b])) << (8 * b);
      }
      t[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  if (dtype_out) *dtype_out = dtype;
  return t;
}

}  // namespace specembed
