#include "cim/matrix_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "cim/errors.hpp"

namespace cim::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary matrix I/O assumes a little-endian host");

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw IoError("matrix file: truncated header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

}  // namespace

monarch::DenseMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open matrix file " + path.string());
  const auto rows = read_u64(in);
  const auto cols = read_u64(in);
  if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
    throw IoError("matrix file: implausible shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<double> data(rows * cols);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
    throw IoError("matrix file: truncated payload in " + path.string());
  }
  return monarch::DenseMatrix(rows, cols, std::move(data));
}

void write_matrix(const std::filesystem::path& path, const monarch::DenseMatrix& W) {
  std::string bytes;
  {
    std::ostringstream out(std::ios::binary);
    write_u64(out, W.rows());
    write_u64(out, W.cols());
    out.write(reinterpret_cast<const char*>(W.data().data()),
              static_cast<std::streamsize>(W.data().size() * sizeof(double)));
    bytes = out.str();
  }
  write_atomic(path, bytes);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace cim::io
