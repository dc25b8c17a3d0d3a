#include "seqgp/io.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace seqgp {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'P', 'M'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 32;

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::string encode_header(ScalarKind kind, std::uint64_t rows, std::uint64_t cols) {
  std::string h;
  h.reserve(kHeaderBytes);
  h.append(kMagic, 4);
  put_u16le(h, kVersion);
  h.push_back(static_cast<char>(kind));
  h.append(9, '\0');
  put_u64le(h, rows);
  put_u64le(h, cols);
  return h;
}

struct Header {
  ScalarKind kind;
  std::uint64_t rows, cols;
};

Header decode_header(const unsigned char* p, const std::filesystem::path& path) {
  if (std::memcmp(p, kMagic, 4) != 0)
    throw ConfigError("not an SGPM matrix file: " + path.string());
  const std::uint16_t version = static_cast<std::uint16_t>(p[4]) | (static_cast<std::uint16_t>(p[5]) << 8);
  if (version != kVersion)
    throw ConfigError("unsupported SGPM version in " + path.string());
  if (p[6] > 1) throw ConfigError("unknown scalar kind in " + path.string());
  return Header{static_cast<ScalarKind>(p[6]), get_u64le(p + 16), get_u64le(p + 24)};
}

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
  return path.parent_path() / (path.filename().string() + ".tmp." + std::to_string(::getpid()));
}

void commit(const std::filesystem::path& tmp, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ConfigError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_payload(std::ofstream& out, const Matrix& mat, ScalarKind kind) {
  // Row-major payload regardless of Eigen's internal layout.
  if (kind == ScalarKind::F64) {
    std::vector<double> row(mat.cols());
    for (Index i = 0; i < mat.rows(); ++i) {
      for (Index j = 0; j < mat.cols(); ++j) row[static_cast<std::size_t>(j)] = mat(i, j);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  } else {
    std::vector<float> row(mat.cols());
    for (Index i = 0; i < mat.rows(); ++i) {
      for (Index j = 0; j < mat.cols(); ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(mat(i, j));
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
  }
}

}  // namespace

void write_matrix(const std::filesystem::path& path, const Matrix& mat, ScalarKind kind) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    const std::string header = encode_header(kind, static_cast<std::uint64_t>(mat.rows()),
                                             static_cast<std::uint64_t>(mat.cols()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_payload(out, mat, kind);
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw ConfigError("write failed for " + path.string());
    }
  }
  commit(tmp, path);
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  unsigned char header[kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (!in) throw ConfigError("truncated SGPM header in " + path.string());
  const Header h = decode_header(header, path);
  Matrix mat(static_cast<Index>(h.rows), static_cast<Index>(h.cols));
  if (h.kind == ScalarKind::F64) {
    std::vector<double> row(h.cols);
    for (std::uint64_t i = 0; i < h.rows; ++i) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
      for (std::uint64_t j = 0; j < h.cols; ++j)
        mat(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
    }
  } else {
    std::vector<float> row(h.cols);
    for (std::uint64_t i = 0; i < h.rows; ++i) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
      for (std::uint64_t j = 0; j < h.cols; ++j)
        mat(static_cast<Index>(i), static_cast<Index>(j)) = row[j];
    }
  }
  if (!in) throw ConfigError("truncated SGPM payload in " + path.string());
  return mat;
}

void write_vector(const std::filesystem::path& path, const Vector& vec, ScalarKind kind) {
  write_matrix(path, vec, kind);
}

Vector read_vector(const std::filesystem::path& path) {
  const Matrix m = read_matrix(path);
  if (m.cols() != 1) throw ConfigError(path.string() + " does not hold a column vector");
  return m.col(0);
}

MappedMatrix::MappedMatrix(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw ConfigError("cannot open " + path.string());
  struct stat st{};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw ConfigError("cannot stat " + path.string());
  }
  length_ = static_cast<std::size_t>(st.st_size);
  base_ = ::mmap(nullptr, length_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (base_ == MAP_FAILED) {
    base_ = nullptr;
    throw ConfigError("cannot map " + path.string());
  }
  const auto* p = static_cast<const unsigned char*>(base_);
  const Header h = decode_header(p, path);
  if (h.kind != ScalarKind::F64)
    throw ConfigError("mapped matrices must be f64: " + path.string());
  if (length_ < kHeaderBytes + h.rows * h.cols * sizeof(double))
    throw ConfigError("truncated SGPM payload in " + path.string());
  rows_ = static_cast<Index>(h.rows);
  cols_ = static_cast<Index>(h.cols);
  data_ = reinterpret_cast<const double*>(p + kHeaderBytes);
}

MappedMatrix::~MappedMatrix() {
  if (base_ != nullptr) ::munmap(base_, length_);
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = temp_sibling(path);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw ConfigError("write failed for " + path.string());
    }
  }
  commit(tmp, path);
}

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  if (!header.empty()) out << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << format_g17(row[i]);
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

void write_indexed_csv(const std::filesystem::path& path, const Vector& values) {
  std::ostringstream out;
  out << "index,value\n";
  for (Index i = 0; i < values.size(); ++i) out << i << ',' << format_g17(values[i]) << '\n';
  atomic_write_text(path, out.str());
}

void write_grid_csv(const std::filesystem::path& path, const Vector& field, Index rows,
                    Index cols) {
  if (field.size() != rows * cols) throw ConfigError("write_grid_csv: size mismatch");
  std::ostringstream out;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (j > 0) out << ',';
      out << format_g17(field[i * cols + j]);
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

}  // namespace seqgp
