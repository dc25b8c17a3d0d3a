// Persistence: the SGPM binary matrix format, memory-mapped reads, CSV
// emission, and atomic file writes (temp file + rename).
//
// SGPM layout, little-endian:
//   bytes 0..3   magic "SGPM"
//   bytes 4..5   version (u16, currently 1)
//   byte  6      scalar kind (u8: 0 = f32, 1 = f64)
//   bytes 7..15  reserved, zero
//   bytes 16..23 rows (u64)
//   bytes 24..31 cols (u64)
//   bytes 32..   row-major payload
#pragma once

#include "seqgp/common.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace seqgp {

enum class ScalarKind : std::uint8_t { F32 = 0, F64 = 1 };

void write_matrix(const std::filesystem::path& path, const Matrix& mat,
                  ScalarKind kind = ScalarKind::F64);
Matrix read_matrix(const std::filesystem::path& path);

void write_vector(const std::filesystem::path& path, const Vector& vec,
                  ScalarKind kind = ScalarKind::F64);
Vector read_vector(const std::filesystem::path& path);

/// Read-only f64 matrix backed by a memory-mapped SGPM file.
class MappedMatrix {
 public:
  explicit MappedMatrix(const std::filesystem::path& path);
  ~MappedMatrix();
  MappedMatrix(const MappedMatrix&) = delete;
  MappedMatrix& operator=(const MappedMatrix&) = delete;

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  using Map = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  Map map() const { return Map(data_, rows_, cols_); }

 private:
  const double* data_ = nullptr;
  void* base_ = nullptr;
  std::size_t length_ = 0;
  Index rows_ = 0;
  Index cols_ = 0;
};

std::string format_g17(double v);

void atomic_write_text(const std::filesystem::path& path, const std::string& text);

/// CSV with one row per line; all doubles at full round-trip precision.
void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

/// Field over a grid as flat "index,value" rows.
void write_indexed_csv(const std::filesystem::path& path, const Vector& values);

/// Field over a 2D grid laid out as a value grid (rows x cols cells).
void write_grid_csv(const std::filesystem::path& path, const Vector& field, Index rows,
                    Index cols);

}  // namespace seqgp
