#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "streamtile/core.hpp"

namespace streamtile {

static_assert(std::endian::native == std::endian::little,
              "matrix file format assumes a little-endian host");

// Binary matrix format: magic "MFLW", u32 version, u64 rows, u64 cols,
// then row-major float64 little-endian payload.
inline constexpr char kMatrixMagic[4] = {'M', 'F', 'L', 'W'};
inline constexpr std::uint32_t kMatrixVersion = 1;

inline void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("save_matrix: cannot open " + path);
  out.write(kMatrixMagic, 4);
  const std::uint32_t version = kMatrixVersion;
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!out) throw data_error("save_matrix: write failed for " + path);
}

inline Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("load_matrix: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || std::memcmp(magic, kMatrixMagic, 4) != 0)
    throw format_error("load_matrix: bad magic in " + path);
  if (version != kMatrixVersion)
    throw format_error("load_matrix: unsupported version in " + path);
  if (rows == 0 || cols == 0 || rows > (1ull << 31) || cols > (1ull << 31) ||
      rows * cols > (1ull << 40))
    throw format_error("load_matrix: implausible shape in " + path);

  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t expected = 4 + 4 + 8 + 8 + sizeof(double) * rows * cols;
  if (file_size != expected)
    throw format_error("load_matrix: header shape does not match payload size");
  in.seekg(4 + 4 + 8 + 8, std::ios::beg);

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm(static_cast<Index>(rows), static_cast<Index>(cols));
  in.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw format_error("load_matrix: truncated payload in " + path);
  return rm;
}

// CSV alternative: header "dim0,dim1,...", one sample per row. The returned
// matrix has dimensions on rows and samples on columns, matching the binary
// format's use as a D x steps stream.
inline void save_csv(const std::string& path, const Matrix& dims_by_steps) {
  std::ofstream out(path);
  if (!out) throw data_error("save_csv: cannot open " + path);
  const Index d = dims_by_steps.rows();
  for (Index i = 0; i < d; ++i) out << (i ? "," : "") << "dim" << i;
  out << "\n";
  char buf[64];
  for (Index t = 0; t < dims_by_steps.cols(); ++t) {
    for (Index i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", dims_by_steps(i, t));
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

inline Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw format_error("load_csv: empty file " + path);

  std::vector<std::vector<double>> samples;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw format_error("load_csv: non-numeric cell in " + path);
      }
    }
    if (!samples.empty() && row.size() != samples.front().size())
      throw format_error("load_csv: ragged rows in " + path);
    samples.push_back(std::move(row));
  }
  if (samples.empty()) throw format_error("load_csv: no data rows in " + path);

  const Index d = static_cast<Index>(samples.front().size());
  Matrix m(d, static_cast<Index>(samples.size()));
  for (Index t = 0; t < m.cols(); ++t)
    for (Index i = 0; i < d; ++i)
      m(i, t) = samples[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
  return m;
}

// Loads either format based on the magic bytes.
inline Matrix load_matrix_any(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw data_error("load_matrix_any: cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, kMatrixMagic, 4) == 0) return load_matrix(path);
  return load_csv(path);
}

// Single-consumer iteration over consecutive column blocks; the last block
// may be short.
class BlockStream {
 public:
  BlockStream(const Matrix& m, Index block_size) : m_(m), block_(block_size) {
    require(block_size >= 1, "BlockStream: block size must be >= 1");
  }

  bool next(Matrix& out) {
    if (pos_ >= m_.cols()) return false;
    const Index width = std::min(block_, m_.cols() - pos_);
    out = m_.middleCols(pos_, width);
    pos_ += width;
    return true;
  }

  void reset() { pos_ = 0; }

 private:
  const Matrix& m_;
  Index block_;
  Index pos_ = 0;
};

}  // namespace streamtile
