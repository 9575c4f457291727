#ifndef LSE_MATRIX_IO_HPP
#define LSE_MATRIX_IO_HPP

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lse/errors.hpp"

namespace lse::io {

// On-disk matrix container, little-endian throughout:
//   "LSEM" (4 bytes) | version u32 = 1 | rows u64 | cols u64 |
//   rows*cols IEEE-754 float64, column-major.
// Total size = 24 + 8*rows*cols bytes.
inline constexpr char kMatrixMagic[4] = {'L', 'S', 'E', 'M'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::uint64_t kMatrixHeaderBytes = 24;

static_assert(std::endian::native == std::endian::little,
              "matrix files are little-endian; big-endian hosts are unsupported");
static_assert(sizeof(double) == 8);

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ValidationError("malformed value '" + std::string(tok) + "' at " + where);
  return v;
}

}  // namespace detail

/// Writes `m` in the binary matrix format. The output is bit-exact: reading
/// it back yields a bit-identical matrix.
inline void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(kMatrixMagic, 4);
  out.write(reinterpret_cast<const char*>(&kMatrixVersion), 4);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  // MatrixXd is column-major, matching the file layout.
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(8 * rows * cols));
  if (!out) throw IoError("write failed: " + path.string());
}

/// Parses dense CSV: one line per feature dimension, comma-separated float64,
/// no header. All lines must carry the same number of values.
inline Eigen::MatrixXd read_csv(std::istream& in, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    std::vector<double> vals;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = sv.find(',', start);
      std::string_view tok = detail::trim(
          sv.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                           : comma - start));
      vals.push_back(detail::parse_double(
          tok, name + ":" + std::to_string(lineno) + " column " +
                   std::to_string(vals.size() + 1)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && vals.size() != rows.front().size())
      throw ValidationError("value-count mismatch in " + name + ": line " +
                            std::to_string(lineno) + " has " +
                            std::to_string(vals.size()) + " values, expected " +
                            std::to_string(rows.front().size()));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ValidationError("empty matrix file: " + name);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

/// Reads a matrix file, sniffing the format by magic bytes: "LSEM" selects
/// the binary format, anything else is parsed as CSV.
inline Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  const bool is_binary =
      in.gcount() == 4 && std::memcmp(magic, kMatrixMagic, 4) == 0;
  if (!is_binary) {
    in.clear();
    in.seekg(0);
    return read_csv(in, path.string());
  }

  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  if (!in)
    throw ValidationError("malformed header (truncated): " + path.string());
  if (version != kMatrixVersion)
    throw ValidationError("malformed header (unsupported version " +
                          std::to_string(version) + "): " + path.string());
  constexpr std::uint64_t kDimCap = 1ull << 31;
  if (rows == 0 || cols == 0 || rows > kDimCap || cols > kDimCap ||
      rows * cols > (1ull << 40))
    throw ValidationError("malformed header (bad dimensions " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          "): " + path.string());

  const std::uint64_t expected = kMatrixHeaderBytes + 8 * rows * cols;
  const std::uint64_t actual = std::filesystem::file_size(path);
  if (actual != expected)
    throw ValidationError("value-count mismatch: " + path.string() + " holds " +
                          std::to_string(actual) + " bytes, header implies " +
                          std::to_string(expected));

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(8 * rows * cols));
  if (in.gcount() != static_cast<std::streamsize>(8 * rows * cols))
    throw IoError("short read: " + path.string());
  return m;
}

}  // namespace lse::io

#endif  // LSE_MATRIX_IO_HPP
