#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <fstream>
#include <random>

#include "lse/matrix_io.hpp"
#include "lse/types.hpp"
#include "test_support.hpp"

using lse_test::TempDir;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("binary matrix round-trip is bit-identical") {
  TempDir dir("mio");
  std::mt19937_64 rng(1);
  for (auto [r, c] : {std::pair<int, int>{1, 1}, {3, 5}, {7, 2}, {16, 16}}) {
    Eigen::MatrixXd m = lse_test::randn(rng, r, c);
    const auto path = dir.path / "m.lsem";
    lse::io::write_matrix(m, path);
    Eigen::MatrixXd back = lse::io::read_matrix(path);
    REQUIRE(lse_test::bit_identical(m, back));
  }
}

TEST_CASE("IEEE edge values survive the round-trip") {
  TempDir dir("mio_edge");
  Eigen::MatrixXd m(2, 2);
  m << -0.0, 1e-300, -1e308, 5e-324;
  const auto path = dir.path / "edge.lsem";
  lse::io::write_matrix(m, path);
  Eigen::MatrixXd back = lse::io::read_matrix(path);
  REQUIRE(lse_test::bit_identical(m, back));
  REQUIRE(std::signbit(back(0, 0)));
}

TEST_CASE("file layout: header fields and exact size") {
  TempDir dir("mio_layout");
  const auto path = dir.path / "one.lsem";
  Eigen::MatrixXd one(1, 1);
  one << 0.0;
  lse::io::write_matrix(one, path);
  REQUIRE(std::filesystem::file_size(path) == 24 + 8);  // header + one float64

  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3,
       4, 5, 6;
  const auto p2 = dir.path / "m.lsem";
  lse::io::write_matrix(m, p2);
  auto bytes = slurp(p2);
  REQUIRE(bytes.size() == 24 + 8 * 6);
  REQUIRE(std::memcmp(bytes.data(), "LSEM", 4) == 0);
  std::uint32_t version;
  std::uint64_t rows, cols;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&rows, bytes.data() + 8, 8);
  std::memcpy(&cols, bytes.data() + 16, 8);
  REQUIRE(version == 1);
  REQUIRE(rows == 2);
  REQUIRE(cols == 3);
  // Column-major payload: first value is (0,0), second is (1,0).
  double v0, v1;
  std::memcpy(&v0, bytes.data() + 24, 8);
  std::memcpy(&v1, bytes.data() + 32, 8);
  REQUIRE(v0 == 1.0);
  REQUIRE(v1 == 4.0);
}

TEST_CASE("binary header with known payload decodes to the stated matrix") {
  TempDir dir("mio_known");
  const auto path = dir.path / "k.lsem";
  std::vector<char> bytes;
  auto push = [&](const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  };
  push("LSEM", 4);
  std::uint32_t version = 1;
  std::uint64_t rows = 2, cols = 3;
  push(&version, 4);
  push(&rows, 8);
  push(&cols, 8);
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) push(&v, 8);
  spit(path, bytes);
  Eigen::MatrixXd m = lse::io::read_matrix(path);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  REQUIRE(m(0, 0) == 1.0);
  REQUIRE(m(1, 0) == 2.0);  // column-major
  REQUIRE(m(0, 1) == 3.0);
}

TEST_CASE("CSV import: rows are feature dimensions") {
  TempDir dir("mio_csv");
  const auto path = dir.path / "m.csv";
  std::ofstream(path) << "1.0,2.0\n3.0,4.0\n";
  Eigen::MatrixXd m = lse::io::read_matrix(path);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  REQUIRE(m(0, 0) == 1.0);
  REQUIRE(m(0, 1) == 2.0);
  REQUIRE(m(1, 0) == 3.0);
  REQUIRE(m(1, 1) == 4.0);
}

TEST_CASE("malformed inputs are rejected with context") {
  TempDir dir("mio_bad");

  SECTION("ragged CSV") {
    const auto path = dir.path / "ragged.csv";
    std::ofstream(path) << "1,2,3\n4,5\n";
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("value-count mismatch"));
  }
  SECTION("junk CSV token") {
    const auto path = dir.path / "junk.csv";
    std::ofstream(path) << "1,fish\n";
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("malformed value"));
  }
  SECTION("empty file") {
    const auto path = dir.path / "empty.csv";
    std::ofstream(path) << "";
    REQUIRE_THROWS_AS(lse::io::read_matrix(path), lse::ValidationError);
  }
  SECTION("truncated binary header") {
    const auto path = dir.path / "trunc.lsem";
    spit(path, {'L', 'S', 'E', 'M', 1, 0});
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("malformed header"));
  }
  SECTION("unsupported version") {
    const auto path = dir.path / "ver.lsem";
    std::vector<char> bytes(24, 0);
    std::memcpy(bytes.data(), "LSEM", 4);
    std::uint32_t version = 9;
    std::uint64_t one = 1;
    std::memcpy(bytes.data() + 4, &version, 4);
    std::memcpy(bytes.data() + 8, &one, 8);
    std::memcpy(bytes.data() + 16, &one, 8);
    spit(path, bytes);
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("unsupported version"));
  }
  SECTION("zero dimension") {
    const auto path = dir.path / "zero.lsem";
    std::vector<char> bytes(24, 0);
    std::memcpy(bytes.data(), "LSEM", 4);
    std::uint32_t version = 1;
    std::uint64_t zero = 0, one = 1;
    std::memcpy(bytes.data() + 4, &version, 4);
    std::memcpy(bytes.data() + 8, &zero, 8);
    std::memcpy(bytes.data() + 16, &one, 8);
    spit(path, bytes);
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("malformed header"));
  }
  SECTION("payload shorter than the header implies") {
    const auto path = dir.path / "short.lsem";
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    lse::io::write_matrix(m, path);
    auto bytes = slurp(path);
    bytes.resize(bytes.size() - 8);
    spit(path, bytes);
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("value-count mismatch"));
  }
  SECTION("trailing bytes after the payload") {
    const auto path = dir.path / "long.lsem";
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    lse::io::write_matrix(m, path);
    auto bytes = slurp(path);
    bytes.push_back('x');
    spit(path, bytes);
    REQUIRE_THROWS_WITH(lse::io::read_matrix(path),
                        Catch::Matchers::ContainsSubstring("value-count mismatch"));
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(lse::io::read_matrix(dir.path / "nope.lsem"), lse::IoError);
  }
}

TEST_CASE("load_matrix rejects non-finite entries with the first location") {
  TempDir dir("mio_nan");
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 2.0, std::nan(""), 4.0;
  const auto path = dir.path / "nan.lsem";
  lse::io::write_matrix(m, path);
  REQUIRE_THROWS_WITH(lse::load_matrix(path),
                      Catch::Matchers::ContainsSubstring("non-finite") &&
                          Catch::Matchers::ContainsSubstring("row 1, col 0"));
}

TEST_CASE("save_matrix/load_matrix round-trips a ModalityMatrix") {
  TempDir dir("mio_mm");
  std::mt19937_64 rng(3);
  lse::ModalityMatrix m;
  m.name = "vis";
  m.values = lse_test::randn(rng, 4, 6);
  const auto path = dir.path / "vis.lsem";
  lse::save_matrix(m, path);
  lse::ModalityMatrix back = lse::load_matrix(path, "vis");
  REQUIRE(back.name == "vis");
  REQUIRE(lse_test::bit_identical(m.values, back.values));
}
