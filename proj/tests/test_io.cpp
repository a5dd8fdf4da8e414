#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "streamtile/checkpoint.hpp"
#include "streamtile/matrix_io.hpp"

using namespace streamtile;
using namespace streamtile::testing;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("binary matrix files round-trip bit-exactly") {
  std::mt19937_64 rng(101);
  Matrix m = random_matrix(7, 13, rng);
  m(0, 0) = 1e-300;
  m(6, 12) = -1.2345678901234567e10;
  const std::string path = temp_path("roundtrip.mflw");
  save_matrix(path, m);
  Matrix back = load_matrix(path);
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  REQUIRE((back - m).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("malformed matrix files are rejected") {
  const std::string path = temp_path("malformed.mflw");

  SECTION("bad magic") {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE garbage";
    out.close();
    REQUIRE_THROWS_AS(load_matrix(path), format_error);
  }

  SECTION("header/payload size mismatch") {
    std::mt19937_64 rng(102);
    save_matrix(path, random_matrix(4, 4, rng));
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    REQUIRE_THROWS_AS(load_matrix(path), format_error);
  }

  std::remove(path.c_str());
}

TEST_CASE("block stream yields consecutive column blocks") {
  std::mt19937_64 rng(103);
  Matrix m = random_matrix(3, 10, rng);

  SECTION("single block when the size covers everything") {
    BlockStream stream(m, 10);
    Matrix block;
    REQUIRE(stream.next(block));
    REQUIRE((block - m).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE_FALSE(stream.next(block));
  }

  SECTION("short final block") {
    BlockStream stream(m, 4);
    Matrix block;
    Index total = 0;
    std::vector<Index> widths;
    while (stream.next(block)) {
      REQUIRE((block - m.middleCols(total, block.cols())).cwiseAbs().maxCoeff() == 0.0);
      widths.push_back(block.cols());
      total += block.cols();
    }
    REQUIRE(total == 10);
    REQUIRE(widths == std::vector<Index>{4, 4, 2});
  }
}

TEST_CASE("csv and binary loaders agree") {
  std::mt19937_64 rng(104);
  Matrix m = random_matrix(4, 25, rng);
  const std::string bin = temp_path("agree.mflw");
  const std::string csv = temp_path("agree.csv");
  save_matrix(bin, m);
  save_csv(csv, m);

  Matrix from_bin = load_matrix_any(bin);
  Matrix from_csv = load_matrix_any(csv);
  REQUIRE(from_csv.rows() == from_bin.rows());
  REQUIRE(from_csv.cols() == from_bin.cols());
  REQUIRE((from_csv - from_bin).cwiseAbs().maxCoeff() < 1e-15);

  std::remove(bin.c_str());
  std::remove(csv.c_str());
}

TEST_CASE("checkpoints restore the exact model state") {
  std::mt19937_64 rng(105);
  TilingModel model = make_model(6, 2, 106, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < 40; ++i) model.observe(random_vector(2, rng));

  const std::string path = temp_path("model.ckpt");
  save_checkpoint(path, model);
  TilingModel restored = load_checkpoint(path);

  REQUIRE((restored.params().mu - model.params().mu).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((restored.params().logits - model.params().logits).cwiseAbs().maxCoeff() ==
          0.0);
  REQUIRE((restored.stats().alpha - model.stats().alpha).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((restored.priors().mu0 - model.priors().mu0).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(restored.steps() == model.steps());
  REQUIRE(restored.opt_steps() == model.opt_steps());
  REQUIRE(restored.dead_nodes() == model.dead_nodes());
  for (Index j = 0; j < 6; ++j)
    REQUIRE((restored.params().chol_precision[static_cast<std::size_t>(j)] -
             model.params().chol_precision[static_cast<std::size_t>(j)])
                .cwiseAbs()
                .maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("a resumed run continues bit-identically to an uninterrupted one") {
  std::mt19937_64 rng(107);
  Matrix xs = random_matrix(2, 60, rng);

  TilingModel continuous = make_model(5, 2, 108,
                                      std::numeric_limits<double>::quiet_NaN());
  TilingModel first_half = continuous;

  for (Index t = 0; t < 60; ++t) continuous.observe(xs.col(t));

  for (Index t = 0; t < 30; ++t) first_half.observe(xs.col(t));
  const std::string path = temp_path("resume.ckpt");
  save_checkpoint(path, first_half);
  TilingModel resumed = load_checkpoint(path);
  for (Index t = 30; t < 60; ++t) resumed.observe(xs.col(t));

  REQUIRE((resumed.params().mu - continuous.params().mu).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((resumed.params().logits - continuous.params().logits)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  REQUIRE((resumed.stats().alpha - continuous.stats().alpha).cwiseAbs().maxCoeff() ==
          0.0);
  REQUIRE((resumed.priors().mu0 - continuous.priors().mu0).cwiseAbs().maxCoeff() ==
          0.0);
  REQUIRE((resumed.stats().transition_counts - continuous.stats().transition_counts)
              .cwiseAbs()
              .maxCoeff() == 0.0);

  // Invariants hold on the resumed model as it keeps learning.
  for (int i = 0; i < 5; ++i) {
    resumed.observe(random_vector(2, rng));
    REQUIRE(resumed.stats().alpha.sum() == Catch::Approx(1.0).margin(1e-10));
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects corrupted files") {
  const std::string path = temp_path("corrupt.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "MCKPxxxxxxxxxxxxxxxx";
  }
  REQUIRE_THROWS_AS(load_checkpoint(path), format_error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "WRNG";
  }
  REQUIRE_THROWS_AS(load_checkpoint(path), format_error);
  std::remove(path.c_str());
}
