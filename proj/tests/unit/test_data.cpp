#include <filesystem>
#include <sstream>

#include "csm/data.hpp"
#include "csm/error.hpp"
#include "csm/exact.hpp"
#include "doctest.h"

using namespace csm;

TEST_CASE("1-D toy") {
  const auto a = gen_1d_toy(100000, 1);
  for (const State& x : a.samples) CHECK_UNARY(x[0] >= 0 && x[0] < 16);
  REQUIRE(a.truth.has_value());
  CHECK(kl_and_tv(TabularDistribution::empirical(a.space, a.samples), *a.truth).tv < 0.02);
  CHECK(gen_1d_toy(1000, 9).samples == gen_1d_toy(1000, 9).samples);
  CHECK(gen_1d_toy(1000, 9).samples != gen_1d_toy(1000, 10).samples);
  CHECK_THROWS_AS(gen_1d_toy(0, 1), Error);
  const auto p = toy_1d_distribution();
  // Modes at 3 and 10-11, the second taller.
  CHECK(p({3}) > p({2}));
  CHECK(p({3}) > p({6}));
  CHECK(p({10}) > p({3}));
}

TEST_CASE("2-D toys") {
  const auto board = gen_2d_toy("checkerboard", 100000, 91, 2);
  for (const State& x : board.samples) CHECK_UNARY(x[0] >= 0 && x[0] < 91 && x[1] >= 0 && x[1] < 91);
  // Squares are 13 bins wide; "off" squares have odd i + j.
  std::size_t off = 0;
  for (const State& x : board.samples) off += ((x[0] / 13 + x[1] / 13) % 2 == 1);
  CHECK(static_cast<double>(off) / board.samples.size() < 0.01);
  for (const std::string name : {"checkerboard", "spirals", "rings"}) {
    const auto big = gen_2d_toy(name, 1000000, 91, 3);
    CHECK(kl_and_tv(TabularDistribution::empirical(big.space, big.samples), *big.truth).tv < 0.03);
  }
  CHECK(gen_2d_toy("rings", 10, 8, 1).space == DiscreteSpace({8, 8}));
  CHECK_THROWS_AS(gen_2d_toy("moons", 10, 91, 1), Error);
  CHECK_THROWS_AS(gen_2d_toy("rings", 10, 1, 1), Error);
}

TEST_CASE("tabular csv parsing") {
  std::istringstream in("0,1,1\n1,0,0\n");
  const auto d = parse_tabular_csv(in);
  CHECK(d.samples.size() == 2);
  CHECK(d.space == DiscreteSpace::binary(3));
  CHECK(d.samples[0] == State{0, 1, 1});

  std::istringstream ragged("0,1,1\n1,0\n");
  try {
    parse_tabular_csv(ragged);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream nonbinary("0,1\n2,0\n");
  CHECK_THROWS_AS(parse_tabular_csv(nonbinary), ParseError);
  std::istringstream header("a,b\n1,0\n");
  CHECK(parse_tabular_csv(header, true).samples == std::vector<State>{{1, 0}});
}

TEST_CASE("tabular csv round trip") {
  std::istringstream in("0,1,1,0\n1,0,0,1\n1,1,1,1\n");
  const auto d = parse_tabular_csv(in);
  const auto path = (std::filesystem::temp_directory_path() / "csm_unit_data.csv").string();
  save_tabular_csv(d, path);
  const auto back = load_tabular_csv(path);
  CHECK(back.samples == d.samples);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_tabular_csv(path), Error);
}

TEST_CASE("minibatches") {
  const auto d = gen_1d_toy(50, 4);
  Rng a(5), b(5);
  const auto x = sample_batch(d, 30, a);
  CHECK(x.size() == 30);
  CHECK(x == sample_batch(d, 30, b));
  for (const State& s : x) CHECK(std::find(d.samples.begin(), d.samples.end(), s) != d.samples.end());
}
