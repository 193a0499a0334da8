#include "lemons/instance_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace lemons;

TEST_CASE("continuum instance with a weight") {
  const auto file = parse_instance(R"(
name = test
# uniform types
density.breakpoints = 0, 1
density.coefficients = 1
cost.breakpoints = 0, 0.5, 1
cost.coefficients = 0.25, 0.5; 0.25, 0.5
weight.breakpoints = 0, 1
weight.coefficients = 1, 1
)");
  CHECK(file.name == "test");
  REQUIRE(file.market);
  CHECK(file.market->cost(0.6) == doctest::Approx(0.55));
  REQUIRE(file.weight);
  CHECK((*file.weight)(0.5) == doctest::Approx(1.5));
  CHECK_FALSE(file.atoms);
}

TEST_CASE("atoms with fractions and a reference signal") {
  const auto file = parse_instance(R"(
atoms.types = 0, 1
atoms.masses = 3/4, 1/4
atoms.costs = 1/8, 1/2
signal.means = 0, 1/2, 1
signal.masses = 7/12, 1/6, 0; 0, 1/6, 1/12
)");
  REQUIRE(file.atoms);
  CHECK(file.atoms->masses(0) == 0.75);
  CHECK(file.atoms->costs(0) == 0.125);
  REQUIRE(file.signal_masses);
  CHECK((*file.signal_masses)(1, 2) == doctest::Approx(1.0 / 12));
  CHECK(file.signal_masses->sum() == doctest::Approx(1.0));
}

TEST_CASE("errors name the line and key") {
  auto message = [](const std::string& text) {
    try {
      parse_instance(text, "bad.cfg");
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string missing = message("density.breakpoints = 0, 1\ndensity.coefficients = 1\n");
  CHECK(missing.find("cost.breakpoints") != std::string::npos);

  const std::string mass = message("density.breakpoints = 0, 1\ndensity.coefficients = 2\n"
                                   "cost.breakpoints = 0, 1\ncost.coefficients = 0.25, 0.5\n");
  CHECK(mass.find("bad.cfg:2") != std::string::npos);
  CHECK(mass.find("density.coefficients") != std::string::npos);

  CHECK(message("no equals sign here\n").find("bad.cfg:1") != std::string::npos);
  CHECK_FALSE(message("atoms.types = 0, x\natoms.masses = 1, 0\natoms.costs = 0.1, 0.2\n").empty());
  CHECK_FALSE(message("regime = sideways\natoms.types = 0\natoms.masses = 1\natoms.costs = 0.1\n").empty());
}

TEST_CASE("weight specifications") {
  CHECK(parse_weight_spec("const:2")(0.3) == doctest::Approx(2.0));
  const auto p = parse_weight_spec("poly:1,-4,6,-4,1");
  CHECK(p(0.5) == doctest::Approx(0.0625));
  CHECK_THROWS_AS(parse_weight_spec("poly:0,1"), ValidationError);
  CHECK_THROWS_AS(parse_weight_spec("exp:1"), ValidationError);
  CHECK_THROWS_AS(parse_weight_spec("const:"), ValidationError);

  const auto dir = std::filesystem::temp_directory_path() / "lemons_weight_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "w.cfg") << "weight.breakpoints = 0, 1\nweight.coefficients = 0.5, 1\n";
  CHECK(parse_weight_spec("piecewise:w.cfg", dir)(0.4) == doctest::Approx(0.9));
  CHECK_THROWS(parse_weight_spec("piecewise:missing.cfg", dir));
}

TEST_CASE("number literals") {
  CHECK(parse_number("0.25") == 0.25);
  CHECK(parse_number("1/3") == doctest::Approx(1.0 / 3));
  CHECK(parse_number(" -2e-1 ") == -0.2);
  CHECK_THROWS_AS(parse_number("1/0"), ValidationError);
  CHECK_THROWS_AS(parse_number("abc"), ValidationError);
}
