#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dfx/errors.hpp"
#include "dfx/space.hpp"

using namespace dfx;

namespace {

ParamSpec linear(const char* name, double lo, double hi) {
  return {.name = name, .low = lo, .high = hi, .scale = Scale::Linear};
}

ParamSpec logp(const char* name, double lo, double hi) {
  return {.name = name, .low = lo, .high = hi, .scale = Scale::Log};
}

SearchSpace diode_space() {
  return SearchSpace({logp("IS", 1e-25, 1e-22), linear("n", 0.5, 1.5),
                      linear("RS", 100.0, 150.0)});
}

}  // namespace

TEST_CASE("unit transform: linear midpoint") {
  const auto rs = linear("RS", 100.0, 150.0);
  CHECK(unit_transform(rs, 125.0, MapDirection::ToUnit) == doctest::Approx(0.5));
  CHECK(unit_transform(rs, 0.5, MapDirection::FromUnit) == doctest::Approx(125.0));
  CHECK(unit_transform(rs, 100.0, MapDirection::ToUnit) == 0.0);
  CHECK(unit_transform(rs, 150.0, MapDirection::ToUnit) == 1.0);
}

TEST_CASE("unit transform: log decade position") {
  const auto is = logp("IS", 1e-25, 1e-22);
  CHECK(unit_transform(is, 1e-24, MapDirection::ToUnit) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(unit_transform(is, 1.0 / 3.0, MapDirection::FromUnit) ==
        doctest::Approx(1e-24).epsilon(1e-12));
}

TEST_CASE("unit transform rejects out-of-range input") {
  const auto rs = linear("RS", 100.0, 150.0);
  CHECK_THROWS_AS(unit_transform(rs, 99.0, MapDirection::ToUnit), InvalidInputError);
  CHECK_THROWS_AS(unit_transform(rs, 151.0, MapDirection::ToUnit), InvalidInputError);
  CHECK_THROWS_AS(unit_transform(rs, -0.01, MapDirection::FromUnit), InvalidInputError);
  CHECK_THROWS_AS(unit_transform(rs, 1.01, MapDirection::FromUnit), InvalidInputError);
}

TEST_CASE("property: round trip within 1e-12 relative, including wide log spans") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const ParamSpec specs[] = {
      linear("a", -3.0, 7.5),
      linear("b", 100.0, 150.0),
      logp("c", 1e-25, 1e-22),
      logp("d", 1e-20, 1e-10),  // 10-decade span
      logp("e", 5e15, 5e20),
  };
  for (const auto& spec : specs) {
    for (int i = 0; i < 5000; ++i) {
      const double x = unit_transform(spec, unit(gen), MapDirection::FromUnit);
      const double back = unit_transform(
          spec, unit_transform(spec, x, MapDirection::ToUnit), MapDirection::FromUnit);
      CHECK(std::abs(back - x) <= 1e-12 * std::max(1.0, std::abs(x)));
    }
  }
}

TEST_CASE("property: ToUnit is strictly increasing") {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ParamSpec specs[] = {linear("a", -2.0, 9.0), logp("b", 1e-25, 1e-22)};
  for (const auto& spec : specs) {
    for (int i = 0; i < 2000; ++i) {
      double u1 = unit(gen), u2 = unit(gen);
      if (u1 > u2) std::swap(u1, u2);
      if (u2 - u1 < 1e-9) continue;
      const double x1 = unit_transform(spec, u1, MapDirection::FromUnit);
      const double x2 = unit_transform(spec, u2, MapDirection::FromUnit);
      CHECK(x1 < x2);
      CHECK(unit_transform(spec, x1, MapDirection::ToUnit) <
            unit_transform(spec, x2, MapDirection::ToUnit));
    }
  }
}

TEST_CASE("tighten: linear example") {
  const SearchSpace space({linear("RS", 100.0, 150.0)});
  const double best[] = {120.0};
  const auto tightened = tighten_space(space, best, 0.4);
  CHECK(tightened.param(0).low == doctest::Approx(110.0).epsilon(1e-12));
  CHECK(tightened.param(0).high == doctest::Approx(130.0).epsilon(1e-12));
}

TEST_CASE("tighten: clamps at the original boundary") {
  const SearchSpace space({linear("RS", 100.0, 150.0)});
  const double best[] = {100.0};
  const auto tightened = tighten_space(space, best, 0.4);
  CHECK(tightened.param(0).low == 100.0);
  CHECK(tightened.param(0).high == doctest::Approx(110.0).epsilon(1e-12));
}

TEST_CASE("tighten: factor one at the midpoint is a no-op") {
  const SearchSpace space({linear("RS", 100.0, 150.0)});
  const double best[] = {125.0};
  const auto tightened = tighten_space(space, best, 1.0);
  CHECK(tightened.param(0).low == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(tightened.param(0).high == doctest::Approx(150.0).epsilon(1e-12));
}

TEST_CASE("tighten: log parameters shrink in decades") {
  const SearchSpace space({logp("IS", 1e-25, 1e-22)});
  const double best[] = {1e-24};
  const auto tightened = tighten_space(space, best, 0.5);
  // Span is 3 decades, so the tightened span is 0.75 decades each side of 1e-24.
  CHECK(std::log10(tightened.param(0).low) == doctest::Approx(-24.75).epsilon(1e-9));
  CHECK(std::log10(tightened.param(0).high) == doctest::Approx(-23.25).epsilon(1e-9));
}

TEST_CASE("tighten: rejects points outside the space") {
  const SearchSpace space({linear("RS", 100.0, 150.0)});
  const double best[] = {99.0};
  CHECK_THROWS_AS(tighten_space(space, best, 0.4), InvalidInputError);
  const double inside[] = {120.0};
  CHECK_THROWS_AS(tighten_space(space, inside, 0.0), InvalidInputError);
  CHECK_THROWS_AS(tighten_space(space, inside, 1.5), InvalidInputError);
}

TEST_CASE("property: tightened ranges contain best and stay inside the original") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const SearchSpace space = diode_space();
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> best;
    for (const auto& p : space.params()) {
      best.push_back(unit_transform(p, unit(gen), MapDirection::FromUnit));
    }
    const double factor = 0.05 + 0.95 * unit(gen);
    const auto tightened = tighten_space(space, best, factor);
    CHECK(tightened.contains(best));
    for (std::size_t d = 0; d < space.size(); ++d) {
      CHECK(tightened.param(d).low >= space.param(d).low);
      CHECK(tightened.param(d).high <= space.param(d).high);
      CHECK(tightened.param(d).low < tightened.param(d).high);
    }
  }
}

TEST_CASE("validate_space lists every violation") {
  CHECK(validate_space(diode_space().params()).empty());

  std::vector<ParamSpec> bad{
      logp("IS", 0.0, 1e-22),       // log with low <= 0 (and low < high holds)
      linear("n", 1.5, 0.5),        // inverted bounds
      linear("n", 0.5, 1.5),        // duplicate name
  };
  const auto violations = validate_space(bad);
  CHECK(violations.size() == 3);

  CHECK_FALSE(validate_space(std::vector<ParamSpec>{}).empty());
  CHECK_THROWS_AS(SearchSpace{bad}, ConfigError);
}
