#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "fedq/errors.hpp"
#include "fedq/schedules.hpp"

using namespace fedq;

TEST_SUITE("schedules") {
  TEST_CASE("schedule offset") {
    CHECK(schedule_offset(1.0, 1.0, 5) == 8.0);
    CHECK(schedule_offset(1.0, 1.0, 20) == 20.0);
    CHECK(schedule_offset(0.5, 2.0, 1) == 32.0);
  }

  TEST_CASE("learning rate") {
    CHECK(lr_schedule(0, 1.0, 16.0) == 0.125);
    CHECK(lr_schedule(4, 2.0, 6.0) == 0.1);
    for (std::int64_t t = 0; t < 1000; ++t) CHECK(lr_schedule(t + 1, 1.0, 8.0) < lr_schedule(t, 1.0, 8.0));
    for (int E : {1, 5, 20}) {
      const double gamma = schedule_offset(1.0, 1.0, E);
      for (std::int64_t t = 0; t <= static_cast<std::int64_t>(10 * gamma); ++t) {
        CHECK(lr_schedule(t, 1.0, gamma) / lr_schedule(t + E, 1.0, gamma) <= 2.0);
      }
    }
  }

  TEST_CASE("weight-upload bit schedule") {
    CHECK(bits_thm1(1, 1.0, 16.0) == 4);
    CHECK(bits_thm1(1, 2.0, 8.0) == 4);
    // ceil(log2(x)) at an exact power of two: mu (gamma + t - 1)/2 + 1 = 16.
    CHECK(bits_thm1(15, 2.0, 1.0) == 4);
    for (std::int64_t t = 16; t < 20000; t += 7) {
      CHECK(bits_thm1(10 * t, 1.0, 16.0) - bits_thm1(t, 1.0, 16.0) <= 4);
      CHECK(bits_thm1(t + 1, 1.0, 16.0) >= bits_thm1(t, 1.0, 16.0));
    }
    // Round t uses B_{t+1} = log2(1/eta_t + 1).
    for (std::int64_t t = 0; t < 100; ++t) {
      const double eta = lr_schedule(t, 1.0, 8.0);
      CHECK(bits_thm1(t + 1, 1.0, 8.0) == static_cast<int>(std::ceil(std::log2(1.0 / eta + 1.0))));
    }
  }

  TEST_CASE("downlink bit schedule") {
    CHECK(bits_downlink(0, 1.0, 16.0) == 4);
    int prev = 0;
    for (std::int64_t t = 0; t <= 10000; ++t) {
      const int b = bits_downlink(t, 1.0, 8.0);
      CHECK(b >= prev);
      prev = b;
    }
    for (std::int64_t t : {1000, 100000, 10000000}) {
      const double eta = lr_schedule(t, 1.0, 8.0);
      CHECK(std::abs(bits_downlink(t, 1.0, 8.0) - std::log2(1.0 / eta)) <= 1.0);
    }
    // eta * mu = 2 / gamma >= 1.
    CHECK_THROWS_AS(bits_downlink(0, 1.0, 2.0), std::invalid_argument);
  }

  TEST_CASE("step bit schedule") {
    CHECK(bits_step(1, 2.0, 75.0) == 1);
    CHECK(bits_step(151, 2.0, 75.0) == 2);
    CHECK(bits_step(150, 2.0, 75.0) == 1);
    CHECK(bits_step(1, 4.0, 37.5) == 2);
    CHECK(bits_step(1, 2.0, 1e9) >= 1);
  }

  TEST_CASE("schedule spec parsing") {
    CHECK(ScheduleSpec::parse("float") == ScheduleSpec::floating());
    CHECK(ScheduleSpec::parse("constant:4") == ScheduleSpec::constant(4));
    CHECK(ScheduleSpec::parse("thm1") == ScheduleSpec::thm1());
    CHECK(ScheduleSpec::parse("downlink") == ScheduleSpec::downlink());
    CHECK(ScheduleSpec::parse("step:2:75") == ScheduleSpec::step(2.0, 75.0));
    for (const char* bad : {"", "constant", "constant:0", "constant:33", "constant:x", "step:1:5",
                            "step:2:0", "step:2", "linear", "thm1:3"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(ScheduleSpec::parse(bad), ConfigError);
    }
    for (const auto& s : {ScheduleSpec::floating(), ScheduleSpec::constant(7), ScheduleSpec::thm1(),
                          ScheduleSpec::downlink(), ScheduleSpec::step(4.0, 37.5)}) {
      CHECK(ScheduleSpec::parse(s.to_string()) == s);
    }
  }

  TEST_CASE("schedules always produce integer widths in range") {
    const double mu = 1.0, gamma = 8.0;
    for (const auto& s : {ScheduleSpec::constant(1), ScheduleSpec::constant(32), ScheduleSpec::thm1(),
                          ScheduleSpec::downlink(), ScheduleSpec::step(2.0, 75.0)}) {
      for (std::int64_t t = 0; t < 5000; ++t) {
        const int b = s.bits_at(t, mu, gamma);
        REQUIRE(b >= 1);
        REQUIRE(b <= 32);
      }
    }
    CHECK(ScheduleSpec::floating().bits_at(10, mu, gamma) == 32);
    CHECK_FALSE(ScheduleSpec::floating().quantized());
    CHECK(ScheduleSpec::thm1().bits_at(0, 1.0, 16.0) == 4);
    CHECK(ScheduleSpec::step(2.0, 75.0).bits_at(150, 1.0, 8.0) == 2);
  }
}
