#include <doctest.h>

#include <stdexcept>

#include <cstdint>
#include <vector>

#include "fedq/quantizer.hpp"
#include "fedq/wire.hpp"

using namespace fedq;

TEST_SUITE("wire") {
  TEST_CASE("codeword width") {
    CHECK(wire::codeword_bytes(1) == 1);
    CHECK(wire::codeword_bytes(8) == 1);
    CHECK(wire::codeword_bytes(9) == 2);
    CHECK(wire::codeword_bytes(16) == 2);
    CHECK(wire::codeword_bytes(17) == 3);
    CHECK(wire::codeword_bytes(32) == 4);
  }

  TEST_CASE("golden bytes, 3-bit codewords") {
    QuantizedVector q{{1, -1, 3}, 4.0, 3, Codebook::Pipeline};
    const std::vector<std::uint8_t> expected{
        0x03,                                            // bits
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0x40,  // 4.0 as little-endian double
        0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,  // d = 3
        0x01, 0xFF, 0x03};
    CHECK(wire::serialize(q) == expected);
  }

  TEST_CASE("golden bytes, 12-bit codewords") {
    QuantizedVector q{{-2, 2047}, 0.5, 12, Codebook::Pipeline};
    const auto bytes = wire::serialize(q);
    REQUIRE(bytes.size() == 17 + 4);
    CHECK(bytes[0] == 12);
    // 0.5 = 0x3FE0000000000000
    CHECK(bytes[7] == 0xE0);
    CHECK(bytes[8] == 0x3F);
    CHECK(bytes[9] == 2);
    CHECK(bytes[17] == 0xFE);
    CHECK(bytes[18] == 0xFF);
    CHECK(bytes[19] == 0xFF);
    CHECK(bytes[20] == 0x07);
  }

  TEST_CASE("round trip keeps codewords, gain and bits") {
    for (int B : {1, 2, 7, 8, 9, 16, 24, 32}) {
      const std::int64_t lo = -(std::int64_t{1} << (B - 1));
      const std::int64_t hi = (std::int64_t{1} << (B - 1)) - 1;
      QuantizedVector q{{lo, hi, 0, lo / 2, hi / 3}, 1.0 / 3.0, B, Codebook::SymmetricGrid};
      const auto back = wire::deserialize(wire::serialize(q), Codebook::SymmetricGrid);
      CHECK(back.codewords == q.codewords);
      CHECK(back.gain == q.gain);
      CHECK(back.bits == B);
      CHECK(back.codebook == Codebook::SymmetricGrid);
      CHECK(wire::serialize(q).size() == 17 + 5 * wire::codeword_bytes(B));
    }
  }

  TEST_CASE("malformed input is rejected") {
    QuantizedVector q{{1, 2}, 4.0, 3, Codebook::Pipeline};
    auto bytes = wire::serialize(q);
    bytes.pop_back();
    CHECK_THROWS(wire::deserialize(bytes, Codebook::Pipeline));
    CHECK_THROWS(wire::deserialize(std::vector<std::uint8_t>(5, 0), Codebook::Pipeline));
  }

  TEST_CASE("bandwidth accounting") {
    CHECK(wire::kHeaderBits == 136);
    CHECK(wire::message_bits(100, 2) == 136 + 200);
    // Five clients, d = 100, B = 2: 1000 codeword bits plus five 17-byte headers.
    CHECK(5 * wire::message_bits(100, 2) == 1000 + 5 * 17 * 8);
    QuantizedVector q{std::vector<std::int64_t>(10, 0), 1.0, 4, Codebook::Pipeline};
    CHECK(wire::message_bits(q) == 136 + 40);
    CHECK(wire::float_message_bits(10) == 320);
  }
}
