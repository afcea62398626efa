#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedq/quantizer.hpp"

namespace fedq::wire {

// Header: bit-width (1 byte), gain as little-endian IEEE-754 double (8 bytes),
// element count as little-endian uint64 (8 bytes).
inline constexpr std::size_t kHeaderBytes = 17;
inline constexpr std::uint64_t kHeaderBits = 8 * kHeaderBytes;
inline constexpr std::uint64_t kFloatBits = 32;

// Smallest whole number of bytes holding a B-bit signed codeword.
std::size_t codeword_bytes(int bits);

// Header followed by sign-extended little-endian codewords.
std::vector<std::uint8_t> serialize(const QuantizedVector& q);
// The codebook is not on the wire; the receiver knows it from configuration.
QuantizedVector deserialize(std::span<const std::uint8_t> bytes, Codebook codebook);

// Bandwidth charged for one quantized message: header plus d * B payload bits.
std::uint64_t message_bits(const QuantizedVector& q);
std::uint64_t message_bits(std::size_t dim, int bits);
// Bandwidth of an unquantized float32 message.
std::uint64_t float_message_bits(std::size_t dim);

}  // namespace fedq::wire
