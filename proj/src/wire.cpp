#include "fedq/wire.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace fedq::wire {

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t bytes) {
  for (std::size_t i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t offset, std::size_t bytes) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bytes; ++i) v |= std::uint64_t{in[offset + i]} << (8 * i);
  return v;
}

}  // namespace

std::size_t codeword_bytes(int bits) {
  if (bits < 1 || bits > kMaxBits) throw std::invalid_argument("codeword_bytes: bad bit-width");
  return static_cast<std::size_t>((bits + 7) / 8);
}

std::vector<std::uint8_t> serialize(const QuantizedVector& q) {
  const std::size_t width = codeword_bytes(q.bits);
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + width * q.size());
  out.push_back(static_cast<std::uint8_t>(q.bits));
  put_le(out, std::bit_cast<std::uint64_t>(q.gain), 8);
  put_le(out, q.size(), 8);
  for (std::int64_t c : q.codewords) put_le(out, static_cast<std::uint64_t>(c), width);
  return out;
}

QuantizedVector deserialize(std::span<const std::uint8_t> bytes, Codebook codebook) {
  if (bytes.size() < kHeaderBytes) throw std::invalid_argument("deserialize: truncated header");
  QuantizedVector q;
  q.codebook = codebook;
  q.bits = bytes[0];
  q.gain = std::bit_cast<double>(get_le(bytes, 1, 8));
  const std::uint64_t dim = get_le(bytes, 9, 8);
  const std::size_t width = codeword_bytes(q.bits);
  if (bytes.size() != kHeaderBytes + width * dim) {
    throw std::invalid_argument("deserialize: payload size does not match header");
  }
  q.codewords.reserve(dim);
  const unsigned shift = 64 - 8 * static_cast<unsigned>(width);
  for (std::uint64_t i = 0; i < dim; ++i) {
    const std::uint64_t raw = get_le(bytes, kHeaderBytes + i * width, width);
    // Sign-extend from the stored width.
    q.codewords.push_back(static_cast<std::int64_t>(raw << shift) >> shift);
  }
  return q;
}

std::uint64_t message_bits(const QuantizedVector& q) { return message_bits(q.size(), q.bits); }

std::uint64_t message_bits(std::size_t dim, int bits) {
  return kHeaderBits + static_cast<std::uint64_t>(dim) * static_cast<std::uint64_t>(bits);
}

std::uint64_t float_message_bits(std::size_t dim) { return kFloatBits * dim; }

}  // namespace fedq::wire
