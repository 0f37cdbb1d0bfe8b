#pragma once

// Hash and reduction kernels behind the table checksum. Every kernel has a
// portable scalar reference; vector variants are picked once at startup from
// the CPU feature set and must agree with the reference bit for bit.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace dq::kernels {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);

/// Best instruction set this binary and CPU both support.
Isa detected_isa();

/// ISA the dispatched entry points currently use. Honors DQ_FORCE_SCALAR=1
/// at first use and any later set_isa() call.
Isa active_isa();

/// Pins dispatch to `isa` (nullopt restores detection). Requests for an ISA
/// the CPU lacks fall back to scalar. Not thread-safe against concurrent
/// kernel calls.
void set_isa(std::optional<Isa> isa);

/// FNV-1a 64 of one byte string.
constexpr uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = kFnvOffset;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

// Dispatched entry points. `out.size()` must equal `rows.size()`.
void fnv1a64_batch(std::span<const std::string_view> rows,
                   std::span<uint64_t> out);
uint64_t wrapping_sum(std::span<const uint64_t> values);

namespace scalar {
void fnv1a64_batch(std::span<const std::string_view> rows,
                   std::span<uint64_t> out);
uint64_t wrapping_sum(std::span<const uint64_t> values);
}  // namespace scalar

#if defined(DQ_HAVE_AVX2_KERNELS)
namespace avx2 {
void fnv1a64_batch(std::span<const std::string_view> rows,
                   std::span<uint64_t> out);
uint64_t wrapping_sum(std::span<const uint64_t> values);
}  // namespace avx2
#endif

}  // namespace dq::kernels
