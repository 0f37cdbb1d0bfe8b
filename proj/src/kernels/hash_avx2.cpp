// Compiled with -mavx2; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cstring>

#include "dq/kernels.hpp"

namespace dq::kernels::avx2 {
namespace {

// h * 0x100000001b3 mod 2^64. AVX2 has no 64-bit mullo, but the prime is
// 2^40 + 0x1b3, so with h = hi*2^32 + lo:
//   h*p = (h << 40) + lo*0x1b3 + ((hi*0x1b3) << 32)
inline __m256i mul_fnv_prime(__m256i h) {
  const __m256i low_prime = _mm256_set1_epi64x(0x1b3);
  __m256i lo = _mm256_mul_epu32(h, low_prime);
  __m256i hi = _mm256_mul_epu32(_mm256_srli_epi64(h, 32), low_prime);
  return _mm256_add_epi64(_mm256_add_epi64(lo, _mm256_slli_epi64(hi, 32)),
                          _mm256_slli_epi64(h, 40));
}

inline int64_t load_word(const char* p) {
  int64_t w;
  std::memcpy(&w, p, sizeof w);
  return w;
}

// Little-endian lane words: byte k of the stream sits in bits [8k, 8k+8).
static_assert(__BYTE_ORDER__ == __ORDER_LITTLE_ENDIAN__);

void hash_group(const std::string_view* rows, uint64_t* out) {
  std::size_t common =
      std::min({rows[0].size(), rows[1].size(), rows[2].size(), rows[3].size()});
  const char* p0 = rows[0].data();
  const char* p1 = rows[1].data();
  const char* p2 = rows[2].data();
  const char* p3 = rows[3].data();

  __m256i h = _mm256_set1_epi64x(static_cast<int64_t>(kFnvOffset));
  const __m256i byte_mask = _mm256_set1_epi64x(0xff);

  std::size_t i = 0;
  for (; i + 8 <= common; i += 8) {
    __m256i w = _mm256_set_epi64x(load_word(p3 + i), load_word(p2 + i),
                                  load_word(p1 + i), load_word(p0 + i));
    for (int k = 0; k < 8; ++k) {
      __m256i b = _mm256_and_si256(w, byte_mask);
      h = mul_fnv_prime(_mm256_xor_si256(h, b));
      w = _mm256_srli_epi64(w, 8);
    }
  }
  for (; i < common; ++i) {
    __m256i b = _mm256_set_epi64x(static_cast<unsigned char>(p3[i]),
                                  static_cast<unsigned char>(p2[i]),
                                  static_cast<unsigned char>(p1[i]),
                                  static_cast<unsigned char>(p0[i]));
    h = mul_fnv_prime(_mm256_xor_si256(h, b));
  }

  alignas(32) uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), h);
  for (int lane = 0; lane < 4; ++lane) {
    uint64_t state = lanes[lane];
    for (std::size_t j = common; j < rows[lane].size(); ++j) {
      state ^= static_cast<unsigned char>(rows[lane][j]);
      state *= kFnvPrime;
    }
    out[lane] = state;
  }
}

}  // namespace

void fnv1a64_batch(std::span<const std::string_view> rows,
                   std::span<uint64_t> out) {
  std::size_t n = rows.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) hash_group(rows.data() + i, out.data() + i);
  for (; i < n; ++i) out[i] = fnv1a64(rows[i]);
}

uint64_t wrapping_sum(std::span<const uint64_t> values) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= values.size(); i += 4)
    acc = _mm256_add_epi64(
        acc, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(&values[i])));
  alignas(32) uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < values.size(); ++i) total += values[i];
  return total;
}

}  // namespace dq::kernels::avx2
