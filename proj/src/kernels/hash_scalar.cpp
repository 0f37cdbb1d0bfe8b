#include "dq/kernels.hpp"

namespace dq::kernels::scalar {

void fnv1a64_batch(std::span<const std::string_view> rows,
                   std::span<uint64_t> out) {
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = fnv1a64(rows[i]);
}

uint64_t wrapping_sum(std::span<const uint64_t> values) {
  uint64_t acc = 0;
  for (uint64_t v : values) acc += v;  // unsigned wraparound is the contract
  return acc;
}

}  // namespace dq::kernels::scalar
