#include <cstdlib>
#include <cstring>

#include "dq/kernels.hpp"

namespace dq::kernels {
namespace {

struct Table {
  Isa isa;
  void (*fnv1a64_batch)(std::span<const std::string_view>, std::span<uint64_t>);
  uint64_t (*wrapping_sum)(std::span<const uint64_t>);
};

constexpr Table kScalar{Isa::scalar, &scalar::fnv1a64_batch,
                        &scalar::wrapping_sum};
#if defined(DQ_HAVE_AVX2_KERNELS)
constexpr Table kAvx2{Isa::avx2, &avx2::fnv1a64_batch, &avx2::wrapping_sum};
#endif

bool cpu_has_avx2() {
#if defined(DQ_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Table& table_for(Isa isa) {
#if defined(DQ_HAVE_AVX2_KERNELS)
  if (isa == Isa::avx2 && cpu_has_avx2()) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

const Table* initial_table() {
  const char* force = std::getenv("DQ_FORCE_SCALAR");
  if (force && std::strcmp(force, "0") != 0 && *force) return &kScalar;
  return &table_for(detected_isa());
}

const Table*& current() {
  static const Table* table = initial_table();
  return table;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "scalar";
}

Isa detected_isa() { return cpu_has_avx2() ? Isa::avx2 : Isa::scalar; }

Isa active_isa() { return current()->isa; }

void set_isa(std::optional<Isa> isa) {
  current() = isa ? &table_for(*isa) : &table_for(detected_isa());
}

void fnv1a64_batch(std::span<const std::string_view> rows,
                   std::span<uint64_t> out) {
  current()->fnv1a64_batch(rows, out);
}

uint64_t wrapping_sum(std::span<const uint64_t> values) {
  return current()->wrapping_sum(values);
}

}  // namespace dq::kernels
