#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "klsda/kernels.hpp"

namespace klsda::kernels {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(KLSDA_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(KLSDA_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const Table& table(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument("kernel variant not available: " + std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(KLSDA_HAVE_AVX2)
    case Isa::Avx2: return detail::kAvx2Table;
#endif
#if defined(KLSDA_HAVE_NEON)
    case Isa::Neon: return detail::kNeonTable;
#endif
    default: return detail::kScalarTable;
  }
}

namespace {

Isa detect() {
  if (const char* env = std::getenv("KLSDA_SIMD")) {
    std::string_view v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && supported(Isa::Avx2)) return Isa::Avx2;
    if (v == "neon" && supported(Isa::Neon)) return Isa::Neon;
  }
  if (supported(Isa::Avx2)) return Isa::Avx2;
  if (supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

struct Slot {
  std::atomic<Isa> isa;
  std::atomic<const Table*> table;
};

Slot& active_slot() {
  static Slot slot{detect(), nullptr};
  if (slot.table.load(std::memory_order_acquire) == nullptr) {
    slot.table.store(&table(slot.isa.load()), std::memory_order_release);
  }
  return slot;
}

}  // namespace

Isa active() { return active_slot().isa.load(std::memory_order_relaxed); }

void set_active(Isa isa) {
  const Table& t = table(isa);
  Slot& slot = active_slot();
  slot.isa.store(isa, std::memory_order_relaxed);
  slot.table.store(&t, std::memory_order_release);
}

const Table& current() { return *active_slot().table.load(std::memory_order_acquire); }

}  // namespace klsda::kernels
