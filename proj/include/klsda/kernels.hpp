#pragma once

// Dense double-precision inner loops used by the solvers.
//
// Every kernel has a scalar reference implementation. Wider variants
// (AVX2+FMA on x86-64, NEON on aarch64) are compiled into separate
// translation units and chosen once at runtime from CPU capabilities.
// `KLSDA_SIMD=scalar|avx2|neon` in the environment pins the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace klsda::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct Table {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_norm)(const double* x, std::size_t n);
  // out = a - b
  void (*subtract)(const double* a, const double* b, double* out, std::size_t n);
};

// True when the variant is compiled in and the running CPU can execute it.
bool supported(Isa isa);

// Throws std::invalid_argument for an unsupported ISA.
const Table& table(Isa isa);

Isa active();
// Test and CLI hook. Not thread-safe against concurrent kernel calls.
void set_active(Isa isa);

const Table& current();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return current().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  current().axpy(alpha, x.data(), y.data(), x.size());
}

inline double squared_norm(std::span<const double> x) {
  return current().squared_norm(x.data(), x.size());
}

inline void subtract(std::span<const double> a, std::span<const double> b,
                     std::span<double> out) {
  current().subtract(a.data(), b.data(), out.data(), a.size());
}

namespace detail {
extern const Table kScalarTable;
#if defined(KLSDA_HAVE_AVX2)
extern const Table kAvx2Table;
#endif
#if defined(KLSDA_HAVE_NEON)
extern const Table kNeonTable;
#endif
}  // namespace detail

}  // namespace klsda::kernels
