#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "klsda/kernels.hpp"

using namespace klsda::kernels;

namespace {

std::vector<Isa> wide_variants() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (supported(isa)) out.push_back(isa);
  }
  return out;
}

std::vector<double> randn(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar table is always available") {
  CHECK(supported(Isa::Scalar));
  CHECK(table(Isa::Scalar).dot != nullptr);
  CHECK(isa_name(Isa::Scalar) == "scalar");
}

TEST_CASE("unsupported variant is rejected") {
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (!supported(isa)) CHECK_THROWS_AS(table(isa), std::invalid_argument);
  }
}

TEST_CASE("scalar dot matches a long-double loop") {
  std::mt19937_64 rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 1000u}) {
    const auto a = randn(rng, n), b = randn(rng, n);
    long double ref = 0.0L;
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ref += static_cast<long double>(a[i]) * b[i];
      mag += std::abs(a[i] * b[i]);
    }
    CHECK(std::abs(table(Isa::Scalar).dot(a.data(), b.data(), n) - static_cast<double>(ref)) <=
          1e-14 * (mag + 1.0));
  }
}

TEST_CASE("wide variants agree with the scalar reference") {
  std::mt19937_64 rng(2);
  const Table& s = table(Isa::Scalar);
  for (Isa isa : wide_variants()) {
    CAPTURE(isa_name(isa));
    const Table& w = table(isa);
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto a = randn(rng, n), b = randn(rng, n);
      double mag = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mag += std::abs(a[i] * b[i]);
        sq += a[i] * a[i];
      }
      CHECK(std::abs(w.dot(a.data(), b.data(), n) - s.dot(a.data(), b.data(), n)) <=
            4e-16 * n * (mag + 1.0));
      CHECK(std::abs(w.squared_norm(a.data(), n) - s.squared_norm(a.data(), n)) <=
            4e-16 * n * (sq + 1.0));

      // Elementwise kernels are exact: no contraction, same operation order.
      std::vector<double> y1 = b, y2 = b;
      s.axpy(0.37, a.data(), y1.data(), n);
      w.axpy(0.37, a.data(), y2.data(), n);
      CHECK(y1 == y2);
      std::vector<double> o1(n), o2(n);
      s.subtract(a.data(), b.data(), o1.data(), n);
      w.subtract(a.data(), b.data(), o2.data(), n);
      CHECK(o1 == o2);
    }
  }
}

TEST_CASE("set_active switches the dispatched table") {
  const Isa before = active();
  set_active(Isa::Scalar);
  CHECK(active() == Isa::Scalar);
  CHECK(&current() == &table(Isa::Scalar));
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  set_active(before);
  CHECK(active() == before);
}

}
