#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "ptl/kernels.hpp"
#include "ptl/rng.hpp"

using namespace ptl;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-3.0, 3.0);
  return v;
}

struct ForceGuard {
  explicit ForceGuard(const char* name) { kernels::force(name); }
  ~ForceGuard() { kernels::force("auto"); }
};

} // namespace

TEST_CASE("scalar kernels match hand-computed values") {
  ForceGuard g("scalar");
  const std::vector<double> x{1.0, 2.0, 3.0};
  const std::vector<double> y{4.0, -5.0, 6.0};
  CHECK(kernels::dot(x, y) == 12.0);
  CHECK(kernels::sum(x) == 6.0);
  CHECK(kernels::sumsq(x) == 14.0);
  CHECK(kernels::sqdist(x, y) == 9.0 + 49.0 + 9.0);

  std::vector<double> z(3);
  kernels::add(x, y, z);
  CHECK(z == std::vector<double>{5.0, -3.0, 9.0});

  std::vector<double> acc = y;
  kernels::axpy(2.0, x, acc);
  CHECK(acc == std::vector<double>{6.0, -1.0, 12.0});

  std::vector<double> s = x;
  kernels::scale(-2.0, s);
  CHECK(s == std::vector<double>{-2.0, -4.0, -6.0});
}

TEST_CASE("avx2 kernels agree with scalar across lengths") {
  if (std::string(kernels::avx2_ops.name) != "avx2") {
    MESSAGE("AVX2 unavailable on this host; equivalence check skipped");
    return;
  }
  // lengths straddling the vector width, including ragged tails
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 1000}) {
    const auto x = random_vec(n, 100 + n);
    const auto y = random_vec(n, 200 + n);
    const auto& sc = kernels::scalar_ops;
    const auto& av = kernels::avx2_ops;
    const double tol = 1e-12 * (1.0 + n);
    CAPTURE(n);
    CHECK(av.dot(x.data(), y.data(), n) ==
          doctest::Approx(sc.dot(x.data(), y.data(), n)).epsilon(tol));
    CHECK(av.sum(x.data(), n) ==
          doctest::Approx(sc.sum(x.data(), n)).epsilon(tol));
    CHECK(av.sumsq(x.data(), n) ==
          doctest::Approx(sc.sumsq(x.data(), n)).epsilon(tol));
    CHECK(av.sqdist(x.data(), y.data(), n) ==
          doctest::Approx(sc.sqdist(x.data(), y.data(), n)).epsilon(tol));

    std::vector<double> za(n), zs(n);
    av.add(x.data(), y.data(), za.data(), n);
    sc.add(x.data(), y.data(), zs.data(), n);
    CHECK(za == zs); // exact: add has no reassociation

    std::vector<double> aa = y, as = y;
    av.axpy(0.7, x.data(), aa.data(), n);
    sc.axpy(0.7, x.data(), as.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(aa[i] == doctest::Approx(as[i]).epsilon(1e-15));

    std::vector<double> pa = x, ps = x;
    av.scale(1.3, pa.data(), n);
    sc.scale(1.3, ps.data(), n);
    CHECK(pa == ps);
  }
}

TEST_CASE("force switches the active backend and auto restores detection") {
  kernels::force("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::force("auto");
  if (std::string(kernels::avx2_ops.name) == "avx2") {
    kernels::force("avx2");
    CHECK(std::string(kernels::active().name) == "avx2");
    kernels::force("auto");
  }
}
