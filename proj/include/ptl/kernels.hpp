#ifndef PTL_KERNELS_HPP
#define PTL_KERNELS_HPP

#include <cstddef>
#include <span>
#include <string_view>

// Flat-vector arithmetic used by the hot loops (trigger injection, feature
// distances, gradient updates). Scalar reference implementations plus AVX2
// variants, selected once at startup from CPUID.

namespace ptl::kernels {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);      // y += a*x
  void (*add)(const double*, const double*, double*, std::size_t); // z = x+y
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  double (*sqdist)(const double*, const double*, std::size_t);
  void (*scale)(double, double*, std::size_t);                     // x *= a
  const char* name;
};

// Reference path; always available.
extern const Ops scalar_ops;
// AVX2 path; null-equivalent to scalar_ops when unsupported.
extern const Ops avx2_ops;

// Active implementation, resolved at load time. Overridable for tests.
const Ops& active();
void force(std::string_view name); // "scalar" | "avx2" | "auto"

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline void add(std::span<const double> x, std::span<const double> y,
                std::span<double> z) {
  active().add(x.data(), y.data(), z.data(), x.size());
}
inline double sum(std::span<const double> x) {
  return active().sum(x.data(), x.size());
}
inline double sumsq(std::span<const double> x) {
  return active().sumsq(x.data(), x.size());
}
inline double sqdist(std::span<const double> x, std::span<const double> y) {
  return active().sqdist(x.data(), y.data(), x.size());
}
inline void scale(double a, std::span<double> x) {
  active().scale(a, x.data(), x.size());
}

} // namespace ptl::kernels

#endif
