#include "ptl/kernels.hpp"

#include <stdexcept>
#include <string>

namespace ptl::kernels {
namespace {

const Ops* detect() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return &avx2_ops;
#endif
  return &scalar_ops;
}

const Ops* g_active = detect();

} // namespace

const Ops& active() { return *g_active; }

void force(std::string_view name) {
  if (name == "scalar")
    g_active = &scalar_ops;
  else if (name == "avx2")
    g_active = &avx2_ops;
  else if (name == "auto")
    g_active = detect();
  else
    throw std::invalid_argument("unknown kernel set: " + std::string(name));
}

} // namespace ptl::kernels
