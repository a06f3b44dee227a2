#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"

namespace crowdlf::kernels {

bool avx2_available() {
#if defined(CROWDLF_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend initial_backend() {
  Backend b = avx2_available() ? Backend::kAvx2 : Backend::kScalar;
  if (const char* env = std::getenv("CROWDLF_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") b = Backend::kScalar;
    if (want == "avx2" && avx2_available()) b = Backend::kAvx2;
  }
  return b;
}

Backend g_backend = initial_backend();

}  // namespace

const Ops& backend_ops(Backend b) {
#if defined(CROWDLF_HAVE_AVX2)
  if (b == Backend::kAvx2) return avx2::kOps;
#endif
  (void)b;
  return scalar::kOps;
}

const Ops& active() { return backend_ops(g_backend); }

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_available()) b = Backend::kScalar;
  g_backend = b;
}

}  // namespace crowdlf::kernels
