#pragma once

#include "crowdlf/kernels.hpp"

namespace crowdlf::kernels {
namespace scalar {
extern const Ops kOps;
}
#if defined(CROWDLF_HAVE_AVX2)
namespace avx2 {
extern const Ops kOps;
}
#endif
}  // namespace crowdlf::kernels
