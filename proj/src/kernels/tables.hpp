#pragma once

#include "phonoflux/kernels/kernels.hpp"

namespace phonoflux::kernels {

#if defined(PHONOFLUX_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif
#if defined(PHONOFLUX_HAVE_NEON_TU)
const KernelTable& neon_table();
#endif

}  // namespace phonoflux::kernels
