#pragma once

#include "upsilon/kernels.hpp"

namespace upsilon::kernels::detail {

extern const KernelTable kScalarTable;

#ifdef UPSILON_HAVE_AVX2
extern const KernelTable kAvx2Table;
#endif

}  // namespace upsilon::kernels::detail
