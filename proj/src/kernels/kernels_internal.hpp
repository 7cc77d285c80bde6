#pragma once

#include "mctm/kernels.hpp"

namespace mctm::kernels::detail {

// Defined in kernels_avx2.cpp when MCTM_HAVE_AVX2 is set.
const KernelTable& avx2_table_impl() noexcept;

}  // namespace mctm::kernels::detail
