#pragma once

#include "dsflow/simd/kernels.hpp"

namespace dsflow::simd::detail {

const KernelTable& scalar_table();
// Defined only when the AVX2 translation unit is compiled for x86-64.
const KernelTable* avx2_table();

}  // namespace dsflow::simd::detail
