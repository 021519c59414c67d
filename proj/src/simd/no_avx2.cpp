#include "phantom/simd/kernels.hpp"

namespace phantom::simd {

const KernelSet* avx2_kernels() { return nullptr; }

}  // namespace phantom::simd
