#pragma once

// Inner loops of the amplitude integrator over split real/imaginary arrays.
// Every kernel has a portable reference version and an AVX2/FMA version; the
// two are required to agree to rounding.

#include <cstddef>

namespace phantom::simd {

/// Complex vector stored as two contiguous double arrays.
struct CSpan {
  double* re;
  double* im;
};
struct CView {
  const double* re;
  const double* im;
};

/// Per-mode coupling profiles; se/so are sqrt(cavity fraction) masked to the
/// even/odd modes, r the diagonal part removed from the rank-one loss term.
struct Profiles {
  const double* gA;
  const double* gB;
  const double* se;
  const double* so;
  const double* r;
};

/// Complex scalar pair used for the kernel arguments.
struct Cx {
  double re = 0.0, im = 0.0;
};

/// Sums over modes of gA c, gB c, se c, so c.
struct Reductions {
  Cx A, B, E, O;
};

struct KernelSet {
  const char* name;

  Reductions (*reduce)(const Profiles& p, CView c, std::size_t n);

  /// out_i = gA_i X + gB_i Y + se_i P + so_i Q + r_i c_i
  void (*forcing)(const Profiles& p, CView c, Cx X, Cx Y, Cx P, Cx Q, CSpan out, std::size_t n);

  /// out_i = A_i x_i + B_i (alpha y_i + beta z_i); A, B complex per mode.
  void (*stage)(CView A, CView x, CView B, CView y, CView z, double alpha, double beta, CSpan out,
                std::size_t n);

  /// out_i = E_i u_i + F1_i n1_i + F2_i (n2_i + n3_i) + F3_i n4_i
  void (*combine)(CView E, CView u, CView F1, CView n1, CView F2, CView n2, CView n3, CView F3,
                  CView n4, CSpan out, std::size_t n);

  /// max_i |a_i - b_i| / (atol + rtol max(|a_i|, |b_i|))
  double (*error_norm)(CView a, CView b, double atol, double rtol, std::size_t n);

  /// sum_i |c_i|^2
  double (*sumsq)(CView c, std::size_t n);
};

enum class Isa { automatic, scalar, avx2 };

const KernelSet& scalar_kernels();
/// nullptr when the build has no AVX2 variant.
const KernelSet* avx2_kernels();
bool cpu_has_avx2();
/// Throws ValidationError if avx2 is requested but unavailable.
const KernelSet& select_kernels(Isa isa = Isa::automatic);

}  // namespace phantom::simd
