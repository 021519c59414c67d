#include <algorithm>
#include <cmath>

#include "phantom/errors.hpp"
#include "phantom/simd/kernels.hpp"

namespace phantom::simd {

namespace {

Reductions reduce(const Profiles& p, CView c, std::size_t n) {
  Reductions r;
  for (std::size_t i = 0; i < n; ++i) {
    const double cr = c.re[i], ci = c.im[i];
    r.A.re += p.gA[i] * cr;
    r.A.im += p.gA[i] * ci;
    r.B.re += p.gB[i] * cr;
    r.B.im += p.gB[i] * ci;
    r.E.re += p.se[i] * cr;
    r.E.im += p.se[i] * ci;
    r.O.re += p.so[i] * cr;
    r.O.im += p.so[i] * ci;
  }
  return r;
}

void forcing(const Profiles& p, CView c, Cx X, Cx Y, Cx P, Cx Q, CSpan out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out.re[i] = p.gA[i] * X.re + p.gB[i] * Y.re + p.se[i] * P.re + p.so[i] * Q.re + p.r[i] * c.re[i];
    out.im[i] = p.gA[i] * X.im + p.gB[i] * Y.im + p.se[i] * P.im + p.so[i] * Q.im + p.r[i] * c.im[i];
  }
}

void stage(CView A, CView x, CView B, CView y, CView z, double alpha, double beta, CSpan out,
           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double wr = alpha * y.re[i] + beta * z.re[i];
    const double wi = alpha * y.im[i] + beta * z.im[i];
    const double r = A.re[i] * x.re[i] - A.im[i] * x.im[i] + B.re[i] * wr - B.im[i] * wi;
    const double m = A.re[i] * x.im[i] + A.im[i] * x.re[i] + B.re[i] * wi + B.im[i] * wr;
    out.re[i] = r;
    out.im[i] = m;
  }
}

void combine(CView E, CView u, CView F1, CView n1, CView F2, CView n2, CView n3, CView F3, CView n4,
             CSpan out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double sr = n2.re[i] + n3.re[i], si = n2.im[i] + n3.im[i];
    double r = E.re[i] * u.re[i] - E.im[i] * u.im[i];
    double m = E.re[i] * u.im[i] + E.im[i] * u.re[i];
    r += F1.re[i] * n1.re[i] - F1.im[i] * n1.im[i];
    m += F1.re[i] * n1.im[i] + F1.im[i] * n1.re[i];
    r += F2.re[i] * sr - F2.im[i] * si;
    m += F2.re[i] * si + F2.im[i] * sr;
    r += F3.re[i] * n4.re[i] - F3.im[i] * n4.im[i];
    m += F3.re[i] * n4.im[i] + F3.im[i] * n4.re[i];
    out.re[i] = r;
    out.im[i] = m;
  }
}

double error_norm(CView a, CView b, double atol, double rtol, std::size_t n) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = a.re[i] - b.re[i], di = a.im[i] - b.im[i];
    const double e2 = dr * dr + di * di;
    const double ma = a.re[i] * a.re[i] + a.im[i] * a.im[i];
    const double mb = b.re[i] * b.re[i] + b.im[i] * b.im[i];
    const double sc = atol + rtol * std::sqrt(std::max(ma, mb));
    worst = std::max(worst, e2 / (sc * sc));
  }
  return std::sqrt(worst);
}

double sumsq(CView c, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += c.re[i] * c.re[i] + c.im[i] * c.im[i];
  return s;
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet k{"scalar", reduce, forcing, stage, combine, error_norm, sumsq};
  return k;
}

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelSet& select_kernels(Isa isa) {
  const KernelSet* v = avx2_kernels();
  switch (isa) {
    case Isa::scalar:
      return scalar_kernels();
    case Isa::avx2:
      if (!v || !cpu_has_avx2()) throw ValidationError("AVX2 kernels requested but not available");
      return *v;
    case Isa::automatic:
      break;
  }
  return (v && cpu_has_avx2()) ? *v : scalar_kernels();
}

}  // namespace phantom::simd
