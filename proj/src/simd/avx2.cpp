// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "phantom/simd/kernels.hpp"

namespace phantom::simd {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

// (ar + i ai)(br + i bi) accumulated into (r, m)
inline void cmul_acc(__m256d ar, __m256d ai, __m256d br, __m256d bi, __m256d& r, __m256d& m) {
  r = _mm256_fmadd_pd(ar, br, r);
  r = _mm256_fnmadd_pd(ai, bi, r);
  m = _mm256_fmadd_pd(ar, bi, m);
  m = _mm256_fmadd_pd(ai, br, m);
}

Reductions reduce(const Profiles& p, CView c, std::size_t n) {
  __m256d ar = _mm256_setzero_pd(), ai = ar, br = ar, bi = ar, er = ar, ei = ar, orr = ar, oi = ar;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d cr = _mm256_loadu_pd(c.re + i), ci = _mm256_loadu_pd(c.im + i);
    const __m256d ga = _mm256_loadu_pd(p.gA + i), gb = _mm256_loadu_pd(p.gB + i);
    const __m256d se = _mm256_loadu_pd(p.se + i), so = _mm256_loadu_pd(p.so + i);
    ar = _mm256_fmadd_pd(ga, cr, ar);
    ai = _mm256_fmadd_pd(ga, ci, ai);
    br = _mm256_fmadd_pd(gb, cr, br);
    bi = _mm256_fmadd_pd(gb, ci, bi);
    er = _mm256_fmadd_pd(se, cr, er);
    ei = _mm256_fmadd_pd(se, ci, ei);
    orr = _mm256_fmadd_pd(so, cr, orr);
    oi = _mm256_fmadd_pd(so, ci, oi);
  }
  Reductions r{{hsum(ar), hsum(ai)}, {hsum(br), hsum(bi)}, {hsum(er), hsum(ei)}, {hsum(orr), hsum(oi)}};
  for (; i < n; ++i) {
    r.A.re += p.gA[i] * c.re[i];
    r.A.im += p.gA[i] * c.im[i];
    r.B.re += p.gB[i] * c.re[i];
    r.B.im += p.gB[i] * c.im[i];
    r.E.re += p.se[i] * c.re[i];
    r.E.im += p.se[i] * c.im[i];
    r.O.re += p.so[i] * c.re[i];
    r.O.im += p.so[i] * c.im[i];
  }
  return r;
}

void forcing(const Profiles& p, CView c, Cx X, Cx Y, Cx P, Cx Q, CSpan out, std::size_t n) {
  const __m256d xr = _mm256_set1_pd(X.re), xi = _mm256_set1_pd(X.im);
  const __m256d yr = _mm256_set1_pd(Y.re), yi = _mm256_set1_pd(Y.im);
  const __m256d pr = _mm256_set1_pd(P.re), pi = _mm256_set1_pd(P.im);
  const __m256d qr = _mm256_set1_pd(Q.re), qi = _mm256_set1_pd(Q.im);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ga = _mm256_loadu_pd(p.gA + i), gb = _mm256_loadu_pd(p.gB + i);
    const __m256d se = _mm256_loadu_pd(p.se + i), so = _mm256_loadu_pd(p.so + i);
    const __m256d rr = _mm256_loadu_pd(p.r + i);
    __m256d re = _mm256_mul_pd(rr, _mm256_loadu_pd(c.re + i));
    __m256d im = _mm256_mul_pd(rr, _mm256_loadu_pd(c.im + i));
    re = _mm256_fmadd_pd(ga, xr, re);
    im = _mm256_fmadd_pd(ga, xi, im);
    re = _mm256_fmadd_pd(gb, yr, re);
    im = _mm256_fmadd_pd(gb, yi, im);
    re = _mm256_fmadd_pd(se, pr, re);
    im = _mm256_fmadd_pd(se, pi, im);
    re = _mm256_fmadd_pd(so, qr, re);
    im = _mm256_fmadd_pd(so, qi, im);
    _mm256_storeu_pd(out.re + i, re);
    _mm256_storeu_pd(out.im + i, im);
  }
  for (; i < n; ++i) {
    out.re[i] = p.gA[i] * X.re + p.gB[i] * Y.re + p.se[i] * P.re + p.so[i] * Q.re + p.r[i] * c.re[i];
    out.im[i] = p.gA[i] * X.im + p.gB[i] * Y.im + p.se[i] * P.im + p.so[i] * Q.im + p.r[i] * c.im[i];
  }
}

void stage(CView A, CView x, CView B, CView y, CView z, double alpha, double beta, CSpan out,
           std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha), vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wr = _mm256_fmadd_pd(va, _mm256_loadu_pd(y.re + i),
                                       _mm256_mul_pd(vb, _mm256_loadu_pd(z.re + i)));
    const __m256d wi = _mm256_fmadd_pd(va, _mm256_loadu_pd(y.im + i),
                                       _mm256_mul_pd(vb, _mm256_loadu_pd(z.im + i)));
    __m256d r = _mm256_setzero_pd(), m = _mm256_setzero_pd();
    cmul_acc(_mm256_loadu_pd(A.re + i), _mm256_loadu_pd(A.im + i), _mm256_loadu_pd(x.re + i),
             _mm256_loadu_pd(x.im + i), r, m);
    cmul_acc(_mm256_loadu_pd(B.re + i), _mm256_loadu_pd(B.im + i), wr, wi, r, m);
    _mm256_storeu_pd(out.re + i, r);
    _mm256_storeu_pd(out.im + i, m);
  }
  for (; i < n; ++i) {
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
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d sr = _mm256_add_pd(_mm256_loadu_pd(n2.re + i), _mm256_loadu_pd(n3.re + i));
    const __m256d si = _mm256_add_pd(_mm256_loadu_pd(n2.im + i), _mm256_loadu_pd(n3.im + i));
    __m256d r = _mm256_setzero_pd(), m = _mm256_setzero_pd();
    cmul_acc(_mm256_loadu_pd(E.re + i), _mm256_loadu_pd(E.im + i), _mm256_loadu_pd(u.re + i),
             _mm256_loadu_pd(u.im + i), r, m);
    cmul_acc(_mm256_loadu_pd(F1.re + i), _mm256_loadu_pd(F1.im + i), _mm256_loadu_pd(n1.re + i),
             _mm256_loadu_pd(n1.im + i), r, m);
    cmul_acc(_mm256_loadu_pd(F2.re + i), _mm256_loadu_pd(F2.im + i), sr, si, r, m);
    cmul_acc(_mm256_loadu_pd(F3.re + i), _mm256_loadu_pd(F3.im + i), _mm256_loadu_pd(n4.re + i),
             _mm256_loadu_pd(n4.im + i), r, m);
    _mm256_storeu_pd(out.re + i, r);
    _mm256_storeu_pd(out.im + i, m);
  }
  for (; i < n; ++i) {
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
  const __m256d vat = _mm256_set1_pd(atol), vrt = _mm256_set1_pd(rtol);
  __m256d worst = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ar = _mm256_loadu_pd(a.re + i), ai = _mm256_loadu_pd(a.im + i);
    const __m256d br = _mm256_loadu_pd(b.re + i), bi = _mm256_loadu_pd(b.im + i);
    const __m256d dr = _mm256_sub_pd(ar, br), di = _mm256_sub_pd(ai, bi);
    const __m256d e2 = _mm256_fmadd_pd(dr, dr, _mm256_mul_pd(di, di));
    const __m256d ma = _mm256_fmadd_pd(ar, ar, _mm256_mul_pd(ai, ai));
    const __m256d mb = _mm256_fmadd_pd(br, br, _mm256_mul_pd(bi, bi));
    const __m256d sc = _mm256_fmadd_pd(vrt, _mm256_sqrt_pd(_mm256_max_pd(ma, mb)), vat);
    worst = _mm256_max_pd(worst, _mm256_div_pd(e2, _mm256_mul_pd(sc, sc)));
  }
  double w = hmax(worst);
  for (; i < n; ++i) {
    const double dr = a.re[i] - b.re[i], di = a.im[i] - b.im[i];
    const double ma = a.re[i] * a.re[i] + a.im[i] * a.im[i];
    const double mb = b.re[i] * b.re[i] + b.im[i] * b.im[i];
    const double sc = atol + rtol * std::sqrt(std::max(ma, mb));
    w = std::max(w, (dr * dr + di * di) / (sc * sc));
  }
  return std::sqrt(w);
}

double sumsq(CView c, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(c.re + i), m = _mm256_loadu_pd(c.im + i);
    acc = _mm256_fmadd_pd(r, r, acc);
    acc = _mm256_fmadd_pd(m, m, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += c.re[i] * c.re[i] + c.im[i] * c.im[i];
  return s;
}

}  // namespace

const KernelSet* avx2_kernels() {
  static const KernelSet k{"avx2", reduce, forcing, stage, combine, error_norm, sumsq};
  return &k;
}

}  // namespace phantom::simd
