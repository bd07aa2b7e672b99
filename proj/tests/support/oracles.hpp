// Independent numeric oracles used to verify library results. These must not
// share code with the implementation paths they check.
#pragma once

#include <quadmath.h>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

// Classic cyclic Jacobi eigensolver for symmetric 3x3 matrices; returns
// eigenvalues in descending order.
inline std::array<double, 3> jacobi_eigenvalues3(std::array<std::array<double, 3>, 3> m) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += m[p][q] * m[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(m[p][q]) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * m[p][q], m[q][q] - m[p][p]);
        const double c = std::cos(theta), s = std::sin(theta);
        std::array<std::array<double, 3>, 3> r{};
        for (int i = 0; i < 3; ++i) r[i][i] = 1.0;
        r[p][p] = c;
        r[q][q] = c;
        r[p][q] = s;
        r[q][p] = -s;
        // m = r^T m r
        std::array<std::array<double, 3>, 3> t{};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) t[i][j] += r[k][i] * m[k][j];
        std::array<std::array<double, 3>, 3> out{};
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) out[i][j] += t[i][k] * r[k][j];
        m = out;
      }
    }
  }
  std::array<double, 3> ev = {m[0][0], m[1][1], m[2][2]};
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  return ev;
}

// Bisection root finder on a bracketing interval.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  if (flo * f(hi) > 0.0) throw std::runtime_error("bisect: interval does not bracket a root");
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0)
      hi = mid;
    else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

// Ridders' polynomial-extrapolated central differences: successively shrinks
// the step and extrapolates, returning the estimate whose extrapolation error
// is smallest. Far more step-size tolerant than a single central difference.
// Long-double evaluation pushes the rounding floor well below what badly
// conditioned double-precision targets allow.
template <typename Scalar = double, typename Fn>
Scalar ridders_derivative(const Fn& f, Scalar x, Scalar h0) {
  constexpr int kTab = 10;
  const Scalar kCon = Scalar(1.4), kCon2 = kCon * kCon;
  Scalar a[kTab][kTab];
  Scalar h = h0;
  a[0][0] = (f(x + h) - f(x - h)) / (Scalar(2) * h);
  Scalar best = a[0][0];
  Scalar err = Scalar(1e300);
  for (int i = 1; i < kTab; ++i) {
    h /= kCon;
    a[0][i] = (f(x + h) - f(x - h)) / (Scalar(2) * h);
    Scalar fac = kCon2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - Scalar(1));
      fac *= kCon2;
      const Scalar e = std::max(std::abs(a[j][i] - a[j - 1][i]),
                                std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= Scalar(2) * err) break;
  }
  return best;
}

// Quad-precision independent implementation of the closed-form 2x2
// eigendecomposition loss L = <dQ, Q(m)> + <dS, diag(S(m)^s)>, plus a
// Ridders derivative over it. Deliberately does not reuse the library
// decomposition; at condition 1e6 even long-double differences of the
// library path hit a rounding floor above the 1e-6 comparison bound.
inline __float128 eigen_loss_quad(const double dQ[2][2], const double dS0, const double dS1,
                                  __float128 a, __float128 b, __float128 c, double s) {
  const __float128 half = 0.5Q;
  const __float128 lam1 = half * (a + c) + half * sqrtq((a - c) * (a - c) + 4.0Q * b * b);
  const __float128 lam2 = half * (a + c) - half * sqrtq((a - c) * (a - c) + 4.0Q * b * b);
  const __float128 theta = half * atan2q(2.0Q * b, a - c);
  const __float128 ct = cosq(theta), st = sinq(theta);
  __float128 acc = 0;
  acc += (__float128)dQ[0][0] * ct + (__float128)dQ[0][1] * (-st);
  acc += (__float128)dQ[1][0] * st + (__float128)dQ[1][1] * ct;
  acc += (__float128)dS0 * powq(lam1, (__float128)s);
  acc += (__float128)dS1 * powq(lam2, (__float128)s);
  return acc;
}

template <typename Fn>
double ridders_derivative_quad(const Fn& f, double x0, double h0) {
  constexpr int kTab = 12;
  const __float128 kCon = 1.4Q, kCon2 = kCon * kCon;
  const __float128 x = x0;
  __float128 a[kTab][kTab];
  __float128 h = h0;
  a[0][0] = (f(x + h) - f(x - h)) / (2.0Q * h);
  __float128 best = a[0][0];
  __float128 err = 1e300Q;
  for (int i = 1; i < kTab; ++i) {
    h /= kCon;
    a[0][i] = (f(x + h) - f(x - h)) / (2.0Q * h);
    __float128 fac = kCon2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0Q);
      fac *= kCon2;
      const __float128 e =
          std::max(fabsq(a[j][i] - a[j - 1][i]), fabsq(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (fabsq(a[i][i] - a[i - 1][i - 1]) >= 2.0Q * err) break;
  }
  return static_cast<double>(best);
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double fm, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps) return left + right;
  return simpson(f, a, m, fa, fm, flm, 0.5 * eps, depth - 1) +
         simpson(f, m, b, fm, fb, frm, 0.5 * eps, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-8) {
  const double m = 0.5 * (a + b);
  return simpson(f, a, b, f(a), f(b), f(m), eps, 48);
}

}  // namespace oracles
