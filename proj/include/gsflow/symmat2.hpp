#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace gsflow {

// 2x2 symmetric matrix [[a, b], [b, c]]. Matrices entering eigendecompose
// must be SPD; gradients returned in (a, b, c) coordinates treat b as the
// single parameter behind both off-diagonal entries.
template <typename Scalar>
struct SymMat2T {
  Scalar a = Scalar(1);
  Scalar b = Scalar(0);
  Scalar c = Scalar(1);

  Eigen::Matrix<Scalar, 2, 2> matrix() const {
    Eigen::Matrix<Scalar, 2, 2> m;
    m << a, b, b, c;
    return m;
  }

  Scalar det() const { return a * c - b * b; }

  SymMat2T inverse() const {
    const Scalar d = det();
    return SymMat2T{c / d, -b / d, a / d};
  }

  static SymMat2T from_matrix(const Eigen::Matrix<Scalar, 2, 2>& m) {
    return SymMat2T{m(0, 0), Scalar(0.5) * (m(0, 1) + m(1, 0)), m(1, 1)};
  }
};

// Q is a rotation (det +1, first eigenvector with nonnegative x component by
// the half-angle atan2 range); eigenvalues sorted lambda1 >= lambda2.
template <typename Scalar>
struct EigenDecomp2T {
  Eigen::Matrix<Scalar, 2, 2> Q;
  Eigen::Matrix<Scalar, 2, 1> S;
  Scalar theta;         // eigenvector angle, Q = rot(theta)
  bool degenerate_gap;  // isotropic input: Q forced to identity
};

template <typename Scalar>
struct MatPowHalfT {
  Eigen::Matrix<Scalar, 2, 2> M;
};

using SymMat2 = SymMat2T<double>;
using EigenDecomp2 = EigenDecomp2T<double>;
using MatPowHalf = MatPowHalfT<double>;

// Gap below which the matrix is treated as isotropic: any eigenbasis is
// valid there and Sigma^{+-1/2} reduces to sqrt(lambda)*I, so Q is pinned to
// identity and the eigenvector path carries no gradient.
template <typename Scalar>
bool eigen_gap_degenerate(const SymMat2T<Scalar>& m) {
  const Scalar gap2 = (m.a - m.c) * (m.a - m.c) + Scalar(4) * m.b * m.b;
  const Scalar tr = m.a + m.c;
  return gap2 < Scalar(1e-18) * tr * tr;
}

// Closed form: lambda_{1,2} = ((a+c) +- sqrt((a-c)^2 + 4b^2)) / 2,
// theta = atan2(2b, a-c) / 2.
template <typename Scalar>
EigenDecomp2T<Scalar> eigendecompose(const SymMat2T<Scalar>& m) {
  if (!(m.a > Scalar(0)) || !(m.c > Scalar(0)) || !(m.det() > Scalar(0)))
    throw std::domain_error("eigendecompose: matrix is not SPD");

  EigenDecomp2T<Scalar> d;
  const Scalar half_tr = Scalar(0.5) * (m.a + m.c);
  const Scalar half_gap = Scalar(0.5) * std::sqrt((m.a - m.c) * (m.a - m.c) + Scalar(4) * m.b * m.b);
  d.S << half_tr + half_gap, half_tr - half_gap;

  if (eigen_gap_degenerate(m)) {
    d.theta = Scalar(0);
    d.Q.setIdentity();
    d.degenerate_gap = true;
    return d;
  }
  d.theta = Scalar(0.5) * std::atan2(Scalar(2) * m.b, m.a - m.c);
  const Scalar ct = std::cos(d.theta);
  const Scalar st = std::sin(d.theta);
  d.Q << ct, -st, st, ct;
  d.degenerate_gap = false;
  return d;
}

// Q diag(S^s) Q^T for s in {+1/2, -1/2}.
template <typename Scalar>
MatPowHalfT<Scalar> mat_pow_half(const EigenDecomp2T<Scalar>& d, Scalar s) {
  if (d.S(1) < Scalar(1e-12))
    throw std::domain_error("mat_pow_half: degenerate covariance (eigenvalue below 1e-12)");
  Eigen::Matrix<Scalar, 2, 1> p(std::pow(d.S(0), s), std::pow(d.S(1), s));
  MatPowHalfT<Scalar> out;
  out.M = d.Q * p.asDiagonal() * d.Q.transpose();
  return out;
}

template <typename Scalar>
struct SymMat2Grad {
  Scalar da = Scalar(0);
  Scalar db = Scalar(0);
  Scalar dc = Scalar(0);

  SymMat2Grad& operator+=(const SymMat2Grad& o) {
    da += o.da; db += o.db; dc += o.dc;
    return *this;
  }

  // Unconstrained full-matrix representative: [[da, db/2], [db/2, dc]].
  Eigen::Matrix<Scalar, 2, 2> full() const {
    Eigen::Matrix<Scalar, 2, 2> g;
    g << da, Scalar(0.5) * db, Scalar(0.5) * db, dc;
    return g;
  }

  static SymMat2Grad from_full(const Eigen::Matrix<Scalar, 2, 2>& g) {
    return SymMat2Grad{g(0, 0), g(0, 1) + g(1, 0), g(1, 1)};
  }
};

// Pulls upstream gradients on (Q, S^s) back to the matrix entries. The
// eigenvalue path uses d(lambda_k)/dm = v_k v_k^T with the inner derivative
// s*lambda^{s-1}; the eigenvector path goes through the closed-form angle,
// using a - c = gap*cos(2 theta) and 2b = gap*sin(2 theta).
// Off-diagonal entries of dL_dSpow are ignored: S^s is constrained diagonal.
template <typename Scalar>
SymMat2Grad<Scalar> backprop_eigen(const Eigen::Matrix<Scalar, 2, 2>& dL_dQ,
                                   const Eigen::Matrix<Scalar, 2, 2>& dL_dSpow,
                                   const EigenDecomp2T<Scalar>& d, Scalar s) {
  SymMat2Grad<Scalar> g;

  for (int k = 0; k < 2; ++k) {
    const Scalar lam = std::max(d.S(k), Scalar(1e-12));
    const Scalar dL_dlam = dL_dSpow(k, k) * s * std::pow(lam, s - Scalar(1));
    const Eigen::Matrix<Scalar, 2, 1> v = d.Q.col(k);
    g.da += dL_dlam * v(0) * v(0);
    g.db += dL_dlam * Scalar(2) * v(0) * v(1);
    g.dc += dL_dlam * v(1) * v(1);
  }

  if (!d.degenerate_gap) {
    // dQ/dtheta = [[-sin, -cos], [cos, -sin]]
    const Scalar ct = std::cos(d.theta);
    const Scalar st = std::sin(d.theta);
    const Scalar dL_dtheta = dL_dQ(0, 0) * (-st) + dL_dQ(0, 1) * (-ct) +
                             dL_dQ(1, 0) * ct + dL_dQ(1, 1) * (-st);
    const Scalar gap = d.S(0) - d.S(1);
    const Scalar s2t = std::sin(Scalar(2) * d.theta);
    const Scalar c2t = std::cos(Scalar(2) * d.theta);
    g.da += dL_dtheta * (-s2t / (Scalar(2) * gap));
    g.db += dL_dtheta * (c2t / gap);
    g.dc += dL_dtheta * (s2t / (Scalar(2) * gap));
  }
  return g;
}

}  // namespace gsflow
