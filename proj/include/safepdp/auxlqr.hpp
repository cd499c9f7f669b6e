/*
 Copyright 2026 The safepdp authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef SAFEPDP_AUXLQR_HPP
#define SAFEPDP_AUXLQR_HPP

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <string>
#include <vector>

#include "safepdp/barrier.hpp"
#include "safepdp/ocp.hpp"

namespace safepdp {

// Time-indexed coefficients of the auxiliary control system: an (equality
// constrained) LQR in matrix unknowns X_t (n x r), U_t (m x r) whose unique
// minimizing trajectory is the derivative of the source trajectory with
// respect to the parameters. Gx/Gu/Gth hold the active-inequality rows,
// Hx/Hu/Hth the equality rows; both are empty for barrier-built systems.
struct AuxLqr {
  int T = 0, n = 0, m = 0, r = 0;
  std::vector<Matrix> Lxx, Lxu, Luu, Lxth, Luth;  // t = 0..T-1
  std::vector<Matrix> Fx, Fu, Fth;                // t = 0..T-1
  Matrix LxxT, LxthT;
  Matrix X0;  // n x r, derivative of the initial state

  std::vector<Matrix> Gx, Gu, Gth;  // active inequality rows per t
  std::vector<Matrix> Hx, Hu, Hth;  // equality rows per t
  Matrix GxT, GthT, HxT, HthT;

  bool has_equalities() const {
    if (GxT.rows() > 0 || HxT.rows() > 0) return true;
    for (int t = 0; t < T; ++t)
      if ((!Gx.empty() && Gx[t].rows() > 0) ||
          (!Hx.empty() && Hx[t].rows() > 0))
        return true;
    return false;
  }

  // Accessors tolerating unset constraint-block vectors.
  Matrix stage_block(const std::vector<Matrix>& v, int t, int cols) const {
    if (v.empty() || v[t].rows() == 0) return Matrix(0, cols);
    return v[t];
  }
  Matrix cGx(int t) const { return stage_block(Gx, t, n); }
  Matrix cGu(int t) const { return stage_block(Gu, t, m); }
  Matrix cGth(int t) const { return stage_block(Gth, t, r); }
  Matrix cHx(int t) const { return stage_block(Hx, t, n); }
  Matrix cHu(int t) const { return stage_block(Hu, t, m); }
  Matrix cHth(int t) const { return stage_block(Hth, t, r); }
  Matrix cGxT() const { return GxT.rows() > 0 ? GxT : Matrix(0, n); }
  Matrix cGthT() const { return GthT.rows() > 0 ? GthT : Matrix(0, r); }
  Matrix cHxT() const { return HxT.rows() > 0 ? HxT : Matrix(0, n); }
  Matrix cHthT() const { return HthT.rows() > 0 ? HthT : Matrix(0, r); }
};

// X_t = dx_t/dtheta (n x r) and U_t = du_t/dtheta (m x r).
struct TrajectoryGradient {
  std::vector<Matrix> X;  // T+1 entries
  std::vector<Matrix> U;  // T entries

  // Row-stacked [X_0; ...; X_T; U_0; ...; U_{T-1}], ordered like
  // Trajectory::flatten().
  Matrix stacked() const {
    Eigen::Index rows = 0;
    for (const auto& x : X) rows += x.rows();
    for (const auto& u : U) rows += u.rows();
    Matrix out(rows, X[0].cols());
    Eigen::Index at = 0;
    for (const auto& x : X) {
      out.middleRows(at, x.rows()) = x;
      at += x.rows();
    }
    for (const auto& u : U) {
      out.middleRows(at, u.rows()) = u;
      at += u.rows();
    }
    return out;
  }

  // Directional trajectory change for a parameter step, flattened like
  // Trajectory::flatten().
  Vector apply(const Vector& dtheta) const {
    Eigen::Index total = 0;
    for (const auto& x : X) total += x.rows();
    for (const auto& u : U) total += u.rows();
    Vector out(total);
    Eigen::Index at = 0;
    for (const auto& x : X) {
      out.segment(at, x.rows()) = x * dtheta;
      at += x.rows();
    }
    for (const auto& u : U) {
      out.segment(at, u.rows()) = u * dtheta;
      at += u.rows();
    }
    return out;
  }
};

namespace detail {

inline Matrix select_rows(const Matrix& full, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), full.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = full.row(rows[i]);
  return out;
}

}  // namespace detail

// Coefficients of the equality-constrained auxiliary system at a KKT point
// of the constrained problem: Hamiltonian second derivatives with the given
// multipliers, dynamics first derivatives, and the linearizations of the
// binding constraints (all equalities plus the active inequality rows).
inline AuxLqr build_aux_constrained(const ProblemSpec& spec,
                                    const Vector& theta, const Trajectory& traj,
                                    const Multipliers& mult,
                                    const ActiveSet& active) {
  AuxLqr aux;
  aux.T = spec.T;
  aux.n = spec.n;
  aux.m = spec.m;
  aux.r = spec.r;
  aux.Lxx.resize(spec.T);
  aux.Lxu.resize(spec.T);
  aux.Luu.resize(spec.T);
  aux.Lxth.resize(spec.T);
  aux.Luth.resize(spec.T);
  aux.Fx.resize(spec.T);
  aux.Fu.resize(spec.T);
  aux.Fth.resize(spec.T);
  aux.Gx.resize(spec.T);
  aux.Gu.resize(spec.T);
  aux.Gth.resize(spec.T);
  aux.Hx.resize(spec.T);
  aux.Hu.resize(spec.T);
  aux.Hth.resize(spec.T);

  for (int t = 0; t < spec.T; ++t) {
    const Point p{traj.states[t], traj.controls[t], theta};
    const ScalarFn ham = detail::stage_hamiltonian(
        spec, t, mult.costate[t + 1], mult.ineq[t], mult.eq[t]);
    aux.Lxx[t] = hessian_block(ham, p, Wrt::kX, Wrt::kX, "hamiltonian");
    aux.Lxu[t] = hessian_block(ham, p, Wrt::kX, Wrt::kU, "hamiltonian");
    aux.Luu[t] = hessian_block(ham, p, Wrt::kU, Wrt::kU, "hamiltonian");
    aux.Lxth[t] = hessian_block(ham, p, Wrt::kX, Wrt::kTheta, "hamiltonian");
    aux.Luth[t] = hessian_block(ham, p, Wrt::kU, Wrt::kTheta, "hamiltonian");
    aux.Fx[t] = jacobian(spec.dynamics, p, Wrt::kX, "dynamics");
    aux.Fu[t] = jacobian(spec.dynamics, p, Wrt::kU, "dynamics");
    aux.Fth[t] = jacobian(spec.dynamics, p, Wrt::kTheta, "dynamics");

    VecFn g = [&spec, t](const HdVector& x, const HdVector& u,
                         const HdVector& th) {
      return spec.path_ineq.fn(t, x, u, th);
    };
    VecFn h = [&spec, t](const HdVector& x, const HdVector& u,
                         const HdVector& th) {
      return spec.path_eq.fn(t, x, u, th);
    };
    const std::vector<int>& act = active.indices[t];
    if (!act.empty()) {
      aux.Gx[t] = detail::select_rows(jacobian(g, p, Wrt::kX, "g"), act);
      aux.Gu[t] = detail::select_rows(jacobian(g, p, Wrt::kU, "g"), act);
      aux.Gth[t] = detail::select_rows(jacobian(g, p, Wrt::kTheta, "g"), act);
    } else {
      aux.Gx[t].resize(0, spec.n);
      aux.Gu[t].resize(0, spec.m);
      aux.Gth[t].resize(0, spec.r);
    }
    if (spec.path_eq.dim(t) > 0) {
      aux.Hx[t] = jacobian(h, p, Wrt::kX, "h");
      aux.Hu[t] = jacobian(h, p, Wrt::kU, "h");
      aux.Hth[t] = jacobian(h, p, Wrt::kTheta, "h");
    } else {
      aux.Hx[t].resize(0, spec.n);
      aux.Hu[t].resize(0, spec.m);
      aux.Hth[t].resize(0, spec.r);
    }
  }

  const Point pT{traj.states[spec.T], Vector(0), theta};
  const ScalarFn hamT = detail::terminal_hamiltonian(
      spec, mult.ineq[spec.T], mult.eq[spec.T]);
  aux.LxxT = hessian_block(hamT, pT, Wrt::kX, Wrt::kX, "terminal hamiltonian");
  aux.LxthT =
      hessian_block(hamT, pT, Wrt::kX, Wrt::kTheta, "terminal hamiltonian");

  VecFn gT = [&spec](const HdVector& x, const HdVector&, const HdVector& th) {
    return spec.term_ineq.fn(x, th);
  };
  VecFn hT = [&spec](const HdVector& x, const HdVector&, const HdVector& th) {
    return spec.term_eq.fn(x, th);
  };
  const std::vector<int>& actT = active.indices[spec.T];
  if (!actT.empty()) {
    aux.GxT = detail::select_rows(jacobian(gT, pT, Wrt::kX, "g_T"), actT);
    aux.GthT = detail::select_rows(jacobian(gT, pT, Wrt::kTheta, "g_T"), actT);
  } else {
    aux.GxT.resize(0, spec.n);
    aux.GthT.resize(0, spec.r);
  }
  if (spec.term_eq.dim > 0) {
    aux.HxT = jacobian(hT, pT, Wrt::kX, "h_T");
    aux.HthT = jacobian(hT, pT, Wrt::kTheta, "h_T");
  } else {
    aux.HxT.resize(0, spec.n);
    aux.HthT.resize(0, spec.r);
  }

  VecFn x0 = [&spec](const HdVector&, const HdVector&, const HdVector& th) {
    return spec.initial_state(th);
  };
  aux.X0 = jacobian(x0, Point{Vector(0), Vector(0), theta}, Wrt::kTheta,
                    "initial state");
  return aux;
}

// Coefficients of the unconstrained auxiliary system at a barrier-optimal
// trajectory: Hamiltonians of the composite cost, no equality blocks. The
// costates come from the perturbed-KKT multiplier recovery, under which the
// barrier and constrained Hamiltonian gradients coincide.
inline AuxLqr build_aux_barrier(const BarrierSpec& bar, const Vector& theta,
                                const Trajectory& traj) {
  const ProblemSpec& base = bar.base;
  const Multipliers mult = recover_multipliers(base, theta, traj, bar.gamma);

  AuxLqr aux;
  aux.T = base.T;
  aux.n = base.n;
  aux.m = base.m;
  aux.r = base.r;
  aux.Lxx.resize(base.T);
  aux.Lxu.resize(base.T);
  aux.Luu.resize(base.T);
  aux.Lxth.resize(base.T);
  aux.Luth.resize(base.T);
  aux.Fx.resize(base.T);
  aux.Fu.resize(base.T);
  aux.Fth.resize(base.T);
  aux.Gx.resize(base.T);
  aux.Gu.resize(base.T);
  aux.Gth.resize(base.T);
  aux.Hx.resize(base.T);
  aux.Hu.resize(base.T);
  aux.Hth.resize(base.T);

  for (int t = 0; t < base.T; ++t) {
    const Point p{traj.states[t], traj.controls[t], theta};
    const HdVector lam = lift(mult.costate[t + 1]);
    ScalarFn ham = [&bar, t, lam](const HdVector& x, const HdVector& u,
                                  const HdVector& th) {
      HyperDual acc = bar.stage_cost(t, x, u, th);
      const HdVector f = bar.base.dynamics(x, u, th);
      for (Eigen::Index i = 0; i < f.size(); ++i) acc += lam[i] * f[i];
      return acc;
    };
    aux.Lxx[t] = hessian_block(ham, p, Wrt::kX, Wrt::kX, "barrier hamiltonian");
    aux.Lxu[t] = hessian_block(ham, p, Wrt::kX, Wrt::kU, "barrier hamiltonian");
    aux.Luu[t] = hessian_block(ham, p, Wrt::kU, Wrt::kU, "barrier hamiltonian");
    aux.Lxth[t] =
        hessian_block(ham, p, Wrt::kX, Wrt::kTheta, "barrier hamiltonian");
    aux.Luth[t] =
        hessian_block(ham, p, Wrt::kU, Wrt::kTheta, "barrier hamiltonian");
    aux.Fx[t] = jacobian(base.dynamics, p, Wrt::kX, "dynamics");
    aux.Fu[t] = jacobian(base.dynamics, p, Wrt::kU, "dynamics");
    aux.Fth[t] = jacobian(base.dynamics, p, Wrt::kTheta, "dynamics");
    aux.Gx[t].resize(0, base.n);
    aux.Gu[t].resize(0, base.m);
    aux.Gth[t].resize(0, base.r);
    aux.Hx[t].resize(0, base.n);
    aux.Hu[t].resize(0, base.m);
    aux.Hth[t].resize(0, base.r);
  }

  const Point pT{traj.states[base.T], Vector(0), theta};
  ScalarFn hamT = [&bar](const HdVector& x, const HdVector&,
                         const HdVector& th) { return bar.final_cost(x, th); };
  aux.LxxT = hessian_block(hamT, pT, Wrt::kX, Wrt::kX, "barrier final cost");
  aux.LxthT =
      hessian_block(hamT, pT, Wrt::kX, Wrt::kTheta, "barrier final cost");
  aux.GxT.resize(0, base.n);
  aux.GthT.resize(0, base.r);
  aux.HxT.resize(0, base.n);
  aux.HthT.resize(0, base.r);

  VecFn x0 = [&base](const HdVector&, const HdVector&, const HdVector& th) {
    return base.initial_state(th);
  };
  aux.X0 = jacobian(x0, Point{Vector(0), Vector(0), theta}, Wrt::kTheta,
                    "initial state");
  return aux;
}

namespace detail {

inline Matrix vstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols() > 0 ? a.cols() : b.cols());
  if (a.rows() > 0) out.topRows(a.rows()) = a;
  if (b.rows() > 0) out.bottomRows(b.rows()) = b;
  return out;
}

inline Eigen::LLT<Matrix> chol_with_floor(Matrix a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    a += 1e-10 * Matrix::Identity(a.rows(), a.cols());
    llt.compute(a);
    if (llt.info() != Eigen::Success)
      throw SingularLuu(std::string(what) +
                        ": control Hessian singular after regularization floor");
  }
  return llt;
}

struct ConstraintToGo {
  Matrix Hx;   // rows x n
  Matrix hth;  // rows x r
};

// Keep an independent row basis of the pending constraints. A row whose
// state coefficients vanish but whose affine part does not can never be
// satisfied, which surfaces here as a rank jump when the affine columns are
// appended.
inline ConstraintToGo compress_constraints(const Matrix& Hx, const Matrix& hth) {
  ConstraintToGo out{Hx, hth};
  if (Hx.rows() == 0) return out;
  Matrix stacked(Hx.rows(), Hx.cols() + hth.cols());
  stacked << Hx, hth;
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullU);
  const double tol = std::max(stacked.rows(), stacked.cols()) * 1e-13 *
                     (svd.singularValues().size() > 0
                          ? svd.singularValues()[0]
                          : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++rank;
  const Matrix basis =
      svd.matrixU().leftCols(rank).transpose() * stacked;  // rank x (n+r)
  out.Hx = basis.leftCols(Hx.cols());
  out.hth = basis.rightCols(hth.cols());

  Eigen::JacobiSVD<Matrix> svd_x(out.Hx);
  const double tol_x =
      std::max(out.Hx.rows(), out.Hx.cols()) * 1e-13 *
      (svd_x.singularValues().size() > 0 ? svd_x.singularValues()[0] : 0.0);
  Eigen::Index rank_x = 0;
  for (Eigen::Index i = 0; i < svd_x.singularValues().size(); ++i)
    if (svd_x.singularValues()[i] > tol_x) ++rank_x;
  if (rank_x < rank)
    throw InconsistentEqualities(
        "solve_aux: pending equality rows have no state dependence but a "
        "nonzero affine part");
  return out;
}

}  // namespace detail

// Global minimizer of the auxiliary system. Without equality blocks this is
// the affine Riccati recursion with r right-hand sides; with equality blocks
// the backward pass splits each control into a constraint-determined part
// and a free null-space part, propagating unresolved rows to earlier steps.
// Runtime is linear in the horizon.
inline TrajectoryGradient solve_aux(const AuxLqr& aux) {
  const int T = aux.T, n = aux.n, m = aux.m, r = aux.r;
  require(T >= 1 && n >= 1 && m >= 1, "solve_aux: empty system");

  std::vector<Matrix> Kgain(T), dterm(T);
  Matrix P = aux.LxxT;
  Matrix s = aux.LxthT;
  detail::ConstraintToGo ctg{detail::vstack(aux.cGxT(), aux.cHxT()),
                             detail::vstack(aux.cGthT(), aux.cHthT())};
  ctg = detail::compress_constraints(ctg.Hx, ctg.hth);

  for (int t = T - 1; t >= 0; --t) {
    const Matrix& A = aux.Fx[t];
    const Matrix& B = aux.Fu[t];
    const Matrix& cth = aux.Fth[t];

    const Matrix Quu = aux.Luu[t] + B.transpose() * P * B;
    const Matrix Qux = aux.Lxu[t].transpose() + B.transpose() * P * A;
    const Matrix Qxx = aux.Lxx[t] + A.transpose() * P * A;
    const Matrix qu = aux.Luth[t] + B.transpose() * (P * cth + s);
    const Matrix qx = aux.Lxth[t] + A.transpose() * (P * cth + s);

    const Matrix Cx = detail::vstack(detail::vstack(aux.cGx(t), aux.cHx(t)),
                                     ctg.Hx * A);
    const Matrix Cu = detail::vstack(detail::vstack(aux.cGu(t), aux.cHu(t)),
                                     ctg.Hx * B);
    const Matrix Cth = detail::vstack(detail::vstack(aux.cGth(t), aux.cHth(t)),
                                      ctg.Hx * cth + ctg.hth);
    const Eigen::Index k = Cu.rows();

    Matrix K, d;
    if (k == 0) {
      auto llt = detail::chol_with_floor(Quu, "solve_aux");
      K = -llt.solve(Qux);
      d = -llt.solve(qu);
      ctg.Hx.resize(0, n);
      ctg.hth.resize(0, r);
    } else {
      Eigen::JacobiSVD<Matrix> svd(Cu, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const double tol =
          std::max(Cu.rows(), Cu.cols()) * 1e-13 *
          (svd.singularValues().size() > 0 ? svd.singularValues()[0] : 0.0);
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > tol) ++rank;

      const Matrix U1 = svd.matrixU().leftCols(rank);
      const Matrix U2 = svd.matrixU().rightCols(k - rank);
      const Matrix V1 = svd.matrixV().leftCols(rank);
      const Matrix N = svd.matrixV().rightCols(m - rank);
      const Vector sig_inv =
          svd.singularValues().head(rank).cwiseInverse();

      const Matrix pinv = V1 * sig_inv.asDiagonal() * U1.transpose();
      const Matrix Kc = -pinv * Cx;
      const Matrix dc = -pinv * Cth;

      if (N.cols() > 0) {
        const Matrix Hzz = N.transpose() * Quu * N;
        auto llt = detail::chol_with_floor(Hzz, "solve_aux");
        const Matrix Kz = -llt.solve(N.transpose() * (Quu * Kc + Qux));
        const Matrix dz = -llt.solve(N.transpose() * (Quu * dc + qu));
        K = Kc + N * Kz;
        d = dc + N * dz;
      } else {
        K = Kc;
        d = dc;
      }
      ctg = detail::compress_constraints(U2.transpose() * Cx,
                                         U2.transpose() * Cth);
    }

    P = Qxx + K.transpose() * Quu * K + K.transpose() * Qux +
        Qux.transpose() * K;
    P = 0.5 * (P + P.transpose()).eval();
    s = qx + Qux.transpose() * d + K.transpose() * (Quu * d + qu);
    Kgain[t] = K;
    dterm[t] = d;
  }

  if (ctg.Hx.rows() > 0) {
    const double defect = (ctg.Hx * aux.X0 + ctg.hth).cwiseAbs().maxCoeff();
    if (defect > 1e-7)
      throw InconsistentEqualities(
          "solve_aux: pending equality rows conflict with the initial "
          "derivative (defect " +
          std::to_string(defect) + ")");
  }

  TrajectoryGradient grad;
  grad.X.resize(T + 1);
  grad.U.resize(T);
  grad.X[0] = aux.X0;
  for (int t = 0; t < T; ++t) {
    grad.U[t] = Kgain[t] * grad.X[t] + dterm[t];
    grad.X[t + 1] = aux.Fx[t] * grad.X[t] + aux.Fu[t] * grad.U[t] + aux.Fth[t];
  }
  return grad;
}

// Feedback-form auxiliary system for parameterizations where the control is
// a direct function of state and parameters: U_t = Ux_t X_t + Ue_t,
// X_{t+1} = Fx_t X_t + Fu_t U_t, integrated from X0. Open-loop
// parameterizations pass Ux_t = 0.
inline TrajectoryGradient solve_aux_feedback(const std::vector<Matrix>& Fx,
                                             const std::vector<Matrix>& Fu,
                                             const std::vector<Matrix>& Ux,
                                             const std::vector<Matrix>& Ue,
                                             const Matrix& X0) {
  const size_t T = Fx.size();
  require(Fu.size() == T && Ux.size() == T && Ue.size() == T,
          "solve_aux_feedback: sequence length mismatch");
  TrajectoryGradient grad;
  grad.X.resize(T + 1);
  grad.U.resize(T);
  grad.X[0] = X0;
  for (size_t t = 0; t < T; ++t) {
    require(Fx[t].cols() == grad.X[t].rows() &&
                Ux[t].cols() == grad.X[t].rows() &&
                Ue[t].cols() == grad.X[t].cols(),
            "solve_aux_feedback: dimension mismatch at step " +
                std::to_string(t));
    grad.U[t] = Ux[t] * grad.X[t] + Ue[t];
    grad.X[t + 1] = Fx[t] * grad.X[t] + Fu[t] * grad.U[t];
  }
  return grad;
}

// Max residual of the first-order conditions of the auxiliary system at a
// candidate gradient. Without equality blocks the costate recursion is
// explicit; with them the multiplier matrices are fitted by least squares
// first (dense; intended as a diagnostic at small horizons).
inline double aux_kkt_residual(const AuxLqr& aux, const TrajectoryGradient& g) {
  const int T = aux.T, n = aux.n, m = aux.m, r = aux.r;
  double res = (g.X[0] - aux.X0).cwiseAbs().maxCoeff();
  for (int t = 0; t < T; ++t) {
    const Matrix defect =
        g.X[t + 1] - (aux.Fx[t] * g.X[t] + aux.Fu[t] * g.U[t] + aux.Fth[t]);
    res = std::max(res, defect.cwiseAbs().maxCoeff());
  }

  if (!aux.has_equalities()) {
    Matrix lam = aux.LxxT * g.X[T] + aux.LxthT;  // costate at T
    for (int t = T - 1; t >= 0; --t) {
      const Matrix stat = aux.Lxu[t].transpose() * g.X[t] +
                          aux.Luu[t] * g.U[t] +
                          aux.Fu[t].transpose() * lam + aux.Luth[t];
      res = std::max(res, stat.cwiseAbs().maxCoeff());
      lam = aux.Lxx[t] * g.X[t] + aux.Lxu[t] * g.U[t] +
            aux.Fx[t].transpose() * lam + aux.Lxth[t];
    }
    return res;
  }

  // Constraint rows must vanish at the solution.
  for (int t = 0; t < T; ++t) {
    if (aux.cGx(t).rows() > 0)
      res = std::max(res, (aux.cGx(t) * g.X[t] + aux.cGu(t) * g.U[t] +
                           aux.cGth(t)).cwiseAbs().maxCoeff());
    if (aux.cHx(t).rows() > 0)
      res = std::max(res, (aux.cHx(t) * g.X[t] + aux.cHu(t) * g.U[t] +
                           aux.cHth(t)).cwiseAbs().maxCoeff());
  }
  if (aux.cGxT().rows() > 0)
    res = std::max(res,
                   (aux.cGxT() * g.X[T] + aux.cGthT()).cwiseAbs().maxCoeff());
  if (aux.cHxT().rows() > 0)
    res = std::max(res,
                   (aux.cHxT() * g.X[T] + aux.cHthT()).cwiseAbs().maxCoeff());

  // Least-squares multiplier fit over costates and constraint multipliers.
  std::vector<Eigen::Index> lam_off(T + 1, 0), mul_off(T + 1, 0);
  Eigen::Index nvar = 0;
  for (int t = 1; t <= T; ++t) {
    lam_off[t] = nvar;
    nvar += n;
  }
  for (int t = 0; t <= T; ++t) {
    mul_off[t] = nvar;
    nvar += (t < T) ? aux.cGx(t).rows() + aux.cHx(t).rows()
                    : aux.cGxT().rows() + aux.cHxT().rows();
  }
  const Eigen::Index nrows = static_cast<Eigen::Index>(T) * m +
                             static_cast<Eigen::Index>(T) * n;
  Matrix Msys = Matrix::Zero(nrows, nvar);
  Matrix rhs = Matrix::Zero(nrows, r);
  Eigen::Index row = 0;
  for (int t = 0; t < T; ++t) {  // control stationarity rows
    Msys.block(row, lam_off[t + 1], m, n) = aux.Fu[t].transpose();
    const Matrix Cu = detail::vstack(aux.cGu(t), aux.cHu(t));
    if (Cu.rows() > 0)
      Msys.block(row, mul_off[t], m, Cu.rows()) = Cu.transpose();
    rhs.block(row, 0, m, r) = -(aux.Lxu[t].transpose() * g.X[t] +
                                aux.Luu[t] * g.U[t] + aux.Luth[t]);
    row += m;
  }
  for (int t = 1; t < T; ++t) {  // costate recursion rows
    Msys.block(row, lam_off[t], n, n) = Matrix::Identity(n, n);
    Msys.block(row, lam_off[t + 1], n, n) = -aux.Fx[t].transpose();
    const Matrix Cx = detail::vstack(aux.cGx(t), aux.cHx(t));
    if (Cx.rows() > 0)
      Msys.block(row, mul_off[t], n, Cx.rows()) = -Cx.transpose();
    rhs.block(row, 0, n, r) =
        aux.Lxx[t] * g.X[t] + aux.Lxu[t] * g.U[t] + aux.Lxth[t];
    row += n;
  }
  {  // terminal costate row
    Msys.block(row, lam_off[T], n, n) = Matrix::Identity(n, n);
    const Matrix Cx = detail::vstack(aux.cGxT(), aux.cHxT());
    if (Cx.rows() > 0)
      Msys.block(row, mul_off[T], n, Cx.rows()) = -Cx.transpose();
    rhs.block(row, 0, n, r) = aux.LxxT * g.X[T] + aux.LxthT;
    row += n;
  }
  const Matrix sol = Msys.colPivHouseholderQr().solve(rhs);
  const Matrix fit_res = Msys * sol - rhs;
  if (fit_res.size() > 0)
    res = std::max(res, fit_res.cwiseAbs().maxCoeff());
  return res;
}

}  // namespace safepdp

#endif  // SAFEPDP_AUXLQR_HPP
