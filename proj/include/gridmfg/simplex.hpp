#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gridmfg {

/// min c'x  s.t.  A x = b,  lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be +infinity.
template <typename Scalar>
struct LinearProgram {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix A;
  Vector b;
  Vector c;
  Vector lower;
  Vector upper;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

enum class BoundState { basic, at_lower, at_upper };

template <typename Scalar>
struct LpSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  LpStatus status = LpStatus::infeasible;
  Vector x;
  /// Row duals y with c - A'y = reduced costs at the optimal basis.
  Vector row_duals;
  Vector reduced_costs;
  std::vector<BoundState> state;
  Scalar objective = 0;
  int iterations = 0;
};

template <typename Scalar>
struct SimplexOptions {
  Scalar feasibility_tol = Scalar(1e-9);
  Scalar optimality_tol = Scalar(1e-9);
  Scalar pivot_tol = Scalar(1e-11);
  int max_iterations = 100000;
  /// Weights over rows. When a redundant or degenerate row leaves an
  /// artificial in the final basis, the replacement column is chosen so the
  /// weighted dual sum is as large as dual feasibility permits.
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dual_preference;
};

namespace detail {

/// Dense bounded-variable primal simplex working on the full tableau
/// B^{-1}[A | S] where S holds signed artificial columns.
template <typename Scalar>
class BoundedSimplex {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BoundedSimplex(const LinearProgram<Scalar>& lp, const SimplexOptions<Scalar>& opt)
      : lp_(lp), opt_(opt), m_(lp.rows()), n_(lp.cols()) {}

  LpSolution<Scalar> run() {
    LpSolution<Scalar> sol;
    initialise();

    // Phase 1: drive the artificials to zero.
    Vector phase1_cost = Vector::Zero(n_ + m_);
    phase1_cost.tail(m_).setOnes();
    const LpStatus p1 = iterate(phase1_cost, sol.iterations);
    if (p1 == LpStatus::iteration_limit) {
      sol.status = p1;
      return sol;
    }
    Scalar infeasibility = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[i] >= n_) infeasibility += xb_[i];
    }
    if (infeasibility > opt_.feasibility_tol * (Scalar(1) + lp_.b.cwiseAbs().maxCoeff())) {
      sol.status = LpStatus::infeasible;
      return sol;
    }

    // Phase 2: artificials are pinned to zero and never re-enter.
    for (Eigen::Index j = n_; j < n_ + m_; ++j) upper_[j] = 0;
    Vector cost = Vector::Zero(n_ + m_);
    cost.head(n_) = lp_.c;
    const LpStatus p2 = iterate(cost, sol.iterations);
    if (p2 != LpStatus::optimal) {
      sol.status = p2;
      return sol;
    }
    drive_out_artificials(cost);
    refine();
    finish(cost, sol);
    sol.status = LpStatus::optimal;
    return sol;
  }

 private:
  void initialise() {
    const Eigen::Index total = n_ + m_;
    lower_.resize(total);
    upper_.resize(total);
    lower_.head(n_) = lp_.lower;
    upper_.head(n_) = lp_.upper;
    lower_.tail(m_).setZero();
    upper_.tail(m_).setConstant(std::numeric_limits<Scalar>::infinity());
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (!std::isfinite(static_cast<double>(lower_[j]))) {
        throw std::invalid_argument("simplex: lower bounds must be finite");
      }
      if (upper_[j] < lower_[j]) {
        throw std::invalid_argument("simplex: upper bound below lower bound");
      }
    }

    state_.assign(static_cast<std::size_t>(total), BoundState::at_lower);
    value_ = lower_;
    const Vector residual = lp_.b - lp_.A * lp_.lower;
    sign_.resize(m_);
    tableau_.resize(m_, total);
    basis_.resize(static_cast<std::size_t>(m_));
    xb_.resize(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      sign_[i] = residual[i] >= 0 ? Scalar(1) : Scalar(-1);
      tableau_.row(i).head(n_) = sign_[i] * lp_.A.row(i);
      basis_[i] = n_ + i;
      state_[n_ + i] = BoundState::basic;
      xb_[i] = std::abs(residual[i]);
    }
    tableau_.rightCols(m_).setIdentity();
  }

  bool fixed(Eigen::Index j) const { return upper_[j] - lower_[j] <= Scalar(0); }

  Vector reduced_costs(const Vector& cost) const {
    Vector cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
    Vector d = cost - tableau_.transpose() * cb;
    for (Eigen::Index i = 0; i < m_; ++i) d[basis_[i]] = 0;
    return d;
  }

  LpStatus iterate(const Vector& cost, int& iterations) {
    int degenerate_run = 0;
    bool bland = false;
    while (true) {
      if (iterations >= opt_.max_iterations) return LpStatus::iteration_limit;
      const Vector d = reduced_costs(cost);

      // Pricing: Dantzig, ties to the lowest index; Bland in degenerate runs.
      Eigen::Index entering = -1;
      Scalar best = 0;
      for (Eigen::Index j = 0; j < n_ + m_; ++j) {
        const auto s = state_[j];
        if (s == BoundState::basic || fixed(j)) continue;
        Scalar gain = 0;
        if (s == BoundState::at_lower && d[j] < -opt_.optimality_tol) gain = -d[j];
        if (s == BoundState::at_upper && d[j] > opt_.optimality_tol) gain = d[j];
        if (gain <= 0) continue;
        if (bland) {
          entering = j;
          break;
        }
        if (gain > best) {
          best = gain;
          entering = j;
        }
      }
      if (entering < 0) return LpStatus::optimal;

      const Scalar dir = state_[entering] == BoundState::at_lower ? Scalar(1) : Scalar(-1);
      // Basic variable i moves by g_i * theta with g_i = -dir * alpha_i.
      auto row_limit = [&](Eigen::Index i, Scalar& g, bool& to_upper) {
        g = -dir * tableau_(i, entering);
        if (std::abs(g) <= opt_.pivot_tol) return std::numeric_limits<Scalar>::infinity();
        const Eigen::Index var = basis_[i];
        Scalar limit;
        if (g < 0) {
          limit = (xb_[i] - lower_[var]) / -g;
          to_upper = false;
        } else {
          limit = (upper_[var] - xb_[i]) / g;
          to_upper = true;
        }
        return limit < 0 ? Scalar(0) : limit;
      };
      Scalar theta_min = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        Scalar g;
        bool up;
        theta_min = std::min(theta_min, row_limit(i, g, up));
      }
      const Scalar flip = upper_[entering] - lower_[entering];
      const bool flip_finite = std::isfinite(static_cast<double>(flip));
      if (!flip_finite && !std::isfinite(static_cast<double>(theta_min))) {
        return LpStatus::unbounded;
      }

      ++iterations;
      if (flip_finite && flip <= theta_min) {
        // Bound flip of the entering variable, no basis change.
        xb_ -= dir * flip * tableau_.col(entering);
        state_[entering] = dir > 0 ? BoundState::at_upper : BoundState::at_lower;
        value_[entering] = dir > 0 ? upper_[entering] : lower_[entering];
        degenerate_run = 0;
        bland = false;
        continue;
      }

      // Among near-tied rows prefer the largest pivot, or the lowest
      // variable index under Bland.
      Eigen::Index leave_row = -1;
      bool leave_to_upper = false;
      Scalar leave_pivot = 0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        Scalar g;
        bool up = false;
        const Scalar limit = row_limit(i, g, up);
        if (limit > theta_min + opt_.feasibility_tol) continue;
        bool take = leave_row < 0;
        if (!take) {
          take = bland ? basis_[i] < basis_[leave_row] : std::abs(g) > leave_pivot;
        }
        if (take) {
          leave_row = i;
          leave_to_upper = up;
          leave_pivot = std::abs(g);
        }
      }
      const Scalar theta = theta_min;
      if (theta <= opt_.feasibility_tol) {
        if (++degenerate_run > 2 * m_) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
      xb_ -= dir * theta * tableau_.col(entering);
      const Scalar entering_value = value_[entering] + dir * theta;
      pivot(leave_row, entering, leave_to_upper);
      xb_[leave_row] = entering_value;
    }
  }

  void pivot(Eigen::Index row, Eigen::Index entering, bool leave_to_upper) {
    const Eigen::Index leaving = basis_[row];
    state_[leaving] = leave_to_upper ? BoundState::at_upper : BoundState::at_lower;
    value_[leaving] = leave_to_upper ? upper_[leaving] : lower_[leaving];

    const Scalar p = tableau_(row, entering);
    tableau_.row(row) /= p;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == row) continue;
      const Scalar f = tableau_(i, entering);
      if (f != 0) tableau_.row(i) -= f * tableau_.row(row);
    }
    basis_[row] = entering;
    state_[entering] = BoundState::basic;
  }

  // A zero-valued artificial left in the basis is swapped for a structural
  // column by a dual ratio test, so the reported duals stay dual feasible.
  void drive_out_artificials(const Vector& cost) {
    for (Eigen::Index r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      const Vector d = reduced_costs(cost);
      // Binv row r is tableau(r, artificials) * S.
      const Vector rho = (tableau_.row(r).tail(m_).transpose().array() * sign_.array()).matrix();
      Scalar preference = 0;
      if (opt_.dual_preference.size() == m_) preference = opt_.dual_preference.dot(rho);

      Scalar t_lo = -std::numeric_limits<Scalar>::infinity();
      Scalar t_hi = std::numeric_limits<Scalar>::infinity();
      Eigen::Index j_lo = -1, j_hi = -1, j_small = -1;
      Scalar small = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index k = 0; k < n_; ++k) {
        if (state_[k] == BoundState::basic || fixed(k)) continue;
        const Scalar alpha = tableau_(r, k);
        if (std::abs(alpha) <= opt_.pivot_tol) continue;
        const Scalar t = d[k] / alpha;
        // at_lower needs d_k - t alpha >= 0, at_upper needs <= 0.
        const bool upper_bound_on_t = (state_[k] == BoundState::at_lower) == (alpha > 0);
        if (upper_bound_on_t) {
          if (t < t_hi) { t_hi = t; j_hi = k; }
        } else {
          if (t > t_lo) { t_lo = t; j_lo = k; }
        }
        if (std::abs(t) < small) { small = std::abs(t); j_small = k; }
      }
      Eigen::Index chosen = -1;
      if (preference > 0) chosen = j_hi >= 0 ? j_hi : j_lo;
      else if (preference < 0) chosen = j_lo >= 0 ? j_lo : j_hi;
      else chosen = j_small;
      if (chosen < 0) continue;  // redundant row
      const Scalar v = value_[chosen];
      pivot(r, chosen, false);
      xb_[r] = v;
    }
  }

  // Recompute basic values and refresh the tableau from an LU of the basis.
  void refine() {
    Matrix full(m_, n_ + m_);
    full.leftCols(n_) = lp_.A;
    full.rightCols(m_) = sign_.asDiagonal();
    Matrix basis_matrix(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) basis_matrix.col(i) = full.col(basis_[i]);
    Vector rhs = lp_.b;
    for (Eigen::Index j = 0; j < n_ + m_; ++j) {
      if (state_[j] != BoundState::basic && value_[j] != 0) rhs -= full.col(j) * value_[j];
    }
    Eigen::PartialPivLU<Matrix> lu(basis_matrix);
    tableau_ = lu.solve(full);
    xb_ = lu.solve(rhs);
  }

  void finish(const Vector& cost, LpSolution<Scalar>& sol) {
    sol.x = value_.head(n_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[i] < n_) sol.x[basis_[i]] = xb_[i];
    }
    Vector cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
    // y' = c_B' B^{-1}, and B^{-1} = tableau(:, artificials) * S.
    sol.row_duals = (tableau_.rightCols(m_).transpose() * cb).cwiseProduct(sign_);
    sol.reduced_costs = lp_.c - lp_.A.transpose() * sol.row_duals;
    sol.state.assign(state_.begin(), state_.begin() + n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (sol.state[j] == BoundState::basic) sol.reduced_costs[j] = 0;
    }
    sol.objective = lp_.c.dot(sol.x);
  }

  const LinearProgram<Scalar>& lp_;
  const SimplexOptions<Scalar>& opt_;
  Eigen::Index m_;
  Eigen::Index n_;
  Matrix tableau_;
  Vector xb_;
  Vector value_;
  Vector lower_;
  Vector upper_;
  Vector sign_;
  std::vector<Eigen::Index> basis_;
  std::vector<BoundState> state_;
};

}  // namespace detail

template <typename Scalar>
LpSolution<Scalar> solve_bounded_simplex(const LinearProgram<Scalar>& lp,
                                         const SimplexOptions<Scalar>& options = {}) {
  if (lp.b.size() != lp.rows() || lp.c.size() != lp.cols() ||
      lp.lower.size() != lp.cols() || lp.upper.size() != lp.cols()) {
    throw std::invalid_argument("simplex: inconsistent problem dimensions");
  }
  return detail::BoundedSimplex<Scalar>(lp, options).run();
}

}  // namespace gridmfg
