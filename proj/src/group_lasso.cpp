#include "bsbl/group_lasso.hpp"

#include <algorithm>
#include <cmath>

namespace bsbl {

namespace {

// This many accepted steps without any change of the objective end the run.
constexpr double kStallRel = 0.0;
constexpr int kStallIters = 20;

void check(const GroupLassoProblem& p) {
  if (p.H.rows() != p.y.size() || p.H.cols() != p.partition.total()) {
    throw Error(ErrorCode::DimensionMismatch, "group lasso: inconsistent dimensions");
  }
  if (!(p.reg > 0.0) || !std::isfinite(p.reg)) {
    throw Error(ErrorCode::InvalidArgument, "group lasso: reg must be positive");
  }
}

double penalty(const BlockPartition& partition, const Vector& u) {
  double s = 0.0;
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    s += u.segment(partition.offset(i), partition.size(i)).norm();
  }
  return s;
}

// sum_i |z_i| - |x_i| without cancellation.
double penalty_change(const BlockPartition& partition, const Vector& x, const Vector& z) {
  double s = 0.0;
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    const auto xi = x.segment(partition.offset(i), partition.size(i));
    const auto zi = z.segment(partition.offset(i), partition.size(i));
    const double den = xi.norm() + zi.norm();
    if (den > 0.0) s += (zi - xi).dot(zi + xi) / den;
  }
  return s;
}

// Group soft-thresholding: each group shrinks toward 0 by `threshold` in norm.
void prox(const BlockPartition& partition, double threshold, Vector& v) {
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    auto vi = v.segment(partition.offset(i), partition.size(i));
    const double n = vi.norm();
    if (n <= threshold) {
      vi.setZero();
    } else {
      vi *= 1.0 - threshold / n;
    }
  }
}

// 2 |H|_2^2 by power iteration, the Lipschitz constant of the smooth part.
double lipschitz_estimate(const Matrix& h) {
  Vector v = Vector::Ones(h.cols()) / std::sqrt(static_cast<double>(h.cols()));
  double sigma2 = 0.0;
  for (int k = 0; k < 30; ++k) {
    Vector w = h.transpose() * (h * v);
    const double n = w.norm();
    if (n == 0.0) break;
    sigma2 = n;
    v = w / n;
  }
  return std::max(2.0 * sigma2, 1e-12);
}

}  // namespace

double group_lasso_objective(const GroupLassoProblem& p, const Vector& u) {
  check(p);
  return (p.y - p.H * u).squaredNorm() + p.reg * penalty(p.partition, u);
}

double group_lasso_reg_max(const Matrix& h, const Vector& y, const BlockPartition& partition) {
  const Vector c = h.transpose() * y;
  double best = 0.0;
  for (Index i = 0; i < partition.num_blocks(); ++i) {
    best = std::max(best, c.segment(partition.offset(i), partition.size(i)).norm());
  }
  return best;
}

double group_lasso_optimality(const GroupLassoProblem& p, const Vector& u) {
  check(p);
  const Vector c = 2.0 * (p.H.transpose() * (p.y - p.H * u));
  double worst = 0.0;
  for (Index i = 0; i < p.partition.num_blocks(); ++i) {
    const auto ui = u.segment(p.partition.offset(i), p.partition.size(i));
    const auto ci = c.segment(p.partition.offset(i), p.partition.size(i));
    const double n = ui.norm();
    if (n > 0.0) {
      worst = std::max(worst, (ci - (p.reg / n) * ui).norm());
    } else {
      worst = std::max(worst, ci.norm() - p.reg);
    }
  }
  return worst;
}

GroupLassoResult solve_group_lasso(const GroupLassoProblem& p, double tol, int max_iters,
                                   const Vector* warm_start) {
  check(p);
  if (!(tol > 0.0) || max_iters < 1) {
    throw Error(ErrorCode::InvalidArgument, "group lasso: tol and max_iters must be positive");
  }
  const Index n = p.H.cols();
  const double scale = std::max(1.0, 2.0 * group_lasso_reg_max(p.H, p.y, p.partition));

  GroupLassoResult out;
  Vector x = warm_start ? *warm_start : Vector::Zero(n);
  if (x.size() != n) throw Error(ErrorCode::DimensionMismatch, "warm start has wrong length");
  Vector rx = p.y - p.H * x;
  double fx = rx.squaredNorm() + p.reg * penalty(p.partition, x);
  Vector v = x;
  double t = 1.0;
  double lip = lipschitz_estimate(p.H);
  int stalled = 0;

  for (int k = 1; k <= max_iters; ++k) {
    const Vector rv = p.y - p.H * v;
    const Vector grad = -2.0 * (p.H.transpose() * rv);

    // Sufficient decrease of the smooth part reduces to |H d|^2 <= lip/2 |d|^2.
    Vector z;
    for (;;) {
      z = v - grad / lip;
      prox(p.partition, p.reg / lip, z);
      const Vector d = z - v;
      if ((p.H * d).squaredNorm() <= 0.5 * lip * d.squaredNorm() * (1.0 + 1e-12)) break;
      lip *= 2.0;
    }

    // Objective change evaluated as differences so its sign survives when
    // both objectives agree to machine precision.
    const Vector e = p.H * (z - x);
    const double delta = e.dot(e - 2.0 * rx) + p.reg * penalty_change(p.partition, x, z);

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (delta <= 0.0) {
      const double rel = -delta / std::max(std::abs(fx), 1e-300);
      Vector x_prev = std::move(x);
      const bool restart = (v - z).dot(z - x_prev) > 0.0;
      x = std::move(z);
      rx -= e;
      fx += delta;
      if (restart) {
        v = x;
        t = 1.0;
      } else {
        v = x + ((t - 1.0) / t_next) * (x - x_prev);
        t = t_next;
      }
      stalled = rel <= kStallRel ? stalled + 1 : 0;
    } else {
      // Momentum overshot: restart from the last accepted point.
      v = x;
      t = 1.0;
    }
    out.objective_trace.push_back(fx);
    out.iterations = k;

    if (stalled >= kStallIters) {
      out.converged = true;
      break;
    }
    if (k % 10 == 0) {
      if (group_lasso_optimality(p, x) <= tol * scale) {
        out.converged = true;
        break;
      }
    }
  }
  out.objective = (p.y - p.H * x).squaredNorm() + p.reg * penalty(p.partition, x);
  out.u = std::move(x);
  return out;
}

}  // namespace bsbl
