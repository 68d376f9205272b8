#include "interior_point.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/OrderingMethods>
#include <cholmod.h>

namespace mcfnc {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

// Equilibrates rows and columns so that every max-abs entry approaches 1.
void ruiz_scale(SpMat& A, Vec& row_scale, Vec& col_scale) {
  row_scale = Vec::Ones(A.rows());
  col_scale = Vec::Ones(A.cols());
  for (int pass = 0; pass < 12; ++pass) {
    Vec rmax = Vec::Zero(A.rows());
    Vec cmax = Vec::Zero(A.cols());
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        const double v = std::abs(it.value());
        rmax[it.row()] = std::max(rmax[it.row()], v);
        cmax[j] = std::max(cmax[j], v);
      }
    }
    double worst = 0.0;
    for (int i = 0; i < rmax.size(); ++i) {
      worst = std::max(worst, std::abs(1.0 - rmax[i]));
      rmax[i] = rmax[i] > 0.0 ? 1.0 / std::sqrt(rmax[i]) : 1.0;
    }
    for (int j = 0; j < cmax.size(); ++j) {
      worst = std::max(worst, std::abs(1.0 - cmax[j]));
      cmax[j] = cmax[j] > 0.0 ? 1.0 / std::sqrt(cmax[j]) : 1.0;
    }
    if (worst < 1e-3) break;
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) it.valueRef() *= rmax[it.row()] * cmax[j];
    }
    row_scale.array() *= rmax.array();
    col_scale.array() *= cmax.array();
  }
}

// A D A' assembled into a fixed lower-triangular pattern. Each column of A
// contributes d_j * a_ij * a_lj to a precomputed list of value slots.
class NormalMatrix {
 public:
  explicit NormalMatrix(const SpMat& A) {
    const long m = A.rows();
    std::vector<Eigen::Triplet<double>> trip;
    for (long i = 0; i < m; ++i) trip.emplace_back(i, i, 1.0);
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator a(A, j); a; ++a) {
        for (SpMat::InnerIterator b(A, j); b; ++b) {
          if (b.row() >= a.row()) trip.emplace_back(b.row(), a.row(), 1.0);
        }
      }
    }
    M_.resize(m, m);
    M_.setFromTriplets(trip.begin(), trip.end());
    M_.makeCompressed();

    auto slot = [&](long row, long col) {
      const int* begin = M_.innerIndexPtr() + M_.outerIndexPtr()[col];
      const int* end = M_.innerIndexPtr() + M_.outerIndexPtr()[col + 1];
      return static_cast<long>(std::lower_bound(begin, end, static_cast<int>(row)) -
                               M_.innerIndexPtr());
    };
    col_start_.push_back(0);
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SpMat::InnerIterator a(A, j); a; ++a) {
        for (SpMat::InnerIterator b(A, j); b; ++b) {
          if (b.row() >= a.row()) {
            slots_.push_back(slot(b.row(), a.row()));
            products_.push_back(a.value() * b.value());
          }
        }
      }
      col_start_.push_back(static_cast<long>(slots_.size()));
    }
    for (long i = 0; i < m; ++i) diag_.push_back(slot(i, i));
  }

  const SpMat& assemble(const Vec& d, double reg) {
    double* v = M_.valuePtr();
    std::fill(v, v + M_.nonZeros(), 0.0);
    for (long j = 0; j < d.size(); ++j) {
      for (long k = col_start_[j]; k < col_start_[j + 1]; ++k) v[slots_[k]] += d[j] * products_[k];
    }
    for (long s : diag_) v[s] += reg;
    return M_;
  }

  double max_diagonal() const {
    double w = 0.0;
    for (long s : diag_) w = std::max(w, M_.valuePtr()[s]);
    return w;
  }

  const SpMat& matrix() const { return M_; }
  long diagonal_slot(long i) const { return diag_[i]; }

 private:
  SpMat M_;
  std::vector<long> slots_;
  std::vector<double> products_;
  std::vector<long> col_start_;
  std::vector<long> diag_;
};

// Up-looking sparse LDL' of a symmetric matrix given by its lower triangle.
// Pivots that collapse below a fraction of their original diagonal are
// replaced by a huge value, which drops the corresponding direction instead of
// failing on near-dependent rows.
class GuardedLdl {
 public:
  // `order` lists, for each pivot position, the row eliminated there. AMD is
  // used when it is empty.
  GuardedLdl(const SpMat& lower, const std::vector<int>& order) : n_(lower.rows()) {
    perm_.resize(n_);
    inv_.resize(n_);
    if (order.empty()) {
      SpMat full = lower.selfadjointView<Eigen::Lower>();
      Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
      Eigen::AMDOrdering<int> amd;
      amd(full, perm);
      for (long i = 0; i < n_; ++i) inv_[i] = perm.indices()[i];
    } else {
      for (long i = 0; i < n_; ++i) inv_[i] = order[i];
    }
    for (long i = 0; i < n_; ++i) perm_[inv_[i]] = i;  // new index of old row

    // Upper triangle of P M P' in compressed columns, with the slot of every
    // entry of `lower` recorded for the numeric scatter.
    std::vector<long> count(n_ + 1, 0);
    for (int j = 0; j < lower.outerSize(); ++j) {
      for (SpMat::InnerIterator it(lower, j); it; ++it) {
        ++count[std::max(perm_[it.row()], perm_[j]) + 1];
      }
    }
    cp_.assign(n_ + 1, 0);
    for (long k = 0; k < n_; ++k) cp_[k + 1] = cp_[k] + count[k + 1];
    ci_.resize(cp_[n_]);
    cx_.resize(cp_[n_]);
    std::vector<long> next(cp_.begin(), cp_.end() - 1);
    for (int j = 0; j < lower.outerSize(); ++j) {
      for (SpMat::InnerIterator it(lower, j); it; ++it) {
        const long a = perm_[it.row()], b = perm_[j];
        const long col = std::max(a, b);
        const long slot = next[col]++;
        ci_[slot] = std::min(a, b);
        scatter_.push_back(slot);
      }
    }

    // Elimination tree and column counts.
    parent_.assign(n_, -1);
    lnz_.assign(n_, 0);
    std::vector<long> flag(n_);
    for (long k = 0; k < n_; ++k) {
      flag[k] = k;
      for (long p = cp_[k]; p < cp_[k + 1]; ++p) {
        for (long i = ci_[p]; i < k && flag[i] != k; i = parent_[i]) {
          if (parent_[i] == -1) parent_[i] = k;
          ++lnz_[i];
          flag[i] = k;
        }
      }
    }
    lp_.assign(n_ + 1, 0);
    for (long k = 0; k < n_; ++k) lp_[k + 1] = lp_[k] + lnz_[k];
    li_.resize(lp_[n_]);
    lx_.resize(lp_[n_]);
    d_.resize(n_);
  }

  // Factors the matrix whose lower triangle has `lower`'s pattern. Returns the
  // number of replaced pivots, or -1 on non-finite input.
  long factor(const SpMat& lower) {
    {
      long q = 0;
      std::fill(cx_.begin(), cx_.end(), 0.0);
      for (int j = 0; j < lower.outerSize(); ++j) {
        for (SpMat::InnerIterator it(lower, j); it; ++it) cx_[scatter_[q++]] += it.value();
      }
    }
    std::vector<double> y(n_, 0.0);
    std::vector<long> flag(n_), pattern(n_);
    replaced_.clear();
    for (long k = 0; k < n_; ++k) {
      long top = n_;
      flag[k] = k;
      lnz_[k] = 0;
      double diag = 0.0;
      for (long p = cp_[k]; p < cp_[k + 1]; ++p) {
        long i = ci_[p];
        y[i] += cx_[p];
        if (i == k) diag += cx_[p];
        long len = 0;
        for (; flag[i] != k; i = parent_[i]) {
          pattern[len++] = i;
          flag[i] = k;
        }
        while (len > 0) pattern[--top] = pattern[--len];
      }
      double dk = y[k];
      y[k] = 0.0;
      for (; top < n_; ++top) {
        const long i = pattern[top];
        const double yi = y[i];
        y[i] = 0.0;
        const long end = lp_[i] + lnz_[i];
        for (long p = lp_[i]; p < end; ++p) y[li_[p]] -= lx_[p] * yi;
        const double lki = yi / d_[i];
        dk -= lki * yi;
        li_[end] = k;
        lx_[end] = lki;
        ++lnz_[i];
      }
      if (!std::isfinite(dk)) return -1;
      if (dk <= 1e-13 * std::abs(diag) || dk <= 1e-300) {
        dk = 1e128;
        replaced_.push_back(static_cast<int>(inv_[k]));
      }
      d_[k] = dk;
    }
    return static_cast<long>(replaced_.size());
  }

  // Rows whose pivots were replaced by the last factorization.
  const std::vector<int>& replaced_rows() const { return replaced_; }

  Vec solve(const Vec& r) const {
    Vec y(n_);
    for (long i = 0; i < n_; ++i) y[perm_[i]] = r[i];
    for (long j = 0; j < n_; ++j) {
      const double yj = y[j];
      for (long p = lp_[j]; p < lp_[j] + lnz_[j]; ++p) y[li_[p]] -= lx_[p] * yj;
    }
    for (long j = 0; j < n_; ++j) y[j] /= d_[j];
    for (long j = n_ - 1; j >= 0; --j) {
      double yj = y[j];
      for (long p = lp_[j]; p < lp_[j] + lnz_[j]; ++p) yj -= lx_[p] * y[li_[p]];
      y[j] = yj;
    }
    Vec out(n_);
    for (long i = 0; i < n_; ++i) out[i] = y[perm_[i]];
    return out;
  }

 private:
  long n_;
  std::vector<long> perm_, inv_;
  std::vector<long> cp_, ci_, scatter_;
  std::vector<double> cx_;
  std::vector<long> parent_, lnz_, lp_, li_;
  std::vector<double> lx_, d_;
  std::vector<int> replaced_;
};

// Supernodal Cholesky of the normal matrix through CHOLMOD. The pattern is
// analysed once. Rows listed as guarded get a huge diagonal, the LL'
// counterpart of a replaced LDL' pivot.
class CholmodLlt {
 public:
  explicit CholmodLlt(const SpMat& lower) {
    cholmod_start(&common_);
    common_.print = 0;
    common_.supernodal = CHOLMOD_SUPERNODAL;
    common_.final_ll = 1;
    common_.quick_return_if_not_posdef = 1;
    work_.assign(lower.valuePtr(), lower.valuePtr() + lower.nonZeros());
    wrap(lower);
    factor_ = cholmod_analyze(&view_, &common_);
    if (factor_ && factor_->Perm) {
      const int* p = static_cast<const int*>(factor_->Perm);
      order_.assign(p, p + lower.rows());
    }
  }
  ~CholmodLlt() {
    if (factor_) cholmod_free_factor(&factor_, &common_);
    cholmod_finish(&common_);
  }
  CholmodLlt(const CholmodLlt&) = delete;
  CholmodLlt& operator=(const CholmodLlt&) = delete;

  // Fill-reducing elimination order chosen by the analysis.
  const std::vector<int>& order() const { return order_; }

  bool factor(const NormalMatrix& normal, const std::vector<int>& guarded) {
    if (!factor_) return false;
    const SpMat& M = normal.matrix();
    std::copy(M.valuePtr(), M.valuePtr() + M.nonZeros(), work_.begin());
    for (int i : guarded) work_[normal.diagonal_slot(i)] = 1e128;
    wrap(M);
    cholmod_factorize(&view_, factor_, &common_);
    return common_.status == CHOLMOD_OK && factor_->minor == factor_->n;
  }

  Vec solve(const Vec& r) const {
    cholmod_dense rhs{};
    rhs.nrow = static_cast<std::size_t>(r.size());
    rhs.ncol = 1;
    rhs.nzmax = rhs.nrow;
    rhs.d = rhs.nrow;
    rhs.x = const_cast<double*>(r.data());
    rhs.xtype = CHOLMOD_REAL;
    rhs.dtype = CHOLMOD_DOUBLE;
    cholmod_dense* sol = cholmod_solve(CHOLMOD_A, factor_, &rhs, &common_);
    Vec out = Eigen::Map<const Vec>(static_cast<double*>(sol->x), r.size());
    cholmod_free_dense(&sol, &common_);
    return out;
  }

 private:
  void wrap(const SpMat& lower) {
    view_ = cholmod_sparse{};
    view_.nrow = view_.ncol = static_cast<std::size_t>(lower.rows());
    view_.nzmax = static_cast<std::size_t>(lower.nonZeros());
    view_.p = const_cast<int*>(lower.outerIndexPtr());
    view_.i = const_cast<int*>(lower.innerIndexPtr());
    view_.x = work_.data();
    view_.stype = -1;
    view_.itype = CHOLMOD_INT;
    view_.xtype = CHOLMOD_REAL;
    view_.dtype = CHOLMOD_DOUBLE;
    view_.sorted = 1;
    view_.packed = 1;
  }

  mutable cholmod_common common_{};
  cholmod_sparse view_{};
  cholmod_factor* factor_{nullptr};
  std::vector<double> work_;
  std::vector<int> order_;
};

// Normal-equation solver. The guarded LDL' decides which rows are nearly
// dependent; CHOLMOD then reuses that set while its solves stay accurate, and
// the LDL' is refactored whenever they do not.
class NormalSolver {
 public:
  NormalSolver(const SpMat& A, const SpMat& At) : A_(A), At_(At), normal_(A), llt_(normal_.matrix()) {}

  bool factor(const Vec& d) {
    d_ = d;
    ldl_ready_ = false;
    normal_.assemble(d, 0.0);
    use_llt_ = llt_.factor(normal_, guarded_);
    return use_llt_ || factor_guarded();
  }

  // Solves (A D A') y = r, refining against the unguarded matrix.
  Vec solve(const Vec& r) {
    const double tol = 1e-10 * (1.0 + r.lpNorm<Eigen::Infinity>());
    double norm = 0.0;
    Vec y = refine(r, use_llt_, norm);
    if (use_llt_ && norm > tol && (ldl_ready_ || factor_guarded())) {
      double other = 0.0;
      Vec z = refine(r, false, other);
      if (other < norm) y = z;
      use_llt_ = false;
    }
    return y;
  }

 private:
  bool factor_guarded() {
    const SpMat& M = normal_.matrix();
    if (!ldl_) ldl_ = std::make_unique<GuardedLdl>(M, llt_.order());
    ldl_ready_ = ldl_->factor(M) >= 0;
    guarded_ = ldl_->replaced_rows();
    std::sort(guarded_.begin(), guarded_.end());
    return ldl_ready_;
  }

  Vec refine(const Vec& r, bool llt, double& norm) const {
    auto base = [&](const Vec& v) { return llt ? llt_.solve(v) : ldl_->solve(v); };
    Vec y = base(r);
    Vec resid = r - A_ * (d_.asDiagonal() * (At_ * y));
    norm = resid.lpNorm<Eigen::Infinity>();
    for (int k = 0; k < 10 && norm > 1e-15 * (1.0 + r.lpNorm<Eigen::Infinity>()); ++k) {
      const Vec y_next = y + base(resid);
      const Vec next = r - A_ * (d_.asDiagonal() * (At_ * y_next));
      const double next_norm = next.lpNorm<Eigen::Infinity>();
      if (!(next_norm < 0.5 * norm)) {
        if (next_norm < norm) y = y_next;
        break;
      }
      y = y_next;
      resid = next;
      norm = next_norm;
    }
    return y;
  }

  const SpMat& A_;
  const SpMat& At_;
  NormalMatrix normal_;
  CholmodLlt llt_;
  std::unique_ptr<GuardedLdl> ldl_;
  std::vector<int> guarded_;
  bool use_llt_{false};
  bool ldl_ready_{false};
  Vec d_;
};

// Largest a with v + a dv >= 0 (may be infinite).
double max_step(const Vec& v, const Vec& dv) {
  double a = kInf;
  for (long i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

}  // namespace

IpmResult interior_point(const StandardForm& form, double tol, int max_iterations) {
  IpmResult res;
  const long m = form.A.rows();
  const long n = form.A.cols();

  if (n == 0) {
    res.x = Vec();
    res.y = Vec::Zero(m);
    if (inf_norm(form.b) <= tol) {
      res.status = LpStatus::optimal;
    } else {
      res.status = LpStatus::numerical_failure;
      res.message = "no columns but nonzero right-hand side";
    }
    return res;
  }
  if (m == 0) {
    res.x = Vec::Zero(n);
    res.y = Vec();
    if ((form.c.array() < 0.0).any()) {
      res.status = LpStatus::numerical_failure;
      res.message = "negative cost on an unconstrained column";
    } else {
      res.status = LpStatus::optimal;
    }
    return res;
  }

  SpMat A = form.A;
  Vec rs, cs;
  ruiz_scale(A, rs, cs);
  Vec b = rs.asDiagonal() * form.b;
  Vec c = cs.asDiagonal() * form.c;
  const double bscale = std::max(1.0, inf_norm(b));
  const double cscale = std::max(1.0, inf_norm(c));
  b /= bscale;
  c /= cscale;
  const SpMat At = A.transpose();

  NormalSolver solver(A, At);

  // Mehrotra starting point.
  if (!solver.factor(Vec::Ones(n))) {
    res.message = "normal equations could not be factored";
    return res;
  }
  Vec x = At * solver.solve(b);
  Vec y = solver.solve(A * c);
  Vec s = c - At * y;
  x.array() += std::max(-1.5 * x.minCoeff(), 0.0);
  s.array() += std::max(-1.5 * s.minCoeff(), 0.0);
  {
    const double xs = x.dot(s);
    if (xs <= 0.0 || !std::isfinite(xs)) {
      x.setOnes();
      s.setOnes();
    } else {
      const double dx = 0.5 * xs / s.sum();
      const double ds = 0.5 * xs / x.sum();
      x.array() += dx;
      s.array() += ds;
    }
  }

  const double bnorm = inf_norm(b), cnorm = inf_norm(c);
  double best_merit = kInf;
  double anchor = kInf;  // merit must halve relative to this within the stall window
  int since_best = 0;
  Vec best_x = x, best_y = y;
  double best_gap = kInf, best_rp = kInf, best_rd = kInf;

  auto finish = [&](LpStatus status, const Vec& xs_, const Vec& ys_, double gap,
                    std::string msg) {
    res.status = status;
    res.x = cs.asDiagonal() * xs_ * bscale;
    res.y = rs.asDiagonal() * ys_ * cscale;
    res.relative_gap = gap;
    res.message = std::move(msg);
    return res;
  };

  for (int iter = 0; iter <= max_iterations; ++iter) {
    res.iterations = iter;
    const Vec rp = b - A * x;
    const Vec rd = c - At * y - s;
    const double mu = x.dot(s) / static_cast<double>(n);
    const double pobj = c.dot(x), dobj = b.dot(y);
    const double relp = inf_norm(rp) / (1.0 + bnorm);
    const double reld = inf_norm(rd) / (1.0 + cnorm);
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    if (!std::isfinite(relp + reld + gap)) {
      return finish(LpStatus::numerical_failure, best_x, best_y, best_gap, "iterates not finite");
    }
    const double merit = std::max({relp, reld, gap});
    if (merit < 0.5 * anchor) {
      anchor = merit;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_gap = gap;
      best_rp = relp;
      best_rd = reld;
    }
    if (relp <= tol && reld <= tol && gap <= tol) {
      return finish(LpStatus::optimal, x, y, gap, "");
    }
    if (since_best >= 10 || iter == max_iterations) {
      if (best_rp <= 100 * tol && best_rd <= 100 * tol && best_gap <= 100 * tol) {
        return finish(LpStatus::optimal, best_x, best_y, best_gap, "converged to reduced accuracy");
      }
      return finish(since_best >= 10 ? LpStatus::numerical_failure : LpStatus::iteration_limit,
                    best_x, best_y, best_gap, "no convergence");
    }
    if (inf_norm(x) > 1e13 || inf_norm(y) > 1e13) {
      res.primal_diverged = inf_norm(x) > 1e13;
      return finish(LpStatus::numerical_failure, best_x, best_y, best_gap, "iterates diverged");
    }

    const Vec d = x.cwiseQuotient(s);
    if (!solver.factor(d)) {
      return finish(LpStatus::numerical_failure, best_x, best_y, best_gap,
                    "normal equations could not be factored");
    }
    auto direction = [&](const Vec& rc, Vec& dx, Vec& dy, Vec& ds) {
      const Vec rhs = rp + A * (d.cwiseProduct(rd) - rc.cwiseQuotient(s));
      dy = solver.solve(rhs);
      ds = rd - At * dy;
      dx = (rc - x.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Vec dx_a, dy_a, ds_a;
    direction(-x.cwiseProduct(s), dx_a, dy_a, ds_a);
    const double ap_a = std::min(1.0, max_step(x, dx_a));
    const double ad_a = std::min(1.0, max_step(s, ds_a));
    const double mu_aff = (x + ap_a * dx_a).dot(s + ad_a * ds_a) / static_cast<double>(n);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    Vec dx, dy, ds;
    Vec rc = (sigma * mu - (x.cwiseProduct(s) + dx_a.cwiseProduct(ds_a)).array()).matrix();
    direction(rc, dx, dy, ds);
    double ap_max = max_step(x, dx), ad_max = max_step(s, ds);

    // Centrality correctors: push the complementarity products of a longer
    // trial step back into [0.1, 10] sigma mu, reusing the factorization.
    const double target = sigma * mu;
    for (int corr = 0; corr < 2 && std::min(ap_max, ad_max) < 0.9; ++corr) {
      const double ap_t = std::min(1.0, 1.5 * ap_max + 0.1), ad_t = std::min(1.0, 1.5 * ad_max + 0.1);
      const Vec v = (x + ap_t * dx).cwiseProduct(s + ad_t * ds);
      Vec r(n);
      for (long i = 0; i < n; ++i) {
        double t = 0.0;
        if (v[i] < 0.1 * target) t = 0.1 * target - v[i];
        else if (v[i] > 10.0 * target) t = std::max(10.0 * target - v[i], -10.0 * target);
        r[i] = t;
      }
      Vec cx, cy, cs;
      direction(rc + r, cx, cy, cs);
      const double ap_c = max_step(x, cx), ad_c = max_step(s, cs);
      if (std::min(ap_c, 1.0) + std::min(ad_c, 1.0) < 1.01 * (std::min(ap_max, 1.0) + std::min(ad_max, 1.0))) break;
      rc += r;
      dx = std::move(cx);
      dy = std::move(cy);
      ds = std::move(cs);
      ap_max = ap_c;
      ad_max = ad_c;
    }
    const double eta = std::max(0.9, 1.0 - 10.0 * mu);
    const double ap = std::min(1.0, eta * ap_max);
    const double ad = std::min(1.0, eta * ad_max);
    x += ap * dx;
    y += ad * dy;
    s += ad * ds;
  }
  return finish(LpStatus::iteration_limit, best_x, best_y, best_gap, "iteration limit");
}

}  // namespace mcfnc
