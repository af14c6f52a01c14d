#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "surro/core.hpp"

namespace surro {

struct LpResult {
    bool ok = false;
    Vec z;
    double objective = 0.0;
};

namespace detail {

// dense tableau simplex over the dual:
//   primal   max c.z  st  G z <= h            (z free, s vars, R rows)
//   dual     min h.y  st  G^T y = c, y >= 0   (s equality rows, R vars)
// the optimal primal point is recovered from the tight rows of the
// final dual basis.
class DualSimplex {
  public:
    DualSimplex(const Vec& c, const std::vector<Vec>& G, const Vec& h)
        : s_(c.size()), R_(G.size()), G_(G), h_(h), c_(c) {
        if (s_ == 0) throw std::invalid_argument("lp: empty objective");
        if (h.size() != R_) throw std::invalid_argument("lp: rhs size");
        for (const auto& row : G)
            if (row.size() != s_) throw std::invalid_argument("lp: row size");
        cols_ = R_ + s_;
        tab_.assign(s_, Vec(cols_ + 1, 0.0));
        basis_.resize(s_);
        for (std::size_t r = 0; r < s_; ++r) {
            double sign = c[r] < 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < R_; ++j)
                tab_[r][j] = sign * G[j][r];
            tab_[r][R_ + r] = 1.0;
            tab_[r][cols_] = sign * c[r];
            basis_[r] = R_ + r;
        }
        scale_ = 1.0;
        for (double v : h) scale_ = std::max(scale_, std::abs(v));
        for (double v : c) scale_ = std::max(scale_, std::abs(v));
    }

    LpResult solve() {
        LpResult res;
        Vec cost1(cols_, 0.0), cost2(cols_, 0.0);
        for (std::size_t j = R_; j < cols_; ++j) cost1[j] = 1.0;
        for (std::size_t j = 0; j < R_; ++j) cost2[j] = h_[j];

        if (!run_phase(cost1)) return res;
        double infeas = 0.0;
        for (std::size_t r = 0; r < s_; ++r)
            if (basis_[r] >= R_) infeas += tab_[r][cols_];
        if (infeas > 1e-7 * scale_) return res;  // dual infeasible

        drive_out_artificials();
        if (!run_phase(cost2)) return res;  // dual unbounded

        Vec z;
        if (!recover_primal(z)) return res;
        double prim = dot_n(c_, z);
        double dual = 0.0;
        for (std::size_t r = 0; r < s_; ++r)
            if (basis_[r] < R_) dual += h_[basis_[r]] * tab_[r][cols_];
        if (std::abs(prim - dual) > 1e-7 * scale_) return res;
        for (std::size_t j = 0; j < R_; ++j)
            if (dot_n(G_[j], z) > h_[j] + 1e-7 * scale_) return res;

        res.ok = true;
        res.z = std::move(z);
        res.objective = prim;
        return res;
    }

  private:
    static double dot_n(const Vec& a, const Vec& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    }

    void pivot(std::size_t pr, std::size_t pc) {
        double pv = tab_[pr][pc];
        for (double& v : tab_[pr]) v /= pv;
        for (std::size_t r = 0; r < s_; ++r) {
            if (r == pr) continue;
            double f = tab_[r][pc];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= cols_; ++j)
                tab_[r][j] -= f * tab_[pr][j];
        }
        basis_[pr] = pc;
    }

    // Bland's rule on both choices keeps every phase finite
    bool run_phase(const Vec& cost) {
        const double rctol = 1e-9 * scale_;
        std::size_t maxit = 500 + 5 * cols_;
        for (std::size_t it = 0; it < maxit; ++it) {
            std::size_t enter = cols_;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (j >= R_ && !basic(j)) {
                    if (artificial_barred_) continue;
                }
                if (basic(j)) continue;
                double rc = cost[j];
                for (std::size_t r = 0; r < s_; ++r)
                    rc -= cost[basis_[r]] * tab_[r][j];
                if (rc < -rctol) {
                    enter = j;
                    break;
                }
            }
            if (enter == cols_) return true;
            std::size_t leave = s_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < s_; ++r) {
                if (tab_[r][enter] <= 1e-9) continue;
                double ratio = tab_[r][cols_] / tab_[r][enter];
                if (ratio < best - 1e-12 ||
                    (ratio < best + 1e-12 &&
                     (leave == s_ || basis_[r] < basis_[leave]))) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave == s_) return false;  // unbounded direction
            pivot(leave, enter);
        }
        return false;  // iteration cap, treat as failure
    }

    bool basic(std::size_t col) const {
        for (std::size_t r = 0; r < s_; ++r)
            if (basis_[r] == col) return true;
        return false;
    }

    void drive_out_artificials() {
        for (std::size_t r = 0; r < s_; ++r) {
            if (basis_[r] < R_) continue;
            for (std::size_t j = 0; j < R_; ++j) {
                if (std::abs(tab_[r][j]) > 1e-9) {
                    pivot(r, j);
                    break;
                }
            }
        }
        artificial_barred_ = true;
    }

    // tight primal constraints come from the structural basis columns;
    // a leftover artificial in row r pins z_r = 0 on a redundant row
    bool recover_primal(Vec& z) const {
        std::vector<Vec> A(s_, Vec(s_, 0.0));
        Vec b(s_, 0.0);
        for (std::size_t r = 0; r < s_; ++r) {
            if (basis_[r] < R_) {
                A[r] = G_[basis_[r]];
                b[r] = h_[basis_[r]];
            } else {
                A[r][basis_[r] - R_] = 1.0;
            }
        }
        for (std::size_t col = 0; col < s_; ++col) {
            std::size_t pr = col;
            for (std::size_t r = col + 1; r < s_; ++r)
                if (std::abs(A[r][col]) > std::abs(A[pr][col])) pr = r;
            if (std::abs(A[pr][col]) < 1e-12 * (1.0 + scale_)) return false;
            std::swap(A[col], A[pr]);
            std::swap(b[col], b[pr]);
            for (std::size_t r = 0; r < s_; ++r) {
                if (r == col) continue;
                double f = A[r][col] / A[col][col];
                if (f == 0.0) continue;
                for (std::size_t j = col; j < s_; ++j) A[r][j] -= f * A[col][j];
                b[r] -= f * b[col];
            }
        }
        z.assign(s_, 0.0);
        for (std::size_t i = 0; i < s_; ++i) z[i] = b[i] / A[i][i];
        return true;
    }

    std::size_t s_, R_, cols_;
    std::vector<Vec> G_;
    Vec h_, c_;
    std::vector<Vec> tab_;
    std::vector<std::size_t> basis_;
    double scale_ = 1.0;
    bool artificial_barred_ = false;
};

}  // namespace detail

inline LpResult solve_inequality_lp(const Vec& c, const std::vector<Vec>& G,
                                    const Vec& h) {
    detail::DualSimplex sx(c, G, h);
    return sx.solve();
}

// one-sided affine bounds for residual data: low(x) <= e_k <= up(x) on every
// datapoint, each side as tight as the LP allows in summed value over the
// training points
struct BoundFit {
    Vec a_low, a_up;
    double b_low = 0.0, b_up = 0.0;
    bool degraded = false;

    double low(const Vec& x) const { return dot(a_low, x) + b_low; }
    double up(const Vec& x) const { return dot(a_up, x) + b_up; }
};

namespace detail {

// maximize sum_k(a.x_k + b) st a.x_k + b <= e_k, |a_i| <= cap; a tiny
// penalty on |a| picks the flattest optimum when the LP face is degenerate
inline bool fit_lower_side(const std::vector<Vec>& xs, const Vec& es,
                           double cap, Vec& a_out, double& b_out) {
    const std::size_t n = xs.size();
    const std::size_t m = xs[0].size();
    const double tie_eps = 1e-8;

    bool all_e_equal = true, all_x_equal = true;
    for (std::size_t k = 1; k < n; ++k) {
        if (es[k] != es[0]) all_e_equal = false;
        if (xs[k] != xs[0]) all_x_equal = false;
    }
    double emin = *std::min_element(es.begin(), es.end());
    if (all_e_equal || all_x_equal) {
        a_out.assign(m, 0.0);
        b_out = emin;
        return true;
    }

    // variables: a+ (m), a- (m), b
    const std::size_t s = 2 * m + 1;
    std::vector<Vec> G;
    Vec h;
    G.reserve(n + 4 * m);
    for (std::size_t k = 0; k < n; ++k) {
        Vec row(s, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            row[i] = xs[k][i];
            row[m + i] = -xs[k][i];
        }
        row[2 * m] = 1.0;
        G.push_back(std::move(row));
        h.push_back(es[k]);
    }
    for (std::size_t i = 0; i < 2 * m; ++i) {
        Vec capr(s, 0.0), nonneg(s, 0.0);
        capr[i] = 1.0;
        nonneg[i] = -1.0;
        G.push_back(std::move(capr));
        h.push_back(cap);
        G.push_back(std::move(nonneg));
        h.push_back(0.0);
    }
    Vec c(s, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double sx = 0.0;
        for (std::size_t k = 0; k < n; ++k) sx += xs[k][i];
        c[i] = sx - tie_eps;
        c[m + i] = -sx - tie_eps;
    }
    c[2 * m] = static_cast<double>(n);

    auto res = solve_inequality_lp(c, G, h);
    if (!res.ok) return false;
    a_out.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) a_out[i] = res.z[i] - res.z[m + i];
    // push the offset onto the data so the constraints hold exactly
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
        b = std::min(b, es[k] - dot(a_out, xs[k]));
    b_out = b;
    return true;
}

}  // namespace detail

inline BoundFit fit_bounds(const std::vector<Vec>& xs, const Vec& es,
                           double cap) {
    if (xs.empty() || xs.size() != es.size())
        throw std::invalid_argument("fit_bounds: bad data");
    const std::size_t m = xs[0].size();
    for (const auto& x : xs)
        if (x.size() != m) throw std::invalid_argument("fit_bounds: dims");

    BoundFit fit;
    if (!detail::fit_lower_side(xs, es, cap, fit.a_low, fit.b_low)) {
        fit.a_low.assign(m, 0.0);
        fit.b_low = *std::min_element(es.begin(), es.end());
        fit.degraded = true;
    }
    Vec neg(es.size());
    for (std::size_t k = 0; k < es.size(); ++k) neg[k] = -es[k];
    Vec a_up_neg;
    double b_up_neg = 0.0;
    if (detail::fit_lower_side(xs, neg, cap, a_up_neg, b_up_neg)) {
        fit.a_up.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) fit.a_up[i] = -a_up_neg[i];
        fit.b_up = -b_up_neg;
    } else {
        fit.a_up.assign(m, 0.0);
        fit.b_up = *std::max_element(es.begin(), es.end());
        fit.degraded = true;
    }
    return fit;
}

}  // namespace surro
