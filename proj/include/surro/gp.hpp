#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "surro/core.hpp"

namespace surro {

// expected improvement below `best` for a Gaussian posterior N(mean, sd^2)
inline double expected_improvement(double mean, double sd, double best) {
    if (sd <= 0.0) return std::max(best - mean, 0.0);
    double g = (best - mean) / sd;
    double cdf = 0.5 * std::erfc(-g / std::sqrt(2.0));
    double pdf = std::exp(-0.5 * g * g) / std::sqrt(2.0 * M_PI);
    return sd * (g * cdf + pdf);
}

// squared-exponential Gaussian process on unit-box inputs with incremental
// Cholesky updates; observations are standardized internally
class Gp {
  public:
    explicit Gp(int dim, double lengthscale = 0.2, double noise = 1e-6)
        : dim_(dim), ell_(lengthscale), noise_(noise) {}

    struct Prediction {
        double mean = 0.0;
        double sd = 1.0;
    };

    int size() const { return static_cast<int>(xs_.size()); }
    bool healthy() const { return healthy_; }

    void add(const Vec& x, double y) {
        xs_.push_back(x);
        ys_.push_back(y);
        if (healthy_) extend_cholesky();
        if (healthy_) refresh_alpha();
    }

    void add_all(const std::vector<Vec>& xs, const Vec& ys) {
        for (std::size_t i = 0; i < xs.size(); ++i) add(xs[i], ys[i]);
    }

    Prediction predict(const Vec& x) const {
        const int n = size();
        if (n == 0 || !healthy_) return {0.0, 1.0};
        Vec ks(n);
        for (int i = 0; i < n; ++i) ks[i] = kernel(x, xs_[i]);
        Vec v = forward_solve(ks);
        double mean_s = 0.0;
        for (int i = 0; i < n; ++i) mean_s += ks[i] * alpha_[i];
        double var = 1.0;
        for (int i = 0; i < n; ++i) var -= v[i] * v[i];
        var = std::max(var, 0.0);
        return {y_mean_ + y_std_ * mean_s, std::sqrt(var) * y_std_};
    }

    double kernel(const Vec& a, const Vec& b) const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) {
            double d = (a[i] - b[i]) / ell_;
            s += d * d;
        }
        return std::exp(-0.5 * s);
    }

  private:
    void extend_cholesky() {
        const int n = size();
        Vec row(n, 0.0);
        for (int i = 0; i + 1 < n; ++i) row[i] = kernel(xs_.back(), xs_[i]);
        double diag = 1.0 + noise_ + jitter_;
        for (int i = 0; i + 1 < n; ++i) {
            double s = row[i];
            for (int j = 0; j < i; ++j) s -= L_[i][j] * row[j];
            row[i] = s / L_[i][i];
            diag -= row[i] * row[i];
        }
        if (diag <= 1e-12) {
            jitter_ = jitter_ > 0.0 ? jitter_ * 100.0 : 1e-4;
            rebuild();
            return;
        }
        row[n - 1] = std::sqrt(diag);
        L_.push_back(std::move(row));
    }

    void rebuild() {
        const int n = size();
        L_.assign(n, Vec());
        for (int i = 0; i < n; ++i) {
            Vec row(i + 1, 0.0);
            for (int j = 0; j < i; ++j) row[j] = kernel(xs_[i], xs_[j]);
            double diag = 1.0 + noise_ + jitter_;
            for (int j = 0; j < i; ++j) {
                double s = row[j];
                for (int t = 0; t < j; ++t) s -= L_[j][t] * row[t];
                row[j] = s / L_[j][j];
                diag -= row[j] * row[j];
            }
            if (diag <= 1e-12) {
                if (jitter_ < 1.0) {
                    jitter_ = jitter_ > 0.0 ? jitter_ * 100.0 : 1e-4;
                    rebuild();
                } else {
                    healthy_ = false;
                }
                return;
            }
            row[i] = std::sqrt(diag);
            L_[i] = std::move(row);
        }
        refresh_alpha();
    }

    void refresh_alpha() {
        const int n = size();
        y_mean_ = 0.0;
        for (double y : ys_) y_mean_ += y;
        y_mean_ /= n;
        double var = 0.0;
        for (double y : ys_) var += (y - y_mean_) * (y - y_mean_);
        y_std_ = std::sqrt(var / n);
        if (y_std_ <= 1e-12) y_std_ = 1.0;

        Vec t(n);
        for (int i = 0; i < n; ++i) t[i] = (ys_[i] - y_mean_) / y_std_;
        Vec v = forward_solve(t);
        alpha_.assign(n, 0.0);
        for (int i = n - 1; i >= 0; --i) {
            double s = v[i];
            for (int j = i + 1; j < n; ++j) s -= L_[j][i] * alpha_[j];
            alpha_[i] = s / L_[i][i];
        }
    }

    Vec forward_solve(const Vec& b) const {
        const int n = size();
        Vec v(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double s = b[i];
            for (int j = 0; j < i; ++j) s -= L_[i][j] * v[j];
            v[i] = s / L_[i][i];
        }
        return v;
    }

    int dim_;
    double ell_;
    double noise_;
    double jitter_ = 0.0;
    bool healthy_ = true;
    std::vector<Vec> xs_;
    Vec ys_;
    std::vector<Vec> L_;  // lower-triangular rows
    Vec alpha_;
    double y_mean_ = 0.0;
    double y_std_ = 1.0;
};

}  // namespace surro
