#include "bspline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace stxm {

CubicBasis::CubicBasis(std::vector<double> breakpoints) : breaks_(std::move(breakpoints)) {
    if (breaks_.size() < 2) throw argument_error("spline needs at least two breakpoints");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
        if (!(breaks_[i] > breaks_[i - 1]))
            throw argument_error("spline breakpoints must be strictly increasing");

    // Clamped knot vector: each endpoint with multiplicity 4.
    knots_.assign(4, breaks_.front());
    knots_.insert(knots_.end(), breaks_.begin() + 1, breaks_.end() - 1);
    knots_.insert(knots_.end(), 4, breaks_.back());
    n_basis_ = knots_.size() - 4;

    greville_.resize(n_basis_);
    for (std::size_t i = 0; i < n_basis_; ++i)
        greville_[i] = (knots_[i + 1] + knots_[i + 2] + knots_[i + 3]) / 3.0;
}

void CubicBasis::eval(double x, double vals[4], std::size_t& first) const {
    x = std::min(std::max(x, breaks_.front()), breaks_.back());

    // Knot span index i with knots_[i] <= x < knots_[i+1], clamped to the
    // last non-degenerate span at the right edge.
    std::size_t lo = 3, hi = knots_.size() - 5;  // valid spans: [3, n_basis_-1]
    std::size_t i = hi;
    if (x < knots_[hi]) {
        i = static_cast<std::size_t>(
                std::upper_bound(knots_.begin() + static_cast<long>(lo),
                                 knots_.begin() + static_cast<long>(hi + 1), x) -
                knots_.begin()) -
            1;
    }

    // Cox-de Boor triangle for degree 3.
    double left[4], right[4];
    vals[0] = 1.0;
    for (int j = 1; j <= 3; ++j) {
        left[j] = x - knots_[i + 1 - static_cast<std::size_t>(j)];
        right[j] = knots_[i + static_cast<std::size_t>(j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double den = right[r + 1] + left[j - r];
            const double temp = den != 0.0 ? vals[r] / den : 0.0;
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    first = i - 3;
}

namespace {

// Rows of the second divided-difference operator over the abscissae g:
// penalizing these leaves functions linear in g untouched.
Eigen::MatrixXd second_difference(const std::vector<double>& g) {
    const std::size_t n = g.size();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n >= 2 ? n - 2 : 0, n);
    for (std::size_t r = 0; r + 2 < n; ++r) {
        const double h0 = g[r + 1] - g[r], h1 = g[r + 2] - g[r + 1];
        d(r, r) = 2.0 / (h0 * (h0 + h1));
        d(r, r + 1) = -2.0 / (h0 * h1);
        d(r, r + 2) = 2.0 / (h1 * (h0 + h1));
    }
    return d;
}

}  // namespace

bool tensor_spline_smooth(const CubicBasis& bx, const CubicBasis& by,
                          const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& value, const std::vector<double>& weight,
                          double penalty, const std::vector<double>& query_x,
                          const std::vector<double>& query_y, std::vector<double>& fitted) {
    const std::size_t nx = bx.size(), ny = by.size(), nc = nx * ny;
    const std::size_t n_obs = x.size();

    // Normalize weights so the penalty scale is data-size independent.
    double wsum = 0.0;
    std::size_t n_used = 0;
    for (double w : weight)
        if (w > 0.0) {
            wsum += w;
            ++n_used;
        }
    if (n_used == 0) return false;
    const double wscale = static_cast<double>(n_used) / wsum;

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nc, nc);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nc);
    double vx[4], vy[4];
    std::size_t fx = 0, fy = 0;
    for (std::size_t i = 0; i < n_obs; ++i) {
        if (!(weight[i] > 0.0)) continue;
        const double w = weight[i] * wscale;
        bx.eval(x[i], vx, fx);
        by.eval(y[i], vy, fy);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const std::size_t ia = (fx + static_cast<std::size_t>(a)) * ny + fy +
                                       static_cast<std::size_t>(b);
                const double va = vx[a] * vy[b];
                rhs(ia) += w * va * value[i];
                for (int c = 0; c < 4; ++c)
                    for (int d = 0; d < 4; ++d) {
                        const std::size_t ib = (fx + static_cast<std::size_t>(c)) * ny + fy +
                                               static_cast<std::size_t>(d);
                        m(ia, ib) += w * va * vx[c] * vy[d];
                    }
            }
    }

    const Eigen::MatrixXd dx = second_difference(bx.greville());
    const Eigen::MatrixXd dy = second_difference(by.greville());
    const Eigen::MatrixXd px = dx.transpose() * dx;  // nx x nx
    const Eigen::MatrixXd py = dy.transpose() * dy;  // ny x ny
    for (std::size_t a = 0; a < nx; ++a)
        for (std::size_t c = 0; c < nx; ++c)
            if (px(a, c) != 0.0)
                for (std::size_t b = 0; b < ny; ++b)
                    m(a * ny + b, c * ny + b) += penalty * px(a, c);
    for (std::size_t b = 0; b < ny; ++b)
        for (std::size_t d = 0; d < ny; ++d)
            if (py(b, d) != 0.0)
                for (std::size_t a = 0; a < nx; ++a)
                    m(a * ny + b, a * ny + d) += penalty * py(b, d);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    cod.setThreshold(1e-10);
    if (cod.rank() < static_cast<Eigen::Index>(nc)) return false;
    const Eigen::VectorXd coef = cod.solve(rhs);

    fitted.resize(query_x.size());
    for (std::size_t q = 0; q < query_x.size(); ++q) {
        bx.eval(query_x[q], vx, fx);
        by.eval(query_y[q], vy, fy);
        double v = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                v += vx[a] * vy[b] *
                     coef((fx + static_cast<std::size_t>(a)) * ny + fy + static_cast<std::size_t>(b));
        fitted[q] = v;
    }
    return true;
}

}  // namespace stxm
