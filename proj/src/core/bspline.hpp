#pragma once

#include <cstddef>
#include <vector>

namespace stxm {

/// Clamped cubic B-spline basis over a strictly increasing breakpoint
/// sequence. Number of basis functions = breakpoints + 2.
class CubicBasis {
public:
    explicit CubicBasis(std::vector<double> breakpoints);

    std::size_t size() const { return n_basis_; }
    double lower() const { return breaks_.front(); }
    double upper() const { return breaks_.back(); }

    /// Writes the (at most 4) non-zero basis values at x into vals[0..3];
    /// `first` receives the index of the first non-zero function. x is
    /// clamped to the breakpoint range.
    void eval(double x, double vals[4], std::size_t& first) const;

    /// Greville abscissae; a spline with coefficients linear in these
    /// reproduces that linear function exactly.
    const std::vector<double>& greville() const { return greville_; }

private:
    std::vector<double> breaks_;
    std::vector<double> knots_;  // clamped: 4 copies of each endpoint
    std::vector<double> greville_;
    std::size_t n_basis_ = 0;
};

/// Weighted least-squares tensor-product spline with second-order
/// divided-difference penalties along each axis (null space: bilinear in
/// the Greville abscissae, so constants and linear trends pass through
/// unpenalized). Returns false when the penalized system is rank
/// deficient, in which case `fitted` is untouched.
bool tensor_spline_smooth(const CubicBasis& bx, const CubicBasis& by,
                          const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& value, const std::vector<double>& weight,
                          double penalty, const std::vector<double>& query_x,
                          const std::vector<double>& query_y, std::vector<double>& fitted);

}  // namespace stxm
