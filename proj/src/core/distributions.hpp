#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace stxm {

inline constexpr double kHypoexpMinGap = 1e-6;  // pairwise separation floor for the weights
inline constexpr double kShapeZeroEps = 1e-8;   // |xi| below this uses the exponential limit

/// Generalized Pareto parameters. For xi < 0 the support is bounded above
/// by threshold - scale/xi.
struct GpdParams {
    double threshold = 0.0;
    double scale = 1.0;
    double shape = 0.0;

    GpdParams() = default;
    GpdParams(double threshold_, double scale_, double shape_);
};

double gpd_cdf(const GpdParams& p, double y);
double gpd_pdf(const GpdParams& p, double y);
double gpd_log_pdf(const GpdParams& p, double y);

/// Inverse CDF; u must lie in [0, 1).
double gpd_quantile(const GpdParams& p, double u);

/// Mixture weights of the four-regime model, which double as the scales of
/// the hypoexponential marginal (sum of lambda_k * Exp(1)). Construction
/// enforces: each weight >= gap floor, pairwise distinct by at least the
/// gap floor, and sum == 1 within 1e-12.
struct HypoexpParams {
    std::array<double, 4> weights{};

    explicit HypoexpParams(const std::array<double, 4>& w, double min_gap = kHypoexpMinGap);
};

double hypoexp_cdf(const HypoexpParams& p, double x);

/// Survival P(sum_k w_k E_k > x) for k = 2, 3 or 4 distinct weights.
double hypoexp_survival_k(const std::vector<double>& weights, double x);

/// Inverse of hypoexp_cdf by bracketed root search; u in [0, 1).
double hypoexp_quantile(const HypoexpParams& p, double u);

/// Type-7 (linear interpolation between closest ranks) sample quantile.
double empirical_quantile(const std::vector<double>& values, double tau);
/// Same, but the caller guarantees `sorted` is ascending.
double empirical_quantile_sorted(const std::vector<double>& sorted, double tau);

/// Per-site GPD margins with one shared shape (Eq.-style threshold model:
/// site threshold, site scale, common shape).
struct MarginalModel {
    std::vector<double> thresholds;
    std::vector<double> scales;
    double shape = 0.0;

    GpdParams site_params(std::size_t s) const { return {thresholds[s], scales[s], shape}; }
};

struct GpdFitConfig {
    int restarts = 20;
    int max_iterations = 4000;      // Nelder-Mead iterations per restart
    int min_exceedances = 10;       // per-site floor
    double tolerance = 1e-10;
    std::uint64_t restart_seed = 0x5f1d3ab2c4e6f801ULL;  // fixed: fits are deterministic
};

struct MarginalFit {
    MarginalModel model;
    double log_likelihood = 0.0;
    bool converged = false;
    int evaluations = 0;
};

/// Thrown on non-convergence; carries the best iterate found.
class GpdFitError : public Error {
public:
    GpdFitError(std::string msg, MarginalFit best)
        : Error(ErrorKind::fit, std::move(msg)), best_(std::move(best)) {}
    const MarginalFit& best() const noexcept { return best_; }

private:
    MarginalFit best_;
};

/// Maximizes the pooled exceedance log-likelihood over (shape, per-site
/// scales) with Nelder-Mead restarts from moment-based starting points.
/// `exceedances[s]` holds the raw values above `thresholds[s]` at site s.
MarginalFit gpd_fit_shared_shape(const std::vector<std::vector<double>>& exceedances,
                                 const std::vector<double>& thresholds,
                                 const GpdFitConfig& config = {});

/// Pooled exceedance log-likelihood of a marginal model (exposed so tests
/// can compare fitted vs. generating parameters).
double gpd_shared_shape_loglik(const std::vector<std::vector<double>>& exceedances,
                               const MarginalModel& model);

}  // namespace stxm
