#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "distributions.hpp"
#include "grid.hpp"
#include "mixture.hpp"

namespace stxm {

/// Distance bins for pair statistics. Pairs beyond the last edge in either
/// coordinate are discarded; bins are half-open [lo, hi).
struct PairBinGrid {
    std::vector<double> spatial_edges{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> temporal_edges{0.0, 0.1, 0.2, 0.3};

    std::size_t n_spatial() const { return spatial_edges.size() - 1; }
    std::size_t n_temporal() const { return temporal_edges.size() - 1; }
    std::size_t n_bins() const { return n_spatial() * n_temporal(); }
    std::size_t flat(std::size_t si, std::size_t ti) const { return si * n_temporal() + ti; }

    double spatial_center(std::size_t si) const {
        return 0.5 * (spatial_edges[si] + spatial_edges[si + 1]);
    }
    double temporal_center(std::size_t ti) const {
        return 0.5 * (temporal_edges[ti] + temporal_edges[ti + 1]);
    }

    /// Flat bin index, or -1 when the pair falls outside the grid.
    int bin_of(double h_s, double h_t) const;
};

/// Within-replicate unordered cell pairs of a layout, each mapped to its
/// distance bin once; reused across replicates and bootstrap resamples.
struct PairTable {
    struct CellPair {
        std::uint32_t a, b;
        std::uint32_t bin;
    };
    std::vector<CellPair> pairs;
    std::vector<std::uint64_t> per_replicate_count;  // pairs per bin in one replicate

    PairTable(const SpaceTimeLayout& layout, const PairBinGrid& grid);
};

/// Binned empirical chi (raw and, after smooth_surface, smoothed).
struct ChiSurface {
    double tau = 0.0;
    PairBinGrid grid;
    std::vector<double> raw;              // NaN where missing
    std::vector<double> smoothed;         // empty until smoothed
    std::vector<std::uint64_t> pair_count;  // pair-instances per bin
    std::vector<std::uint8_t> missing;    // zero conditioning count
    bool smoothing_fallback = false;
};

/// Per-bin statistic with a missing mask (conditional exceedance correlation).
struct BinnedStat {
    PairBinGrid grid;
    std::vector<double> values;
    std::vector<std::uint64_t> pair_count;  // qualifying pairs per bin
    std::vector<std::uint8_t> missing;
};

/// Symmetrized empirical chi-hat per bin over within-replicate pairs:
/// 2 #(both > tau) / (#(first > tau) + #(second > tau)).
ChiSurface empirical_chi(const Dataset& d, double tau, const PairTable& table,
                         const PairBinGrid& grid);

/// Optional subset of replicates (with repetition allowed; used by the
/// bootstrap). Indices refer to the dataset's replicate axis.
ChiSurface empirical_chi(const Dataset& d, double tau, const PairTable& table,
                         const PairBinGrid& grid, const std::vector<std::uint32_t>& replicates);

/// Penalized tensor-spline smoothing of the raw surface, weighted by pair
/// counts; missing bins are imputed from the fit and the result is clamped
/// to [0,1]. Falls back to a weighted linear fit when the spline system is
/// rank deficient.
ChiSurface smooth_surface(const ChiSurface& raw, double penalty = 1.0);

/// Pearson correlation of pair values given both exceed q0, per bin; bins
/// with fewer than `min_pairs` qualifying pairs are flagged missing.
BinnedStat conditional_exceedance_corr(const Dataset& d, double q0, const PairTable& table,
                                       const PairBinGrid& grid,
                                       std::size_t min_pairs = 30);
BinnedStat conditional_exceedance_corr(const Dataset& d, double q0, const PairTable& table,
                                       const PairBinGrid& grid,
                                       const std::vector<std::uint32_t>& replicates,
                                       std::size_t min_pairs = 30);

enum class PairCase { spatial, temporal, spatiotemporal };

inline const char* pair_case_name(PairCase c) {
    switch (c) {
        case PairCase::spatial: return "spatial";
        case PairCase::temporal: return "temporal";
        case PairCase::spatiotemporal: return "spatiotemporal";
    }
    return "?";
}

/// Closed-form joint survival of the simplified two-point model:
/// S(y) = sum_i coeff[i] * exp(-rate[i] * y), plus the limiting chi.
struct TheoremChiResult {
    PairCase pair_case = PairCase::spatial;
    std::vector<double> coefficients;  // 5 (spatial/temporal) or 7 (spatiotemporal)
    std::vector<double> rates;
    double chi = 0.0;
    std::size_t dominant_index = 0;  // 0-based argmax of the weights

    double joint_survival(double y) const {
        if (y <= 0.0) return 1.0;
        double s = 0.0;
        for (std::size_t i = 0; i < coefficients.size(); ++i)
            s += coefficients[i] * std::exp(-rates[i] * y);
        return s;
    }
};

/// Asymptotic chi of the simplified model for a pair of the given case.
/// Dependent exactly when the dominant index is shared by the two points
/// (spatial: j in {1,2}; temporal: j in {1,3}; spatiotemporal: j = 1, in
/// 1-based terms). Throws a parameter error naming the pole when the
/// coefficient formulas degenerate.
TheoremChiResult theorem1_chi(const std::array<double, 4>& lambda, PairCase pair_case);

/// Detects proximity to a coefficient-formula pole; returns the offending
/// expression's name or an empty string.
std::string theorem1_pole(const std::array<double, 4>& lambda, double tol = 1e-8);

/// Monte Carlo chi of the simplified model at quantile level tau,
/// deterministic per seed for any thread count.
double chi_mc_oracle(const std::array<double, 4>& lambda, PairCase pair_case, double tau,
                     std::uint64_t n_samples, std::uint64_t seed, int threads = 1);

/// Monte Carlo joint survival P(X1 > y, X2 > y) of the simplified model.
double joint_survival_mc(const std::array<double, 4>& lambda, PairCase pair_case, double y,
                         std::uint64_t n_samples, std::uint64_t seed, int threads = 1);

/// Monte Carlo chi_tau of the full mixture at given (h_S, h_T) lags via
/// paired-point simulation.
std::vector<double> model_chi_curve(const MixtureParams& p,
                                    const std::vector<std::array<double, 2>>& lags, double tau,
                                    std::uint64_t n_samples, std::uint64_t seed, int threads = 1);

/// CSV export: tau,h_s_bin_center,h_t_bin_center,chi_raw,chi_smooth,n_pairs.
void write_chi_surface_csv(const std::vector<ChiSurface>& surfaces, const std::string& path);

}  // namespace stxm
