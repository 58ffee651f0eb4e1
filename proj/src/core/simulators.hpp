#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

namespace stxm {

enum class VariogramMode { spatial_only, temporal_only, spatiotemporal };

/// Power variogram gamma(h_S, h_T) = (h_S/rho_S)^alpha + (h_T/rho_T)^alpha,
/// restricted to one coordinate in the degenerate modes. All four mixture
/// components share this family.
struct VariogramSpec {
    double rho_s = 1.0;
    double rho_t = 1.0;
    double alpha = 1.0;
    VariogramMode mode = VariogramMode::spatiotemporal;

    VariogramSpec() = default;
    VariogramSpec(double rho_s_, double rho_t_, VariogramMode mode_, double alpha_ = 1.0)
        : rho_s(rho_s_), rho_t(rho_t_), alpha(alpha_), mode(mode_) {
        if (!(rho_s > 0.0) || !(rho_t > 0.0))
            throw argument_error("variogram ranges must be strictly positive");
        if (!(alpha > 0.0) || alpha > 2.0)
            throw argument_error("variogram smoothness must lie in (0,2]");
    }

    double operator()(double h_s, double h_t) const {
        double g = 0.0;
        if (mode != VariogramMode::temporal_only) g += std::pow(h_s / rho_s, alpha);
        if (mode != VariogramMode::spatial_only) g += std::pow(h_t / rho_t, alpha);
        return g;
    }
};

struct Point3 {
    double x = 0.0, y = 0.0, t = 0.0;
};

/// Dense sampler for a centered Gaussian field pinned to zero at an anchor
/// point, with E[(eps(a) - eps(b))^2] = gamma(a,b). One Cholesky factor
/// serves every anchor: re-anchoring at k is eps(s) - eps(k).
class GaussianFieldEngine {
public:
    GaussianFieldEngine(std::vector<Point3> points,
                        std::function<double(const Point3&, const Point3&)> gamma,
                        std::size_t anchor);

    std::size_t size() const { return points_.size(); }
    std::size_t anchor() const { return anchor_; }
    double gamma(std::size_t a, std::size_t b) const { return gamma_(a, b); }
    double jitter_used() const { return jitter_; }

    /// One field draw with eps(anchor) = 0 exactly.
    void draw(Rng& rng, double* out) const;

    /// Same draw re-anchored so that eps(k) = 0.
    void draw_anchored(Rng& rng, std::size_t k, double* out) const;

private:
    std::vector<Point3> points_;
    std::size_t anchor_;
    Eigen::MatrixXd gamma_;  // pairwise variogram values
    Eigen::MatrixXd chol_;   // lower factor over non-anchor representatives
    std::vector<std::size_t> rep_slot_;      // point -> slot in the collapsed set
    std::vector<std::size_t> free_slots_;    // collapsed slots excluding the anchor's
    std::size_t n_slots_ = 0;
    std::size_t anchor_slot_ = 0;
    double jitter_ = 0.0;
};

struct BrownResnickConfig {
    std::uint64_t max_proposals = 1'000'000;  // per field draw
};

/// One exact Brown-Resnick draw (unit Frechet margins) at the engine's
/// points via the extremal-functions algorithm.
std::vector<double> brown_resnick_draw(const GaussianFieldEngine& engine, Rng& rng,
                                       const BrownResnickConfig& config = {});

/// Truncated spectral-sum draw; biased, kept only as a validation reference
/// for the exact sampler.
std::vector<double> brown_resnick_draw_truncated(const GaussianFieldEngine& engine, Rng& rng,
                                                 std::size_t n_terms);

/// Gaussian field draws over the layout cells (one per replicate), pinned at
/// `anchor_cell` (flat site*T + t index). Variance at p equals gamma(p, anchor).
ProcessSample sample_gaussian_field(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                    std::size_t anchor_cell, std::uint64_t seed);

/// Exact Brown-Resnick process on the layout, unit Frechet margins.
/// spatial_only: independent across time indices; temporal_only: independent
/// across sites; spatiotemporal: one field over all cells.
ProcessSample sample_brown_resnick(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                   std::uint64_t seed, const BrownResnickConfig& config = {});

/// Truncated-sum variant of the above (validation reference only).
ProcessSample sample_brown_resnick_truncated(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                             std::uint64_t seed, std::size_t n_terms);

/// Inverted Brown-Resnick process with standard Pareto margins:
/// W(s) = 1 / G{Z(s)} for Z Brown-Resnick with the given variogram.
ProcessSample sample_inverted_br(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                 std::uint64_t seed, const BrownResnickConfig& config = {});

/// Monotone-increasing probability integral transform to Exp(1) margins.
/// unit Frechet z -> -log(1 - exp(-1/z)); standard Pareto w -> log w.
ProcessSample to_standard_exponential(const ProcessSample& p);

/// The cell-level transforms behind to_standard_exponential.
double frechet_to_exponential(double z);
double pareto_to_exponential(double w);

}  // namespace stxm
