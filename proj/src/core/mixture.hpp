#pragma once

#include <array>
#include <cstdint>

#include "distributions.hpp"
#include "grid.hpp"
#include "simulators.hpp"

namespace stxm {

/// Dependence parameters theta = (lambda_1..lambda_4, rho_S, rho_T).
/// The weights belong, in order, to the spatiotemporal max-stable part,
/// the spatial part, the temporal part, and the inverted (asymptotically
/// independent) part.
struct MixtureParams {
    std::array<double, 4> lambda{};
    double rho_s = 0.4;
    double rho_t = 0.4;

    MixtureParams() = default;
    MixtureParams(const std::array<double, 4>& lambda_, double rho_s_, double rho_t_)
        : lambda(lambda_), rho_s(rho_s_), rho_t(rho_t_) {
        (void)HypoexpParams(lambda);  // enforces the weight invariants
        if (!(rho_s > 0.0) || !(rho_t > 0.0))
            throw argument_error("mixture ranges must be strictly positive");
    }

    HypoexpParams hypoexp() const { return HypoexpParams(lambda); }
    std::size_t dominant_index() const {
        std::size_t j = 0;
        for (std::size_t k = 1; k < 4; ++k)
            if (lambda[k] > lambda[j]) j = k;
        return j;
    }
};

/// Unbounded reparameterization eta_1..eta_3 = log(lambda_{k+1}/lambda_1),
/// eta_4 = log rho_S, eta_5 = log rho_T.
struct EtaParams {
    std::array<double, 5> eta{};
};

EtaParams theta_to_eta(const MixtureParams& p);

/// Inverse map. Throws (argument error) when the implied weights violate
/// the distinctness gate; callers are expected to resample rather than
/// nudge the values.
MixtureParams eta_to_theta(const EtaParams& e);

/// The four component processes of one mixture draw, each already on
/// standard exponential margins, in parameter order.
struct MixtureComponents {
    std::array<ProcessSample, 4> parts;
};

/// Master seed -> four per-component streams, derived as
/// derive_seed(seed, k) for k = 0..3; each component stream then derives
/// one substream per replicate (and per slice in the degenerate modes).
std::array<std::uint64_t, 4> mixture_component_seeds(std::uint64_t seed);

MixtureComponents simulate_mixture_components(const MixtureParams& p,
                                              const SpaceTimeLayout& layout,
                                              const std::array<std::uint64_t, 4>& component_seeds,
                                              const BrownResnickConfig& config = {});

/// Full-model draw: X = sum_k lambda_k * component_k, hypoexponential
/// margins, deterministic per seed.
Dataset simulate_mixture(const MixtureParams& p, const SpaceTimeLayout& layout,
                         std::uint64_t seed, const BrownResnickConfig& config = {});

/// Exact probability integral transform H_lambda: hypoexponential -> uniform.
Dataset transform_to_uniform(const Dataset& d, const MixtureParams& p);

/// G(x) = F^{-1}(H_lambda(x)) with per-site GPD targets. Accepts either a
/// hypoexponential-margin dataset (applies H first) or a uniform one.
Dataset transform_to_gpd(const Dataset& d, const MixtureParams* p, const MarginalModel& targets);

}  // namespace stxm
