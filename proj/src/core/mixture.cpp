#include "mixture.hpp"

#include <algorithm>
#include <cmath>

namespace stxm {

EtaParams theta_to_eta(const MixtureParams& p) {
    EtaParams e;
    e.eta[0] = std::log(p.lambda[1] / p.lambda[0]);
    e.eta[1] = std::log(p.lambda[2] / p.lambda[0]);
    e.eta[2] = std::log(p.lambda[3] / p.lambda[0]);
    e.eta[3] = std::log(p.rho_s);
    e.eta[4] = std::log(p.rho_t);
    return e;
}

MixtureParams eta_to_theta(const EtaParams& e) {
    for (double v : e.eta)
        if (!std::isfinite(v)) throw argument_error("eta components must be finite");
    double denom = 1.0;  // exp(eta_0) with eta_0 = 0
    for (int k = 0; k < 3; ++k) denom += std::exp(e.eta[k]);
    std::array<double, 4> lambda;
    lambda[0] = 1.0 / denom;
    for (int k = 0; k < 3; ++k) lambda[k + 1] = std::exp(e.eta[k]) / denom;
    return MixtureParams(lambda, std::exp(e.eta[3]), std::exp(e.eta[4]));
}

std::array<std::uint64_t, 4> mixture_component_seeds(std::uint64_t seed) {
    return {derive_seed(seed, 0), derive_seed(seed, 1), derive_seed(seed, 2),
            derive_seed(seed, 3)};
}

MixtureComponents simulate_mixture_components(const MixtureParams& p,
                                              const SpaceTimeLayout& layout,
                                              const std::array<std::uint64_t, 4>& component_seeds,
                                              const BrownResnickConfig& config) {
    const VariogramSpec st(p.rho_s, p.rho_t, VariogramMode::spatiotemporal);
    const VariogramSpec sp(p.rho_s, p.rho_t, VariogramMode::spatial_only);
    const VariogramSpec tm(p.rho_s, p.rho_t, VariogramMode::temporal_only);

    MixtureComponents c;
    c.parts[0] = to_standard_exponential(sample_brown_resnick(st, layout, component_seeds[0], config));
    c.parts[1] = to_standard_exponential(sample_brown_resnick(sp, layout, component_seeds[1], config));
    c.parts[2] = to_standard_exponential(sample_brown_resnick(tm, layout, component_seeds[2], config));
    c.parts[3] = to_standard_exponential(sample_inverted_br(st, layout, component_seeds[3], config));
    return c;
}

Dataset simulate_mixture(const MixtureParams& p, const SpaceTimeLayout& layout,
                         std::uint64_t seed, const BrownResnickConfig& config) {
    const MixtureComponents c =
        simulate_mixture_components(p, layout, mixture_component_seeds(seed), config);
    Dataset out(layout, MarginTag::hypoexponential);
    const std::size_t n = out.values.size();
    for (std::size_t i = 0; i < n; ++i)
        out.values[i] = p.lambda[0] * c.parts[0].values[i] + p.lambda[1] * c.parts[1].values[i] +
                        p.lambda[2] * c.parts[2].values[i] + p.lambda[3] * c.parts[3].values[i];
    return out;
}

Dataset transform_to_uniform(const Dataset& d, const MixtureParams& p) {
    if (d.margin != MarginTag::hypoexponential)
        throw model_error(std::string("expected hypoexponential margins, got ") +
                          margin_tag_name(d.margin));
    const HypoexpParams h = p.hypoexp();
    Dataset out = d;
    for (double& v : out.values) v = std::min(hypoexp_cdf(h, v), 1.0 - 1e-16);
    out.margin = MarginTag::uniform;
    return out;
}

Dataset transform_to_gpd(const Dataset& d, const MixtureParams* p, const MarginalModel& targets) {
    if (targets.thresholds.size() != d.layout.n_sites() ||
        targets.scales.size() != d.layout.n_sites())
        throw argument_error("marginal model must cover every site");

    Dataset u;
    if (d.margin == MarginTag::hypoexponential) {
        if (p == nullptr)
            throw argument_error("hypoexponential input needs the mixture weights for H");
        u = transform_to_uniform(d, *p);
    } else if (d.margin == MarginTag::uniform) {
        u = d;
    } else {
        throw model_error(std::string("expected hypoexponential or uniform margins, got ") +
                          margin_tag_name(d.margin));
    }

    Dataset out = u;
    const std::size_t m = d.layout.n_sites(), T = d.layout.n_times();
    for (std::size_t r = 0; r < d.layout.n_replicates; ++r)
        for (std::size_t s = 0; s < m; ++s) {
            const GpdParams site = targets.site_params(s);
            for (std::size_t t = 0; t < T; ++t)
                out.at(r, s, t) = gpd_quantile(site, std::min(out.at(r, s, t), 1.0 - 1e-16));
        }
    out.margin = MarginTag::gpd_target;
    return out;
}

}  // namespace stxm
