#include "simulators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stxm {

GaussianFieldEngine::GaussianFieldEngine(std::vector<Point3> points,
                                         std::function<double(const Point3&, const Point3&)> gamma,
                                         std::size_t anchor)
    : points_(std::move(points)), anchor_(anchor) {
    const std::size_t n = points_.size();
    if (n == 0) throw argument_error("Gaussian field needs at least one point");
    if (anchor_ >= n) throw argument_error("anchor index out of range");
    if (n > 10'000) throw argument_error("dense Gaussian sampling is capped at 1e4 points");

    gamma_.resize(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        gamma_(a, a) = 0.0;
        for (std::size_t b = a + 1; b < n; ++b) {
            const double g = gamma(points_[a], points_[b]);
            gamma_(a, b) = g;
            gamma_(b, a) = g;
        }
    }

    // Points at variogram distance zero are comonotone; collapse them onto
    // one representative so they share values exactly and the covariance
    // stays nonsingular.
    rep_slot_.assign(n, 0);
    std::vector<std::size_t> slot_point;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t slot = slot_point.size();
        for (std::size_t s = 0; s < slot_point.size(); ++s)
            if (gamma_(i, slot_point[s]) == 0.0) {
                slot = s;
                break;
            }
        if (slot == slot_point.size()) slot_point.push_back(i);
        rep_slot_[i] = slot;
    }
    n_slots_ = slot_point.size();
    anchor_slot_ = rep_slot_[anchor_];
    free_slots_.reserve(n_slots_ - 1);
    for (std::size_t s = 0; s < n_slots_; ++s)
        if (s != anchor_slot_) free_slots_.push_back(s);

    // Covariance of the anchored field on the non-anchor representatives:
    // cov(a,b) = (gamma(a,anchor) + gamma(b,anchor) - gamma(a,b)) / 2.
    const std::size_t k = free_slots_.size();
    Eigen::MatrixXd cov(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t a = slot_point[free_slots_[i]], b = slot_point[free_slots_[j]];
            const std::size_t o = slot_point[anchor_slot_];
            cov(i, j) = 0.5 * (gamma_(a, o) + gamma_(b, o) - gamma_(a, b));
        }

    if (k == 0) return;
    double jitter = 0.0;
    for (;;) {
        Eigen::MatrixXd attempt = cov;
        if (jitter > 0.0)
            for (std::size_t i = 0; i < k; ++i) attempt(i, i) += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(attempt);
        if (llt.info() == Eigen::Success) {
            chol_ = llt.matrixL();
            jitter_ = jitter;
            return;
        }
        if (jitter == 0.0)
            jitter = 1e-10;
        else if (jitter < 1e-6)
            jitter *= 10.0;
        else
            throw numeric_error("field covariance not positive semidefinite after jitter escalation");
    }
}

void GaussianFieldEngine::draw(Rng& rng, double* out) const {
    const std::size_t k = free_slots_.size();
    Eigen::VectorXd z(k);
    for (std::size_t i = 0; i < k; ++i) z(i) = rng.normal();
    Eigen::VectorXd eps = chol_.triangularView<Eigen::Lower>() * z;
    std::vector<double> slot_value(n_slots_, 0.0);
    for (std::size_t i = 0; i < k; ++i) slot_value[free_slots_[i]] = eps(i);
    for (std::size_t p = 0; p < points_.size(); ++p) out[p] = slot_value[rep_slot_[p]];
}

void GaussianFieldEngine::draw_anchored(Rng& rng, std::size_t k, double* out) const {
    draw(rng, out);
    if (k == anchor_) return;
    const double shift = out[k];
    for (std::size_t i = 0; i < size(); ++i) out[i] -= shift;
    out[k] = 0.0;
}

std::vector<double> brown_resnick_draw(const GaussianFieldEngine& engine, Rng& rng,
                                       const BrownResnickConfig& config) {
    const std::size_t n = engine.size();
    std::vector<double> z(n, 0.0);
    std::vector<double> eps(n);
    std::uint64_t proposals = 0;

    auto spectral_at = [&](std::size_t k) {
        // Extremal-function profile at anchor k: V(s) = exp(eps_k(s) - gamma(s,k)/2),
        // V(k) = 1.
        engine.draw_anchored(rng, k, eps.data());
        if (++proposals > config.max_proposals)
            throw simulation_error("Brown-Resnick sampler exceeded " +
                                   std::to_string(config.max_proposals) + " proposals at " +
                                   std::to_string(n) + " points");
    };

    // First location: the top Poisson point is the extremal function there.
    double gamma_inc = rng.exponential();
    spectral_at(0);
    for (std::size_t s = 0; s < n; ++s)
        z[s] = std::exp(eps[s] - 0.5 * engine.gamma(s, 0)) / gamma_inc;

    for (std::size_t k = 1; k < n; ++k) {
        double acc = rng.exponential();
        while (1.0 / acc > z[k]) {
            spectral_at(k);
            const double val = 1.0 / acc;
            bool keeps_lower = true;
            for (std::size_t j = 0; j < k; ++j) {
                if (val * std::exp(eps[j] - 0.5 * engine.gamma(j, k)) >= z[j]) {
                    keeps_lower = false;
                    break;
                }
            }
            // Sites below k are untouched by an accepted function, so only
            // the tail needs the max update.
            if (keeps_lower)
                for (std::size_t s = k; s < n; ++s)
                    z[s] = std::max(z[s], val * std::exp(eps[s] - 0.5 * engine.gamma(s, k)));
            acc += rng.exponential();
        }
    }
    return z;
}

std::vector<double> brown_resnick_draw_truncated(const GaussianFieldEngine& engine, Rng& rng,
                                                 std::size_t n_terms) {
    const std::size_t n = engine.size();
    std::vector<double> z(n, 0.0);
    std::vector<double> eps(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_terms; ++i) {
        acc += rng.exponential();
        engine.draw(rng, eps.data());
        for (std::size_t s = 0; s < n; ++s) {
            const double w = std::exp(eps[s] - 0.5 * engine.gamma(s, engine.anchor()));
            z[s] = std::max(z[s], w / acc);
        }
    }
    return z;
}

namespace {

std::vector<Point3> cell_points(const SpaceTimeLayout& layout) {
    std::vector<Point3> pts;
    pts.reserve(layout.n_cells());
    for (std::size_t s = 0; s < layout.n_sites(); ++s)
        for (std::size_t t = 0; t < layout.n_times(); ++t)
            pts.push_back({layout.sites[s][0], layout.sites[s][1], layout.times[t]});
    return pts;
}

std::function<double(const Point3&, const Point3&)> variogram_fn(const VariogramSpec& v) {
    return [v](const Point3& a, const Point3& b) {
        const double dx = a.x - b.x, dy = a.y - b.y;
        return v(std::sqrt(dx * dx + dy * dy), std::abs(a.t - b.t));
    };
}

}  // namespace

ProcessSample sample_gaussian_field(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                    std::size_t anchor_cell, std::uint64_t seed) {
    layout.validate();
    if (anchor_cell >= layout.n_cells()) throw argument_error("anchor cell out of range");
    GaussianFieldEngine engine(cell_points(layout), variogram_fn(v), anchor_cell);
    ProcessSample out(layout, MarginTag::standard_exponential);
    // Margin tag is unused for raw fields; values are plain Gaussians.
    std::vector<double> eps(layout.n_cells());
    const std::size_t cells = layout.n_cells();
    for (std::size_t r = 0; r < layout.n_replicates; ++r) {
        Rng rng(derive_seed(seed, r));
        engine.draw(rng, eps.data());
        std::copy(eps.begin(), eps.end(), out.values.begin() + static_cast<long>(r * cells));
    }
    return out;
}

ProcessSample sample_brown_resnick(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                   std::uint64_t seed, const BrownResnickConfig& config) {
    layout.validate();
    ProcessSample out(layout, MarginTag::unit_frechet);
    const std::size_t m = layout.n_sites(), T = layout.n_times();

    switch (v.mode) {
        case VariogramMode::spatiotemporal: {
            GaussianFieldEngine engine(cell_points(layout), variogram_fn(v), 0);
            for (std::size_t r = 0; r < layout.n_replicates; ++r) {
                Rng rng(derive_seed(seed, r));
                const std::vector<double> z = brown_resnick_draw(engine, rng, config);
                std::copy(z.begin(), z.end(), out.values.begin() + static_cast<long>(r * m * T));
            }
            break;
        }
        case VariogramMode::spatial_only: {
            std::vector<Point3> pts(m);
            for (std::size_t s = 0; s < m; ++s)
                pts[s] = {layout.sites[s][0], layout.sites[s][1], 0.0};
            GaussianFieldEngine engine(std::move(pts), variogram_fn(v), 0);
            for (std::size_t r = 0; r < layout.n_replicates; ++r)
                for (std::size_t t = 0; t < T; ++t) {
                    Rng rng(derive_seed(seed, r, t));
                    const std::vector<double> z = brown_resnick_draw(engine, rng, config);
                    for (std::size_t s = 0; s < m; ++s) out.at(r, s, t) = z[s];
                }
            break;
        }
        case VariogramMode::temporal_only: {
            std::vector<Point3> pts(T);
            for (std::size_t t = 0; t < T; ++t) pts[t] = {0.0, 0.0, layout.times[t]};
            GaussianFieldEngine engine(std::move(pts), variogram_fn(v), 0);
            for (std::size_t r = 0; r < layout.n_replicates; ++r)
                for (std::size_t s = 0; s < m; ++s) {
                    Rng rng(derive_seed(seed, r, s));
                    const std::vector<double> z = brown_resnick_draw(engine, rng, config);
                    for (std::size_t t = 0; t < T; ++t) out.at(r, s, t) = z[t];
                }
            break;
        }
    }
    return out;
}

ProcessSample sample_brown_resnick_truncated(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                             std::uint64_t seed, std::size_t n_terms) {
    layout.validate();
    if (v.mode != VariogramMode::spatiotemporal)
        throw argument_error("truncated reference sampler covers the spatiotemporal mode only");
    GaussianFieldEngine engine(cell_points(layout), variogram_fn(v), 0);
    ProcessSample out(layout, MarginTag::unit_frechet);
    const std::size_t cells = layout.n_cells();
    for (std::size_t r = 0; r < layout.n_replicates; ++r) {
        Rng rng(derive_seed(seed, r));
        const std::vector<double> z = brown_resnick_draw_truncated(engine, rng, n_terms);
        std::copy(z.begin(), z.end(), out.values.begin() + static_cast<long>(r * cells));
    }
    return out;
}

ProcessSample sample_inverted_br(const VariogramSpec& v, const SpaceTimeLayout& layout,
                                 std::uint64_t seed, const BrownResnickConfig& config) {
    ProcessSample z = sample_brown_resnick(v, layout, seed, config);
    // 1/G(z) with G the unit Frechet CDF; margins standard Pareto on [1, inf).
    for (double& val : z.values) val = std::exp(1.0 / val);
    z.margin = MarginTag::standard_pareto;
    return z;
}

double frechet_to_exponential(double z) { return -std::log(-std::expm1(-1.0 / z)); }

double pareto_to_exponential(double w) { return std::log(w); }

ProcessSample to_standard_exponential(const ProcessSample& p) {
    ProcessSample out = p;
    switch (p.margin) {
        case MarginTag::unit_frechet:
            for (double& v : out.values) v = frechet_to_exponential(v);
            break;
        case MarginTag::standard_pareto:
            for (double& v : out.values) v = pareto_to_exponential(v);
            break;
        default:
            throw model_error(std::string("cannot transform margins tagged ") +
                              margin_tag_name(p.margin) + " to standard exponential");
    }
    out.margin = MarginTag::standard_exponential;
    return out;
}

}  // namespace stxm
