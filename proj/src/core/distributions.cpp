#include "distributions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "errors.hpp"
#include "rng.hpp"

namespace stxm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamped_diff(double a, double b, double gap) {
    const double d = a - b;
    if (std::abs(d) >= gap) return d;
    return d >= 0.0 ? gap : -gap;
}

// Coefficient of exp(-x/w[j]) in the hypoexponential survival function:
// prod_{k != j} w[j] / (w[j] - w[k]).
double survival_coeff(const std::vector<double>& w, std::size_t j, double gap) {
    double c = 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (k == j) continue;
        c *= w[j] / clamped_diff(w[j], w[k], gap);
    }
    return c;
}

}  // namespace

GpdParams::GpdParams(double threshold_, double scale_, double shape_)
    : threshold(threshold_), scale(scale_), shape(shape_) {
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw argument_error("GPD scale must be strictly positive");
    if (!std::isfinite(threshold) || !std::isfinite(shape))
        throw argument_error("GPD parameters must be finite");
}

double gpd_cdf(const GpdParams& p, double y) {
    if (!(y > p.threshold)) return 0.0;
    const double z = (y - p.threshold) / p.scale;
    if (std::abs(p.shape) < kShapeZeroEps) return -std::expm1(-z);
    const double t = 1.0 + p.shape * z;
    if (t <= 0.0) return p.shape < 0.0 ? 1.0 : 0.0;
    return -std::expm1(-std::log(t) / p.shape);
}

double gpd_log_pdf(const GpdParams& p, double y) {
    const double z = (y - p.threshold) / p.scale;
    if (z < 0.0) return -kInf;
    if (std::abs(p.shape) < kShapeZeroEps) return -std::log(p.scale) - z;
    const double t = 1.0 + p.shape * z;
    if (t <= 0.0) return -kInf;
    return -std::log(p.scale) - (1.0 / p.shape + 1.0) * std::log(t);
}

double gpd_pdf(const GpdParams& p, double y) {
    const double l = gpd_log_pdf(p, y);
    return l == -kInf ? 0.0 : std::exp(l);
}

double gpd_quantile(const GpdParams& p, double u) {
    if (!(u >= 0.0) || !(u < 1.0)) throw argument_error("GPD quantile level must lie in [0,1)");
    if (u == 0.0) return p.threshold;
    if (std::abs(p.shape) < kShapeZeroEps) return p.threshold - p.scale * std::log1p(-u);
    return p.threshold + p.scale * std::expm1(-p.shape * std::log1p(-u)) / p.shape;
}

HypoexpParams::HypoexpParams(const std::array<double, 4>& w, double min_gap) : weights(w) {
    double sum = 0.0;
    for (double v : weights) {
        if (!std::isfinite(v) || v < min_gap || v >= 1.0)
            throw argument_error("hypoexponential weights must lie in [gap, 1)");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw argument_error("hypoexponential weights must sum to 1 within 1e-12");
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            if (std::abs(weights[i] - weights[j]) < min_gap)
                throw argument_error("hypoexponential weights closer than the distinctness gap");
}

double hypoexp_cdf(const HypoexpParams& p, double x) {
    if (!(x > 0.0)) return 0.0;
    const std::vector<double> w(p.weights.begin(), p.weights.end());
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        s += survival_coeff(w, j, kHypoexpMinGap) * std::exp(-x / w[j]);
    return std::min(1.0, std::max(0.0, 1.0 - s));
}

double hypoexp_survival_k(const std::vector<double>& weights, double x) {
    if (weights.size() < 2 || weights.size() > 4)
        throw argument_error("hypoexponential survival supports k in {2,3,4}");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0)) throw argument_error("hypoexponential weights must be positive");
        for (std::size_t j = i + 1; j < weights.size(); ++j)
            if (std::abs(weights[i] - weights[j]) < kHypoexpMinGap)
                throw argument_error("repeated hypoexponential weights");
    }
    if (!(x > 0.0)) return 1.0;
    double s = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j)
        s += survival_coeff(weights, j, kHypoexpMinGap) * std::exp(-x / weights[j]);
    return s;
}

double hypoexp_quantile(const HypoexpParams& p, double u) {
    if (!(u >= 0.0) || !(u < 1.0))
        throw argument_error("hypoexponential quantile level must lie in [0,1)");
    if (u == 0.0) return 0.0;
    const double wmax = *std::max_element(p.weights.begin(), p.weights.end());
    double lo = 0.0;
    double hi = -wmax * std::log1p(-u) + 1.0;
    while (hypoexp_cdf(p, hi) < u) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hypoexp_cdf(p, mid) < u)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

double empirical_quantile_sorted(const std::vector<double>& sorted, double tau) {
    if (sorted.empty()) throw data_error("empirical quantile of an empty list");
    if (!(tau > 0.0) || !(tau < 1.0)) throw argument_error("quantile level must lie in (0,1)");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * tau;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(const std::vector<double>& values, double tau) {
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    return empirical_quantile_sorted(sorted, tau);
}

namespace {

// Pooled exceedance negative log-likelihood over x = (shape, log scales),
// with a smooth penalty outside the GPD support.
class SharedShapeObjective {
public:
    SharedShapeObjective(const std::vector<std::vector<double>>& exceedances,
                         const std::vector<double>& thresholds)
        : exceedances_(exceedances), thresholds_(thresholds) {
        max_excess_.resize(exceedances.size());
        for (std::size_t s = 0; s < exceedances.size(); ++s) {
            double mx = 0.0;
            for (double y : exceedances[s]) mx = std::max(mx, y - thresholds_[s]);
            max_excess_[s] = mx;
        }
    }

    double operator()(const std::vector<double>& x) const {
        const double xi = x[0];
        if (!std::isfinite(xi) || std::abs(xi) > 5.0) return 1e12 + std::abs(xi) * 1e10;
        double nll = 0.0;
        for (std::size_t s = 0; s < exceedances_.size(); ++s) {
            const double log_sigma = x[1 + s];
            if (!std::isfinite(log_sigma) || std::abs(log_sigma) > 40.0) return 1e12;
            const double sigma = std::exp(log_sigma);
            if (xi < 0.0) {
                const double upper = -sigma / xi;
                if (max_excess_[s] >= upper)
                    return 1e10 * (1.0 + max_excess_[s] - upper);  // outside support
            }
            const std::size_t n = exceedances_[s].size();
            nll += static_cast<double>(n) * log_sigma;
            if (std::abs(xi) < kShapeZeroEps) {
                for (double y : exceedances_[s]) nll += (y - thresholds_[s]) / sigma;
            } else {
                const double a = 1.0 / xi + 1.0;
                for (double y : exceedances_[s])
                    nll += a * std::log1p(xi * (y - thresholds_[s]) / sigma);
            }
        }
        return nll;
    }

private:
    const std::vector<std::vector<double>>& exceedances_;
    const std::vector<double>& thresholds_;
    std::vector<double> max_excess_;
};

struct NmResult {
    std::vector<double> x;
    double f = kInf;
    int evaluations = 0;
    bool converged = false;
};

// Nelder-Mead with the Gao-Han adaptive coefficients (better behaviour in
// higher dimensions than the textbook constants).
NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                     const std::vector<double>& start, double step, int max_iterations,
                     double tolerance) {
    const std::size_t n = start.size();
    const double nd = static_cast<double>(n);
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / nd;
    const double gamma = 0.75 - 0.5 / nd;
    const double delta = 1.0 - 1.0 / nd;

    NmResult res;
    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 1; i <= n; ++i) pts[i][i - 1] += step;
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);
    res.evaluations = static_cast<int>(n) + 1;

    std::vector<std::size_t> order(n + 1);
    for (int it = 0; it < max_iterations; ++it) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];
        if (vals[worst] - vals[best] < tolerance * (1.0 + std::abs(vals[best]))) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
        }
        for (double& c : centroid) c /= nd;

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d) p[d] = centroid[d] + t * (centroid[d] - pts[worst][d]);
            return p;
        };

        std::vector<double> xr = blend(alpha);
        const double fr = f(xr);
        ++res.evaluations;
        if (fr < vals[order[0]]) {
            std::vector<double> xe = blend(beta);
            const double fe = f(xe);
            ++res.evaluations;
            if (fe < fr) {
                pts[worst] = std::move(xe);
                vals[worst] = fe;
            } else {
                pts[worst] = std::move(xr);
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = std::move(xr);
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            std::vector<double> xc = blend(outside ? gamma : -gamma);
            const double fc = f(xc);
            ++res.evaluations;
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = std::move(xc);
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        pts[i][d] = pts[best][d] + delta * (pts[i][d] - pts[best][d]);
                    vals[i] = f(pts[i]);
                    ++res.evaluations;
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (vals[i] < vals[best]) best = i;
    res.x = pts[best];
    res.f = vals[best];
    return res;
}

// Derivative-free per-coordinate polish: golden-section within a shrinking
// bracket around the current point, repeated until no coordinate improves.
void coordinate_polish(const std::function<double(const std::vector<double>&)>& f,
                       std::vector<double>& x, double& fx, int& evaluations) {
    const double gr = 0.6180339887498949;
    for (int pass = 0; pass < 6; ++pass) {
        bool improved = false;
        for (std::size_t d = 0; d < x.size(); ++d) {
            double lo = x[d] - 0.05, hi = x[d] + 0.05;
            for (int it = 0; it < 40; ++it) {
                const double m1 = hi - gr * (hi - lo);
                const double m2 = lo + gr * (hi - lo);
                std::vector<double> p = x;
                p[d] = m1;
                const double f1 = f(p);
                p[d] = m2;
                const double f2 = f(p);
                evaluations += 2;
                if (f1 < f2)
                    hi = m2;
                else
                    lo = m1;
            }
            std::vector<double> p = x;
            p[d] = 0.5 * (lo + hi);
            const double fp = f(p);
            ++evaluations;
            if (fp < fx - 1e-13 * (1.0 + std::abs(fx))) {
                x = std::move(p);
                fx = fp;
                improved = true;
            }
        }
        if (!improved) break;
    }
}

}  // namespace

double gpd_shared_shape_loglik(const std::vector<std::vector<double>>& exceedances,
                               const MarginalModel& model) {
    double ll = 0.0;
    for (std::size_t s = 0; s < exceedances.size(); ++s) {
        const GpdParams p = model.site_params(s);
        for (double y : exceedances[s]) {
            const double l = gpd_log_pdf(p, y);
            if (l == -kInf) return -kInf;
            ll += l;
        }
    }
    return ll;
}

MarginalFit gpd_fit_shared_shape(const std::vector<std::vector<double>>& exceedances,
                                 const std::vector<double>& thresholds,
                                 const GpdFitConfig& config) {
    const std::size_t m = exceedances.size();
    if (m == 0 || thresholds.size() != m)
        throw argument_error("exceedance lists and thresholds must have matching nonzero size");
    for (std::size_t s = 0; s < m; ++s) {
        if (exceedances[s].size() < static_cast<std::size_t>(config.min_exceedances))
            throw data_error("site " + std::to_string(s) + " has fewer than " +
                             std::to_string(config.min_exceedances) + " exceedances");
        for (double y : exceedances[s])
            if (!(y >= thresholds[s]))
                throw data_error("exceedance below its threshold at site " + std::to_string(s));
    }

    // Moment-based starting values: pooled shape, per-site scales.
    double pooled_mean = 0.0, pooled_sq = 0.0;
    std::size_t total = 0;
    std::vector<double> site_mean(m, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
        for (double y : exceedances[s]) {
            const double z = y - thresholds[s];
            pooled_mean += z;
            pooled_sq += z * z;
            site_mean[s] += z;
        }
        site_mean[s] /= static_cast<double>(exceedances[s].size());
        total += exceedances[s].size();
    }
    pooled_mean /= static_cast<double>(total);
    const double pooled_var =
        std::max(1e-12, pooled_sq / static_cast<double>(total) - pooled_mean * pooled_mean);
    double xi0 = 0.5 * (1.0 - pooled_mean * pooled_mean / pooled_var);
    xi0 = std::min(0.9, std::max(-0.45, xi0));

    const SharedShapeObjective nll(exceedances, thresholds);
    auto objective = [&nll](const std::vector<double>& x) { return nll(x); };

    Rng rng(config.restart_seed);
    NmResult best;
    bool any_converged = false;
    for (int r = 0; r < std::max(1, config.restarts); ++r) {
        std::vector<double> start(1 + m);
        const double jitter_xi = r == 0 ? 0.0 : 0.25 * (rng.uniform() - 0.5);
        start[0] = std::min(0.9, std::max(-0.45, xi0 + jitter_xi));
        for (std::size_t s = 0; s < m; ++s) {
            const double sigma0 = std::max(1e-8, site_mean[s] * (1.0 - std::min(0.9, start[0])));
            const double jitter = r == 0 ? 0.0 : 0.4 * (rng.uniform() - 0.5);
            start[1 + s] = std::log(sigma0) + jitter;
        }
        NmResult res = nelder_mead(objective, start, 0.1, config.max_iterations, config.tolerance);
        any_converged = any_converged || res.converged;
        if (res.f < best.f) {
            const bool keep_conv = res.converged;
            res.converged = keep_conv;
            best = std::move(res);
        }
    }
    coordinate_polish(objective, best.x, best.f, best.evaluations);

    MarginalFit fit;
    fit.model.thresholds = thresholds;
    fit.model.shape = best.x[0];
    fit.model.scales.resize(m);
    for (std::size_t s = 0; s < m; ++s) fit.model.scales[s] = std::exp(best.x[1 + s]);
    fit.log_likelihood = -best.f;
    fit.converged = any_converged;
    fit.evaluations = best.evaluations;
    if (!fit.converged) throw GpdFitError("shared-shape GPD fit did not converge", fit);
    return fit;
}

}  // namespace stxm
