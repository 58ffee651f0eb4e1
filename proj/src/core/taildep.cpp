#include "taildep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "bspline.hpp"
#include "simulators.hpp"
#include "threading.hpp"

namespace stxm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

int PairBinGrid::bin_of(double h_s, double h_t) const {
    if (h_s < spatial_edges.front() || h_s >= spatial_edges.back()) return -1;
    if (h_t < temporal_edges.front() || h_t >= temporal_edges.back()) return -1;
    std::size_t si = n_spatial() - 1;
    for (std::size_t i = 0; i + 1 < spatial_edges.size(); ++i)
        if (h_s < spatial_edges[i + 1]) {
            si = i;
            break;
        }
    std::size_t ti = n_temporal() - 1;
    for (std::size_t i = 0; i + 1 < temporal_edges.size(); ++i)
        if (h_t < temporal_edges[i + 1]) {
            ti = i;
            break;
        }
    return static_cast<int>(flat(si, ti));
}

PairTable::PairTable(const SpaceTimeLayout& layout, const PairBinGrid& grid) {
    const std::size_t m = layout.n_sites(), T = layout.n_times();
    per_replicate_count.assign(grid.n_bins(), 0);
    for (std::size_t sa = 0; sa < m; ++sa)
        for (std::size_t sb = sa; sb < m; ++sb) {
            const double h_s = layout.spatial_distance(sa, sb);
            for (std::size_t ta = 0; ta < T; ++ta) {
                // Unordered cell pairs: within a site start above the
                // diagonal, across sites take all time combinations.
                const std::size_t tb0 = (sa == sb) ? ta + 1 : 0;
                for (std::size_t tb = tb0; tb < T; ++tb) {
                    const int bin = grid.bin_of(h_s, layout.time_lag(ta, tb));
                    if (bin < 0) continue;
                    pairs.push_back({static_cast<std::uint32_t>(sa * T + ta),
                                     static_cast<std::uint32_t>(sb * T + tb),
                                     static_cast<std::uint32_t>(bin)});
                    ++per_replicate_count[static_cast<std::size_t>(bin)];
                }
            }
        }
}

namespace {

std::vector<std::uint32_t> all_replicates(const Dataset& d) {
    std::vector<std::uint32_t> r(d.layout.n_replicates);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<std::uint32_t>(i);
    return r;
}

}  // namespace

ChiSurface empirical_chi(const Dataset& d, double tau, const PairTable& table,
                         const PairBinGrid& grid, const std::vector<std::uint32_t>& replicates) {
    if (d.margin != MarginTag::uniform)
        throw model_error(std::string("empirical chi needs uniform margins, got ") +
                          margin_tag_name(d.margin));
    if (!(tau > 0.0) || !(tau < 1.0)) throw argument_error("tau must lie in (0,1)");
    if (table.pairs.empty()) throw data_error("no cell pairs fall inside the distance bins");

    const std::size_t nb = grid.n_bins();
    std::vector<std::uint64_t> both(nb, 0), exceed(nb, 0), count(nb, 0);
    const std::size_t cells = d.layout.n_cells();
    for (std::uint32_t r : replicates) {
        const double* v = d.values.data() + static_cast<std::size_t>(r) * cells;
        const std::uint8_t* mask =
            d.present.empty() ? nullptr : d.present.data() + static_cast<std::size_t>(r) * cells;
        for (const PairTable::CellPair& pr : table.pairs) {
            if (mask && (!mask[pr.a] || !mask[pr.b])) continue;
            const bool xa = v[pr.a] > tau, xb = v[pr.b] > tau;
            ++count[pr.bin];
            exceed[pr.bin] += static_cast<std::uint64_t>(xa) + static_cast<std::uint64_t>(xb);
            both[pr.bin] += static_cast<std::uint64_t>(xa && xb);
        }
    }

    ChiSurface out;
    out.tau = tau;
    out.grid = grid;
    out.raw.assign(nb, kNaN);
    out.pair_count = count;
    out.missing.assign(nb, 1);
    for (std::size_t b = 0; b < nb; ++b) {
        if (exceed[b] == 0) continue;
        out.raw[b] = 2.0 * static_cast<double>(both[b]) / static_cast<double>(exceed[b]);
        out.missing[b] = 0;
    }
    return out;
}

ChiSurface empirical_chi(const Dataset& d, double tau, const PairTable& table,
                         const PairBinGrid& grid) {
    return empirical_chi(d, tau, table, grid, all_replicates(d));
}

ChiSurface smooth_surface(const ChiSurface& raw, double penalty) {
    const PairBinGrid& grid = raw.grid;
    const std::size_t nb = grid.n_bins();

    std::vector<double> xs, ys, vals, wts, qx(nb), qy(nb);
    for (std::size_t si = 0; si < grid.n_spatial(); ++si)
        for (std::size_t ti = 0; ti < grid.n_temporal(); ++ti) {
            const std::size_t b = grid.flat(si, ti);
            qx[b] = grid.spatial_center(si);
            qy[b] = grid.temporal_center(ti);
            if (raw.missing[b]) continue;
            xs.push_back(qx[b]);
            ys.push_back(qy[b]);
            vals.push_back(raw.raw[b]);
            wts.push_back(static_cast<double>(raw.pair_count[b]));
        }
    if (xs.empty()) throw data_error("chi surface has no populated bins to smooth");

    ChiSurface out = raw;
    out.smoothed.assign(nb, 0.0);

    CubicBasis bx(raw.grid.spatial_edges);
    CubicBasis by(raw.grid.temporal_edges);
    std::vector<double> fitted;
    if (tensor_spline_smooth(bx, by, xs, ys, vals, wts, penalty, qx, qy, fitted)) {
        out.smoothed = fitted;
    } else {
        // Rank-deficient design: weighted linear fit in (h_s, h_t), then a
        // weighted mean if even that degenerates.
        out.smoothing_fallback = true;
        std::fprintf(stderr, "[stxm] chi smoothing fell back to a linear fit (%zu bins)\n",
                     xs.size());
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const Eigen::Vector3d row(1.0, xs[i], ys[i]);
            m += wts[i] * row * row.transpose();
            rhs += wts[i] * vals[i] * row;
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod(m);
        cod.setThreshold(1e-10);
        if (cod.rank() == 3) {
            const Eigen::Vector3d beta = cod.solve(rhs);
            for (std::size_t b = 0; b < nb; ++b)
                out.smoothed[b] = beta(0) + beta(1) * qx[b] + beta(2) * qy[b];
        } else {
            double wsum = 0.0, vsum = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                wsum += wts[i];
                vsum += wts[i] * vals[i];
            }
            std::fill(out.smoothed.begin(), out.smoothed.end(), vsum / wsum);
        }
    }
    for (double& v : out.smoothed) v = std::min(1.0, std::max(0.0, v));
    return out;
}

BinnedStat conditional_exceedance_corr(const Dataset& d, double q0, const PairTable& table,
                                       const PairBinGrid& grid,
                                       const std::vector<std::uint32_t>& replicates,
                                       std::size_t min_pairs) {
    if (d.margin != MarginTag::uniform)
        throw model_error("conditional exceedance correlation needs uniform margins");

    const std::size_t nb = grid.n_bins();
    std::vector<std::uint64_t> count(nb, 0);
    std::vector<double> sx(nb, 0.0), sxx(nb, 0.0), sxy(nb, 0.0);
    const std::size_t cells = d.layout.n_cells();
    for (std::uint32_t r : replicates) {
        const double* v = d.values.data() + static_cast<std::size_t>(r) * cells;
        const std::uint8_t* mask =
            d.present.empty() ? nullptr : d.present.data() + static_cast<std::size_t>(r) * cells;
        for (const PairTable::CellPair& pr : table.pairs) {
            if (mask && (!mask[pr.a] || !mask[pr.b])) continue;
            const double a = v[pr.a], b = v[pr.b];
            if (!(a > q0 && b > q0)) continue;
            ++count[pr.bin];
            sx[pr.bin] += a + b;
            sxx[pr.bin] += a * a + b * b;
            sxy[pr.bin] += a * b;
        }
    }

    BinnedStat out;
    out.grid = grid;
    out.values.assign(nb, kNaN);
    out.pair_count = count;
    out.missing.assign(nb, 1);
    for (std::size_t b = 0; b < nb; ++b) {
        if (count[b] < min_pairs) continue;
        // Each unordered pair enters as both orderings, so the two margins
        // share their moments and the estimator is symmetric by construction.
        const double n = 2.0 * static_cast<double>(count[b]);
        const double var = n * sxx[b] - sx[b] * sx[b];
        const double cov = n * 2.0 * sxy[b] - sx[b] * sx[b];
        if (var <= 0.0) continue;
        out.values[b] = cov / var;
        out.missing[b] = 0;
    }
    return out;
}

BinnedStat conditional_exceedance_corr(const Dataset& d, double q0, const PairTable& table,
                                       const PairBinGrid& grid, std::size_t min_pairs) {
    return conditional_exceedance_corr(d, q0, table, grid, all_replicates(d), min_pairs);
}

namespace {

// Shared/independent structure of the simplified two-point model: which of
// the four components take a common value at both points.
std::array<bool, 4> shared_components(PairCase c) {
    switch (c) {
        case PairCase::spatial: return {true, true, false, false};
        case PairCase::temporal: return {true, false, true, false};
        case PairCase::spatiotemporal: return {true, false, false, false};
    }
    return {true, false, false, false};
}

struct PoleCheck {
    double value;
    std::string name;
};

}  // namespace

std::string theorem1_pole(const std::array<double, 4>& lambda, double tol) {
    const auto& l = lambda;
    std::vector<PoleCheck> checks;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            checks.push_back({2.0 * l[i] - l[j], "2*lambda" + std::to_string(i + 1) + " - lambda" +
                                                     std::to_string(j + 1)});
        }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k) {
                if (i == j || i == k) continue;
                checks.push_back({l[i] * l[j] + l[i] * l[k] - l[j] * l[k],
                                  "lambda" + std::to_string(i + 1) + "*lambda" +
                                      std::to_string(j + 1) + " + lambda" + std::to_string(i + 1) +
                                      "*lambda" + std::to_string(k + 1) + " - lambda" +
                                      std::to_string(j + 1) + "*lambda" + std::to_string(k + 1)});
            }
    for (const PoleCheck& c : checks)
        if (std::abs(c.value) < tol) return c.name;
    return {};
}

namespace {

// Joint survival of (X1, X2) when the shared part is the two-weight
// hypoexponential on (a1, a2) and each point adds an independent
// hypoexponential on (b1, b2):
// S(y) = c1 e^{-y/a1} + c2 e^{-y/a2} + c3 e^{-2y/b1} + c4 e^{-2y/b2}
//      + c5 e^{-y(1/b1 + 1/b2)}.
void shared_pair_coefficients(double a1, double a2, double b1, double b2,
                              std::vector<double>& coeff, std::vector<double>& rates) {
    const double D = (b1 - b2) * (b1 - b2);
    auto bracket = [&](double a) {
        return 1.0 + b1 * b1 * b1 / (D * (2.0 * a - b1)) + b2 * b2 * b2 / (D * (2.0 * a - b2)) -
               2.0 * b1 * b1 * b2 * b2 / (D * (a * b1 + a * b2 - b1 * b2));
    };
    const double c1 = a1 / (a1 - a2) * bracket(a1);
    const double c2 = -a2 / (a1 - a2) * bracket(a2);
    const double c3 = std::pow(b1, 4) / (D * (2.0 * a1 - b1) * (2.0 * a2 - b1));
    const double c4 = std::pow(b2, 4) / (D * (2.0 * a1 - b2) * (2.0 * a2 - b2));
    const double c5 = -2.0 * std::pow(b1, 3) * std::pow(b2, 3) /
                      (D * (a1 * b1 + a1 * b2 - b1 * b2) * (a2 * b1 + a2 * b2 - b1 * b2));
    coeff = {c1, c2, c3, c4, c5};
    rates = {1.0 / a1, 1.0 / a2, 2.0 / b1, 2.0 / b2, 1.0 / b1 + 1.0 / b2};
}

// Case with only the first component shared: S(y) = e^{-y/l1} plus the
// integrated square of the three-weight survival on (l2, l3, l4).
void shared_single_coefficients(const std::array<double, 4>& l, std::vector<double>& coeff,
                                std::vector<double>& rates) {
    const double l1 = l[0], l2 = l[1], l3 = l[2], l4 = l[3];
    const double A = l2 * l2 / ((l2 - l3) * (l2 - l4));
    const double B = -l3 * l3 / ((l2 - l3) * (l3 - l4));
    const double C = l4 * l4 / ((l2 - l4) * (l3 - l4));
    const double k2 = l2 / (2.0 * l1 - l2);
    const double k3 = l3 / (2.0 * l1 - l3);
    const double k4 = l4 / (2.0 * l1 - l4);
    const double k23 = l2 * l3 / (l1 * l2 + l1 * l3 - l2 * l3);
    const double k24 = l2 * l4 / (l1 * l2 + l1 * l4 - l2 * l4);
    const double k34 = l3 * l4 / (l1 * l3 + l1 * l4 - l3 * l4);

    const double c2 = -A * A * k2;
    const double c3 = -B * B * k3;
    const double c4 = -C * C * k4;
    const double c5 = -2.0 * A * B * k23;
    const double c6 = -2.0 * A * C * k24;
    const double c7 = -2.0 * B * C * k34;
    const double c1 = 1.0 - (c2 + c3 + c4 + c5 + c6 + c7);
    coeff = {c1, c2, c3, c4, c5, c6, c7};
    rates = {1.0 / l1,          2.0 / l2,          2.0 / l3,         2.0 / l4,
             1.0 / l2 + 1.0 / l3, 1.0 / l2 + 1.0 / l4, 1.0 / l3 + 1.0 / l4};
}

double marginal_coefficient(const std::array<double, 4>& l, std::size_t j) {
    double c = 1.0;
    for (std::size_t k = 0; k < 4; ++k) {
        if (k == j) continue;
        c *= l[j] / (l[j] - l[k]);
    }
    return c;
}

}  // namespace

TheoremChiResult theorem1_chi(const std::array<double, 4>& lambda, PairCase pair_case) {
    (void)HypoexpParams(lambda);  // distinctness and normalization gate
    const std::string pole = theorem1_pole(lambda);
    if (!pole.empty())
        throw argument_error("weights sit within 1e-8 of a coefficient pole: " + pole);

    TheoremChiResult res;
    res.pair_case = pair_case;
    std::size_t j = 0;
    for (std::size_t k = 1; k < 4; ++k)
        if (lambda[k] > lambda[j]) j = k;
    res.dominant_index = j;

    // Position of the dominant weight among the shared components, if any.
    int shared_slot = -1;
    switch (pair_case) {
        case PairCase::spatial:
            shared_pair_coefficients(lambda[0], lambda[1], lambda[2], lambda[3],
                                     res.coefficients, res.rates);
            if (j == 0) shared_slot = 0;
            if (j == 1) shared_slot = 1;
            break;
        case PairCase::temporal:
            shared_pair_coefficients(lambda[0], lambda[2], lambda[1], lambda[3],
                                     res.coefficients, res.rates);
            if (j == 0) shared_slot = 0;
            if (j == 2) shared_slot = 1;
            break;
        case PairCase::spatiotemporal:
            shared_single_coefficients(lambda, res.coefficients, res.rates);
            if (j == 0) shared_slot = 0;
            break;
    }

    if (shared_slot >= 0) {
        res.chi = res.coefficients[static_cast<std::size_t>(shared_slot)] /
                  marginal_coefficient(lambda, j);
        if (!(res.chi > 0.0) || !(res.chi <= 1.0 + 1e-12))
            throw numeric_error("joint-survival coefficient degenerated for the dominant index");
        res.chi = std::min(res.chi, 1.0);
    } else {
        res.chi = 0.0;
    }
    return res;
}

namespace {

struct PairCounts {
    std::uint64_t both = 0, e1 = 0, e2 = 0;
};

template <typename Body>
PairCounts mc_blocks(std::uint64_t n_samples, std::uint64_t seed, int threads, Body body) {
    const std::uint64_t block_size = 1u << 20;
    const std::uint64_t n_blocks = (n_samples + block_size - 1) / block_size;
    std::vector<PairCounts> slots(n_blocks);
    parallel_for(n_blocks, threads, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        const std::uint64_t lo = b * block_size;
        const std::uint64_t hi = std::min(n_samples, lo + block_size);
        PairCounts c;
        for (std::uint64_t i = lo; i < hi; ++i) body(rng, c);
        slots[b] = c;
    });
    PairCounts total;
    for (const PairCounts& c : slots) {
        total.both += c.both;
        total.e1 += c.e1;
        total.e2 += c.e2;
    }
    return total;
}

}  // namespace

double chi_mc_oracle(const std::array<double, 4>& lambda, PairCase pair_case, double tau,
                     std::uint64_t n_samples, std::uint64_t seed, int threads) {
    const HypoexpParams h(lambda);
    const double q = hypoexp_quantile(h, tau);
    const std::array<bool, 4> shared = shared_components(pair_case);

    const PairCounts c = mc_blocks(n_samples, seed, threads, [&](Rng& rng, PairCounts& out) {
        double x1 = 0.0, x2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double e = rng.exponential();
            x1 += lambda[static_cast<std::size_t>(k)] * e;
            x2 += lambda[static_cast<std::size_t>(k)] *
                  (shared[static_cast<std::size_t>(k)] ? e : rng.exponential());
        }
        const bool a = x1 > q, b = x2 > q;
        out.e1 += a;
        out.e2 += b;
        out.both += a && b;
    });
    if (c.e1 + c.e2 == 0) return 0.0;
    return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.e1 + c.e2);
}

double joint_survival_mc(const std::array<double, 4>& lambda, PairCase pair_case, double y,
                         std::uint64_t n_samples, std::uint64_t seed, int threads) {
    const std::array<bool, 4> shared = shared_components(pair_case);
    const PairCounts c = mc_blocks(n_samples, seed, threads, [&](Rng& rng, PairCounts& out) {
        double x1 = 0.0, x2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double e = rng.exponential();
            x1 += lambda[static_cast<std::size_t>(k)] * e;
            x2 += lambda[static_cast<std::size_t>(k)] *
                  (shared[static_cast<std::size_t>(k)] ? e : rng.exponential());
        }
        out.both += (x1 > y) && (x2 > y);
    });
    return static_cast<double>(c.both) / static_cast<double>(n_samples);
}

std::vector<double> model_chi_curve(const MixtureParams& p,
                                    const std::vector<std::array<double, 2>>& lags, double tau,
                                    std::uint64_t n_samples, std::uint64_t seed, int threads) {
    const double q = hypoexp_quantile(p.hypoexp(), tau);
    std::vector<double> out(lags.size());

    for (std::size_t li = 0; li < lags.size(); ++li) {
        const double h_s = lags[li][0], h_t = lags[li][1];
        if (h_s == 0.0 && h_t == 0.0) {
            out[li] = 1.0;  // identical point
            continue;
        }

        const VariogramSpec st(p.rho_s, p.rho_t, VariogramMode::spatiotemporal);
        const VariogramSpec sp(p.rho_s, p.rho_t, VariogramMode::spatial_only);
        const VariogramSpec tm(p.rho_s, p.rho_t, VariogramMode::temporal_only);
        const std::vector<Point3> pts{{0.0, 0.0, 0.0}, {h_s, 0.0, h_t}};
        auto gamma_of = [](const VariogramSpec& v) {
            return [v](const Point3& a, const Point3& b) {
                const double dx = a.x - b.x, dy = a.y - b.y;
                return v(std::sqrt(dx * dx + dy * dy), std::abs(a.t - b.t));
            };
        };
        const GaussianFieldEngine eng_st(pts, gamma_of(st), 0);
        const GaussianFieldEngine* eng_s = nullptr;
        const GaussianFieldEngine* eng_t = nullptr;
        GaussianFieldEngine eng_s_store = (h_t == 0.0)
                                              ? GaussianFieldEngine(pts, gamma_of(sp), 0)
                                              : GaussianFieldEngine({{0, 0, 0}}, gamma_of(sp), 0);
        GaussianFieldEngine eng_t_store = (h_s == 0.0)
                                              ? GaussianFieldEngine(pts, gamma_of(tm), 0)
                                              : GaussianFieldEngine({{0, 0, 0}}, gamma_of(tm), 0);
        if (h_t == 0.0) eng_s = &eng_s_store;
        if (h_s == 0.0) eng_t = &eng_t_store;

        const PairCounts c = mc_blocks(
            n_samples, derive_seed(seed, li), threads, [&](Rng& rng, PairCounts& cnt) {
                double x1 = 0.0, x2 = 0.0;
                {
                    const std::vector<double> z = brown_resnick_draw(eng_st, rng);
                    x1 += p.lambda[0] * frechet_to_exponential(z[0]);
                    x2 += p.lambda[0] * frechet_to_exponential(z[1]);
                }
                if (eng_s) {
                    const std::vector<double> z = brown_resnick_draw(*eng_s, rng);
                    x1 += p.lambda[1] * frechet_to_exponential(z[0]);
                    x2 += p.lambda[1] * frechet_to_exponential(z[1]);
                } else {
                    x1 += p.lambda[1] * rng.exponential();
                    x2 += p.lambda[1] * rng.exponential();
                }
                if (eng_t) {
                    const std::vector<double> z = brown_resnick_draw(*eng_t, rng);
                    x1 += p.lambda[2] * frechet_to_exponential(z[0]);
                    x2 += p.lambda[2] * frechet_to_exponential(z[1]);
                } else {
                    x1 += p.lambda[2] * rng.exponential();
                    x2 += p.lambda[2] * rng.exponential();
                }
                {
                    // Inverted part: exponential scale is 1/Z for the inner draw.
                    const std::vector<double> z = brown_resnick_draw(eng_st, rng);
                    x1 += p.lambda[3] / z[0];
                    x2 += p.lambda[3] / z[1];
                }
                const bool a = x1 > q, b = x2 > q;
                cnt.e1 += a;
                cnt.e2 += b;
                cnt.both += a && b;
            });
        out[li] = (c.e1 + c.e2) == 0
                      ? 0.0
                      : 2.0 * static_cast<double>(c.both) / static_cast<double>(c.e1 + c.e2);
    }
    return out;
}

void write_chi_surface_csv(const std::vector<ChiSurface>& surfaces, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open " + path + " for writing");
    std::fprintf(f, "tau,h_s_bin_center,h_t_bin_center,chi_raw,chi_smooth,n_pairs\n");
    for (const ChiSurface& s : surfaces) {
        for (std::size_t si = 0; si < s.grid.n_spatial(); ++si)
            for (std::size_t ti = 0; ti < s.grid.n_temporal(); ++ti) {
                const std::size_t b = s.grid.flat(si, ti);
                std::fprintf(f, "%.17g,%.17g,%.17g,", s.tau, s.grid.spatial_center(si),
                             s.grid.temporal_center(ti));
                if (s.missing[b])
                    std::fprintf(f, ",");
                else
                    std::fprintf(f, "%.17g,", s.raw[b]);
                if (s.smoothed.empty())
                    std::fprintf(f, ",");
                else
                    std::fprintf(f, "%.17g,", s.smoothed[b]);
                std::fprintf(f, "%llu\n", static_cast<unsigned long long>(s.pair_count[b]));
            }
    }
    std::fclose(f);
}

}  // namespace stxm
