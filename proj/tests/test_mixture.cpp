#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "core/mixture.hpp"
#include "support/chi.hpp"
#include "support/oracles.hpp"

using namespace stxm;

namespace {

std::vector<double> cell_column(const Dataset& d, std::size_t s, std::size_t t) {
    std::vector<double> v(d.layout.n_replicates);
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = d.at(r, s, t);
    return v;
}

}  // namespace

TEST_CASE("theta_to_eta basics") {
    MixtureParams near_sym({0.250003, 0.249999, 0.249997, 0.250001}, 1.0, 0.7);
    const EtaParams e = theta_to_eta(near_sym);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(e.eta[k]) < 1e-4);
    CHECK(e.eta[3] == 0.0);  // rho_s = 1

    // Streamflow-study point estimate survives the round trip. The published
    // weights are rounded to three decimals and sum to 0.999, so renormalize.
    const double w_sum = 0.134 + 0.063 + 0.268 + 0.534;
    MixtureParams table2({0.134 / w_sum, 0.063 / w_sum, 0.268 / w_sum, 0.534 / w_sum}, 0.261,
                         0.244);
    const MixtureParams back = eta_to_theta(theta_to_eta(table2));
    for (int k = 0; k < 4; ++k)
        CHECK(back.lambda[k] == doctest::Approx(table2.lambda[k]).epsilon(1e-12));
    CHECK(back.rho_s == doctest::Approx(0.261).epsilon(1e-12));
    CHECK(back.rho_t == doctest::Approx(0.244).epsilon(1e-12));
}

TEST_CASE("eta_to_theta rejects the degenerate equal-weight point") {
    EtaParams zeros;  // lambda = (0.25, 0.25, 0.25, 0.25)
    CHECK_THROWS_AS((void)eta_to_theta(zeros), Error);
}

TEST_CASE("eta_to_theta arithmetic and round trips") {
    EtaParams e;
    e.eta = {std::log(0.3), std::log(0.34), std::log(0.36), std::log(0.4), std::log(0.4)};
    const MixtureParams p = eta_to_theta(e);
    CHECK(p.lambda[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.lambda[1] == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(p.lambda[2] == doctest::Approx(0.17).epsilon(1e-12));
    CHECK(p.lambda[3] == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(p.rho_s == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(p.rho_t == doctest::Approx(0.4).epsilon(1e-12));

    Rng rng(0xe7a);
    int done = 0;
    while (done < 1000) {
        std::array<double, 4> w;
        double s = 0.0;
        for (auto& v : w) {
            v = 0.05 + rng.uniform();
            s += v;
        }
        for (auto& v : w) v /= s;
        bool ok = true;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (std::abs(w[i] - w[j]) < 1e-4) ok = false;
        if (!ok) continue;
        MixtureParams p0(w, 0.05 + rng.uniform(), 0.05 + rng.uniform());
        const MixtureParams p1 = eta_to_theta(theta_to_eta(p0));
        for (int k = 0; k < 4; ++k)
            CHECK(p1.lambda[k] == doctest::Approx(p0.lambda[k]).epsilon(1e-12));
        CHECK(p1.rho_s == doctest::Approx(p0.rho_s).epsilon(1e-12));
        CHECK(p1.rho_t == doctest::Approx(p0.rho_t).epsilon(1e-12));
        ++done;
    }
}

TEST_CASE("mixture margins are hypoexponential") {
    MixtureParams p({0.5, 0.15, 0.17, 0.18}, 0.4, 0.4);
    const HypoexpParams h = p.hypoexp();

    // Single cell: replicates are iid draws of the marginal law.
    SpaceTimeLayout one({{0.3, 0.3}}, {0.5}, 100'000);
    Dataset d = simulate_mixture(p, one, 20'250'101);
    CHECK(d.margin == MarginTag::hypoexponential);
    CHECK(oracle::ks_statistic(cell_column(d, 0, 0),
                               [&](double x) { return hypoexp_cdf(h, x); }) <
          oracle::ks_critical(100'000, 0.01));

    // Pooled cells of a grid: same law; critical value deflated to the
    // replicate count because cells within a replicate are dependent.
    SpaceTimeLayout grid = SpaceTimeLayout::grid(3, 3, 3, 4000);
    Dataset dg = simulate_mixture(p, grid, 77);
    CHECK(oracle::ks_statistic(dg.values, [&](double x) { return hypoexp_cdf(h, x); }) <
          oracle::ks_critical(4000, 0.01));
}

TEST_CASE("dominant spatiotemporal weight makes near-zero lags comonotone") {
    const double s = 0.99997 + 1e-5 + 2e-5 + 3e-5;
    MixtureParams p({0.99997 / s, 1e-5 / s, 2e-5 / s, 3e-5 / s}, 0.4, 0.4);
    // Lag small enough that the field wiggle (sd = sqrt(gamma) ~ 3e-4) sits
    // well inside the 1e-3 gap; what remains is the independent temporal
    // component, which breaks the gap only when the draw itself is tiny.
    SpaceTimeLayout pair({{0.0, 0.0}, {3e-8, 0.0}}, {0.5}, 2000);
    Dataset d = simulate_mixture(p, pair, 4);
    std::size_t close = 0;
    for (std::size_t r = 0; r < 2000; ++r) {
        const double a = d.at(r, 0, 0), b = d.at(r, 1, 0);
        if (std::abs(a - b) / std::max(a, b) < 1e-3) ++close;
    }
    CHECK(static_cast<double>(close) / 2000.0 >= 0.95);
}

TEST_CASE("four-regime qualitative split at the plotted setting") {
    // rho_S = rho_T = 0.2, dominant weight 0.4, probes at spatial lag 0.8
    // and time lag 0.4. The dependent regimes plateau above 0.1 while the
    // independent ones fall toward 1 - u.
    SpaceTimeLayout layout({{0.0, 0.0}, {0.8, 0.0}}, {0.0, 0.4}, 10'000);
    const double u = 0.98;

    auto chis = [&](std::size_t dominant) {
        std::array<double, 4> w{0.199, 0.2, 0.201, 0.202};
        w[dominant] = 0.4;
        double s = w[0] + w[1] + w[2] + w[3];
        for (auto& v : w) v /= s;
        MixtureParams p(w, 0.2, 0.2);
        Dataset d = simulate_mixture(p, layout, 900 + dominant);
        const double q = hypoexp_quantile(p.hypoexp(), u);
        const std::vector<double> a00 = cell_column(d, 0, 0);
        return std::array<double, 3>{
            oracle::chi_pair_at(a00, cell_column(d, 1, 0), q),   // spatial pair
            oracle::chi_pair_at(a00, cell_column(d, 0, 1), q),   // temporal pair
            oracle::chi_pair_at(a00, cell_column(d, 1, 1), q)};  // spatiotemporal pair
    };

    const auto c1 = chis(0), c2 = chis(1), c3 = chis(2), c4 = chis(3);
    // Dependent cells per the dominance rules: spatial j in {1,2},
    // temporal j in {1,3}, spatiotemporal j = 1.
    CHECK(c1[0] > 0.1);
    CHECK(c1[1] > 0.1);
    CHECK(c1[2] > 0.1);
    CHECK(c2[0] > 0.1);
    CHECK(c3[1] > 0.1);
    // Independent cells sit well below every dependent one.
    const double dep_min = std::min({c1[0], c1[1], c1[2], c2[0], c3[1]});
    for (double indep : {c2[1], c2[2], c3[0], c3[2], c4[0], c4[1], c4[2]})
        CHECK(indep < dep_min);
}

TEST_CASE("component seed splitting is isolated") {
    MixtureParams p({0.4, 0.25, 0.2, 0.15}, 0.4, 0.4);
    SpaceTimeLayout layout = SpaceTimeLayout::grid(2, 2, 2, 20);
    const auto seeds = mixture_component_seeds(123);
    const MixtureComponents base = simulate_mixture_components(p, layout, seeds);

    auto perturbed = seeds;
    perturbed[2] = derive_seed(999, 0);
    const MixtureComponents other = simulate_mixture_components(p, layout, perturbed);
    CHECK(base.parts[0].values == other.parts[0].values);
    CHECK(base.parts[1].values == other.parts[1].values);
    CHECK(base.parts[2].values != other.parts[2].values);
    CHECK(base.parts[3].values == other.parts[3].values);

    // The mixture is exactly the weighted component sum.
    Dataset d = simulate_mixture(p, layout, 123);
    for (std::size_t i = 0; i < d.values.size(); ++i) {
        const double sum = p.lambda[0] * base.parts[0].values[i] +
                           p.lambda[1] * base.parts[1].values[i] +
                           p.lambda[2] * base.parts[2].values[i] +
                           p.lambda[3] * base.parts[3].values[i];
        CHECK(d.values[i] == sum);
    }
}

TEST_CASE("dominant spatial weight: finite-level signature") {
    MixtureParams p({0.15, 0.5, 0.17, 0.18}, 0.4, 0.4);
    SpaceTimeLayout layout({{0.0, 0.0}, {0.1, 0.0}}, {0.0, 0.25}, 100'000);
    Dataset d = simulate_mixture(p, layout, 5150);
    const double q = hypoexp_quantile(p.hypoexp(), 0.99);
    const double chi_time =
        oracle::chi_pair_at(cell_column(d, 0, 0), cell_column(d, 0, 1), q);
    const double chi_space =
        oracle::chi_pair_at(cell_column(d, 0, 0), cell_column(d, 1, 0), q);
    CHECK(chi_time < 0.05 + 0.01);
    CHECK(chi_space > 0.15);
}

TEST_CASE("margin transforms: uniform, ranks, and GPD targets") {
    MixtureParams p({0.5, 0.15, 0.17, 0.18}, 0.4, 0.4);
    SpaceTimeLayout one({{0.3, 0.3}}, {0.5}, 100'000);
    Dataset d = simulate_mixture(p, one, 7);

    Dataset u = transform_to_uniform(d, p);
    CHECK(u.margin == MarginTag::uniform);
    CHECK(oracle::ks_statistic(cell_column(u, 0, 0), [](double x) { return x; }) <
          oracle::ks_critical(100'000, 0.01));

    // Strictly monotone per cell: the rank order of any replicate's values
    // is untouched.
    SpaceTimeLayout grid = SpaceTimeLayout::grid(2, 2, 2, 50);
    Dataset dg = simulate_mixture(p, grid, 8);
    Dataset ug = transform_to_uniform(dg, p);
    for (std::size_t r = 0; r < 50; ++r)
        for (std::size_t a = 0; a < 8; ++a)
            for (std::size_t b = 0; b < 8; ++b) {
                const double xa = dg.values[r * 8 + a], xb = dg.values[r * 8 + b];
                const double ua = ug.values[r * 8 + a], ub = ug.values[r * 8 + b];
                CHECK((xa < xb) == (ua < ub));
            }

    MarginalModel targets;
    targets.thresholds = {0.0};
    targets.scales = {1.0};
    targets.shape = 0.2;
    Dataset y = transform_to_gpd(d, &p, targets);
    CHECK(y.margin == MarginTag::gpd_target);
    GpdParams gp(0.0, 1.0, 0.2);
    std::vector<double> exceed;
    for (double v : y.values)
        if (v > 0.0) exceed.push_back(v);
    CHECK(oracle::ks_statistic(exceed, [&](double x) { return gpd_cdf(gp, x); }) <
          oracle::ks_critical(exceed.size(), 0.01));

    CHECK_THROWS_AS((void)transform_to_uniform(u, p), Error);  // wrong tag
}
