#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/simulators.hpp"
#include "support/chi.hpp"
#include "support/oracles.hpp"

using namespace stxm;

namespace {

// Known bivariate Brown-Resnick limit: chi(h) = 2 - 2 Phi(sqrt(gamma(h))/2).
double br_pair_chi(double gamma) { return 2.0 - 2.0 * oracle::normal_cdf(std::sqrt(gamma) / 2.0); }

SpaceTimeLayout pair_layout(double h, std::size_t n) {
    return SpaceTimeLayout({{0.0, 0.0}, {h, 0.0}}, {0.0}, n);
}

std::vector<double> site_column(const ProcessSample& p, std::size_t s, std::size_t t) {
    std::vector<double> v(p.layout.n_replicates);
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = p.at(r, s, t);
    return v;
}

}  // namespace

TEST_CASE("gaussian field pins the anchor and matches the variogram variance") {
    VariogramSpec v(0.5, 0.3, VariogramMode::spatiotemporal);
    SpaceTimeLayout layout = SpaceTimeLayout::grid(3, 3, 2, 20'000);
    const std::size_t anchor = 0;
    ProcessSample eps = sample_gaussian_field(v, layout, anchor, 77);

    for (std::size_t r = 0; r < 200; ++r) CHECK(eps.at(r, 0, 0) == 0.0);

    // Variance oracle from the covariance identity at two probe cells.
    for (std::size_t cell : {std::size_t{5}, std::size_t{13}}) {
        const std::size_t s = cell / layout.n_times(), t = cell % layout.n_times();
        const double g = v(layout.spatial_distance(s, 0), std::abs(layout.times[t] - layout.times[0]));
        std::vector<double> col = site_column(eps, s, t);
        const double var = oracle::variance(col);
        const double se = g * std::sqrt(2.0 / static_cast<double>(col.size()));
        CHECK(std::abs(var - g) < 3.0 * se);
    }
}

TEST_CASE("gaussian field: coincident points share values, draws are seed-deterministic") {
    // Spatial-only variogram makes same-site cells at different times coincident.
    VariogramSpec v(0.5, 0.3, VariogramMode::spatial_only);
    SpaceTimeLayout layout = SpaceTimeLayout::grid(2, 2, 3, 50);
    ProcessSample eps = sample_gaussian_field(v, layout, 0, 1234);
    for (std::size_t r = 0; r < 50; ++r)
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(eps.at(r, s, 0) == doctest::Approx(eps.at(r, s, 1)).epsilon(1e-12));
            CHECK(eps.at(r, s, 0) == doctest::Approx(eps.at(r, s, 2)).epsilon(1e-12));
        }

    ProcessSample again = sample_gaussian_field(v, layout, 0, 1234);
    CHECK(again.values == eps.values);
    ProcessSample other = sample_gaussian_field(v, layout, 0, 1235);
    CHECK(other.values != eps.values);
}

TEST_CASE("covariance jitter escalation fails on an invalid variogram") {
    // |h|^4 is not conditionally negative definite, so no amount of
    // permitted jitter can rescue the Cholesky.
    std::vector<Point3> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({static_cast<double>(i), 0.0, 0.0});
    auto bad_gamma = [](const Point3& a, const Point3& b) {
        const double h = std::abs(a.x - b.x);
        return h * h * h * h;
    };
    CHECK_THROWS_AS(GaussianFieldEngine(pts, bad_gamma, 0), Error);
}

TEST_CASE("single-point Brown-Resnick margins are unit Frechet") {
    SpaceTimeLayout layout({{0.2, 0.4}}, {0.0}, 100'000);
    VariogramSpec v(1.0, 1.0, VariogramMode::spatiotemporal);
    ProcessSample z = sample_brown_resnick(v, layout, 99);
    const double d = oracle::ks_statistic(site_column(z, 0, 0),
                                          [](double x) { return std::exp(-1.0 / x); });
    CHECK(d < oracle::ks_critical(100'000, 0.01));
}

TEST_CASE("pairwise chi matches the closed-form extremal coefficient") {
    const double tau = 0.999;
    const double q = -1.0 / std::log(tau);
    const std::size_t n = 100'000;

    struct Config {
        double h, rho, alpha;
    };
    // gamma = (h/rho)^alpha spanning strong to weak dependence.
    for (const Config& c : {Config{0.01, 1.0, 1.0}, Config{0.04, 1.0, 1.0}, Config{0.5, 0.1, 2.0}}) {
        VariogramSpec v(c.rho, 1.0, VariogramMode::spatiotemporal, c.alpha);
        const double gamma = v(c.h, 0.0);
        ProcessSample z = sample_brown_resnick(v, pair_layout(c.h, n), 4242);
        const double chi_hat =
            oracle::chi_pair_at(site_column(z, 0, 0), site_column(z, 1, 0), q);
        CHECK(std::abs(chi_hat - br_pair_chi(gamma)) < 0.03);
    }
}

TEST_CASE("independence limit: chi at huge lag collapses to 1 - tau") {
    VariogramSpec v(1e-4, 1.0, VariogramMode::spatiotemporal);  // gamma(0.5) = 5000
    const std::size_t n = 100'000;
    ProcessSample z = sample_brown_resnick(v, pair_layout(0.5, n), 777);
    const double q = -1.0 / std::log(0.99);
    const double chi_hat = oracle::chi_pair_at(site_column(z, 0, 0), site_column(z, 1, 0), q);
    CHECK(std::abs(chi_hat - 0.01) < 0.02);
}

TEST_CASE("exact sampler agrees with the truncated spectral reference") {
    VariogramSpec v(1.0, 1.0, VariogramMode::spatiotemporal);
    const double h = 0.8;
    const std::size_t n = 40'000;
    ProcessSample exact = sample_brown_resnick(v, pair_layout(h, n), 31);
    ProcessSample trunc = sample_brown_resnick_truncated(v, pair_layout(h, n), 32, 500);
    const double q = -1.0 / std::log(0.99);
    const double chi_exact = oracle::chi_pair_at(site_column(exact, 0, 0), site_column(exact, 1, 0), q);
    const double chi_trunc = oracle::chi_pair_at(site_column(trunc, 0, 0), site_column(trunc, 1, 0), q);
    // ~400 conditioning events per sampler: allow 3 combined sigmas.
    const double se = std::sqrt(2.0 * 0.5 * 0.5 / 400.0);
    CHECK(std::abs(chi_exact - chi_trunc) < 3.0 * se);
    // And the truncated reference itself reproduces the closed form loosely.
    const double q999 = -1.0 / std::log(0.999);
    const double chi999 = oracle::chi_pair_at(site_column(trunc, 0, 0), site_column(trunc, 1, 0), q999);
    CHECK(std::abs(chi999 - br_pair_chi(v(h, 0.0))) < 0.12);
}

TEST_CASE("max-stability spot check") {
    // Pointwise max of 50 draws, rescaled by 1/50, stays unit Frechet.
    VariogramSpec v(0.7, 1.0, VariogramMode::spatiotemporal);
    SpaceTimeLayout layout({{0.0, 0.0}, {0.3, 0.0}, {0.1, 0.55}}, {0.0}, 50);
    const std::size_t super = 10'000;
    std::vector<std::vector<double>> maxed(3, std::vector<double>(super));
    for (std::size_t rep = 0; rep < super; ++rep) {
        ProcessSample z = sample_brown_resnick(v, layout, 9000 + rep);
        for (std::size_t s = 0; s < 3; ++s) {
            double mx = 0.0;
            for (std::size_t r = 0; r < 50; ++r) mx = std::max(mx, z.at(r, s, 0));
            maxed[s][rep] = mx / 50.0;
        }
    }
    for (std::size_t s = 0; s < 3; ++s) {
        const double d =
            oracle::ks_statistic(maxed[s], [](double x) { return std::exp(-1.0 / x); });
        CHECK(d < oracle::ks_critical(super, 0.01));
    }
}

TEST_CASE("degenerate modes give independent slices") {
    const std::size_t n = 100'000;
    {
        VariogramSpec v(0.5, 1.0, VariogramMode::spatial_only);
        SpaceTimeLayout layout({{0.0, 0.0}, {0.25, 0.0}}, {0.0, 0.2}, n);
        ProcessSample z = sample_brown_resnick(v, layout, 5150);
        // Same site, adjacent times, on the uniform scale.
        std::vector<double> u0(n), u1(n);
        for (std::size_t r = 0; r < n; ++r) {
            u0[r] = std::exp(-1.0 / z.at(r, 0, 0));
            u1[r] = std::exp(-1.0 / z.at(r, 0, 1));
        }
        CHECK(std::abs(oracle::pearson(u0, u1)) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
    {
        VariogramSpec v(1.0, 0.5, VariogramMode::temporal_only);
        SpaceTimeLayout layout({{0.0, 0.0}, {0.25, 0.0}}, {0.0, 0.2}, n);
        ProcessSample z = sample_brown_resnick(v, layout, 5151);
        std::vector<double> u0(n), u1(n);
        for (std::size_t r = 0; r < n; ++r) {
            u0[r] = std::exp(-1.0 / z.at(r, 0, 0));
            u1[r] = std::exp(-1.0 / z.at(r, 1, 0));
        }
        CHECK(std::abs(oracle::pearson(u0, u1)) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("inverted Brown-Resnick: Pareto margins and vanishing tail dependence") {
    VariogramSpec v(0.4, 0.4, VariogramMode::spatiotemporal);
    const std::size_t n = 100'000;
    SpaceTimeLayout layout = pair_layout(0.1, n);
    ProcessSample w = sample_inverted_br(v, layout, 60601);
    CHECK(w.margin == MarginTag::standard_pareto);

    std::vector<double> logs = site_column(w, 0, 0);
    for (double& x : logs) x = std::log(x);
    CHECK(oracle::ks_statistic(logs, [](double x) { return 1.0 - std::exp(-x); }) <
          oracle::ks_critical(n, 0.01));

    // chi_tau decreasing toward zero along tau = 0.9, 0.99, 0.999. For an
    // inverted max-stable pair chi_tau ~ (1-tau)^(theta-1); theta here is
    // 2*Phi(sqrt(0.25)/2) = 1.197, so the tau=0.999 value sits near 0.26.
    const std::vector<double> a = site_column(w, 0, 0), b = site_column(w, 1, 0);
    double prev = 2.0;
    for (double tau : {0.9, 0.99, 0.999}) {
        const double q = 1.0 / (1.0 - tau);  // standard Pareto quantile
        const double chi = oracle::chi_pair_at(a, b, q);
        CHECK(chi < prev + 0.01);
        prev = chi;
    }
    CHECK(prev < 0.35);

    // Positive association above the median-tail: exceedance correlation.
    const double q90 = 1.0 / (1.0 - 0.9);
    std::vector<double> ea, eb;
    for (std::size_t r = 0; r < n; ++r)
        if (a[r] > q90 && b[r] > q90) {
            ea.push_back(a[r]);
            eb.push_back(b[r]);
        }
    REQUIRE(ea.size() > 100);
    CHECK(oracle::pearson(ea, eb) > 0.0);
}

TEST_CASE("margin transform to standard exponential") {
    // Frechet value with CDF u maps to -log(1-u); Pareto 1 maps to 0.
    const double u = 0.73;
    const double z = -1.0 / std::log(u);
    CHECK(frechet_to_exponential(z) == doctest::Approx(-std::log(1.0 - u)).epsilon(1e-10));
    CHECK(pareto_to_exponential(1.0) == 0.0);

    VariogramSpec v(0.4, 0.4, VariogramMode::spatiotemporal);
    SpaceTimeLayout layout({{0.1, 0.1}}, {0.0}, 100'000);
    ProcessSample z_br = sample_brown_resnick(v, layout, 11);
    ProcessSample e = to_standard_exponential(z_br);
    CHECK(e.margin == MarginTag::standard_exponential);
    CHECK(oracle::ks_statistic(site_column(e, 0, 0),
                               [](double x) { return 1.0 - std::exp(-x); }) <
          oracle::ks_critical(100'000, 0.01));

    // Increasing map: ranks preserved.
    for (std::size_t r = 1; r < 200; ++r) {
        const bool lt_before = z_br.at(r - 1, 0, 0) < z_br.at(r, 0, 0);
        const bool lt_after = e.at(r - 1, 0, 0) < e.at(r, 0, 0);
        CHECK(lt_before == lt_after);
    }

    ProcessSample pareto = sample_inverted_br(v, layout, 12);
    ProcessSample e2 = to_standard_exponential(pareto);
    CHECK(oracle::ks_statistic(site_column(e2, 0, 0),
                               [](double x) { return 1.0 - std::exp(-x); }) <
          oracle::ks_critical(100'000, 0.01));

    ProcessSample wrong = e;  // already exponential
    CHECK_THROWS_AS((void)to_standard_exponential(wrong), Error);
}

TEST_CASE("brown-resnick draws are deterministic per seed") {
    VariogramSpec v(0.4, 0.4, VariogramMode::spatiotemporal);
    SpaceTimeLayout layout = SpaceTimeLayout::grid(2, 2, 2, 10);
    ProcessSample a = sample_brown_resnick(v, layout, 314159);
    ProcessSample b = sample_brown_resnick(v, layout, 314159);
    CHECK(a.values == b.values);
}
