#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace stxm {

/// Sampling frame: spatial sites in [0,1]^2, ordered time points in [0,1],
/// and the number of independent replicates (years).
struct SpaceTimeLayout {
    std::vector<std::array<double, 2>> sites;
    std::vector<double> times;
    std::size_t n_replicates = 0;

    SpaceTimeLayout() = default;
    SpaceTimeLayout(std::vector<std::array<double, 2>> sites_, std::vector<double> times_,
                    std::size_t n_replicates_)
        : sites(std::move(sites_)), times(std::move(times_)), n_replicates(n_replicates_) {
        validate();
    }

    void validate() const {
        if (sites.empty() || times.empty() || n_replicates == 0)
            throw argument_error("layout needs sites, times and replicates");
        for (std::size_t i = 0; i < sites.size(); ++i)
            for (std::size_t j = i + 1; j < sites.size(); ++j)
                if (sites[i][0] == sites[j][0] && sites[i][1] == sites[j][1])
                    throw argument_error("layout sites must be distinct");
        for (std::size_t t = 1; t < times.size(); ++t)
            if (!(times[t] > times[t - 1]))
                throw argument_error("layout times must be strictly increasing");
    }

    std::size_t n_sites() const { return sites.size(); }
    std::size_t n_times() const { return times.size(); }
    std::size_t n_cells() const { return sites.size() * times.size(); }

    double spatial_distance(std::size_t a, std::size_t b) const {
        const double dx = sites[a][0] - sites[b][0];
        const double dy = sites[a][1] - sites[b][1];
        return std::sqrt(dx * dx + dy * dy);
    }

    double time_lag(std::size_t a, std::size_t b) const { return std::abs(times[a] - times[b]); }

    /// Uniform nx-by-ny spatial grid on [0,1]^2 with nt uniform times.
    static SpaceTimeLayout grid(std::size_t nx, std::size_t ny, std::size_t nt,
                                std::size_t n_replicates) {
        std::vector<std::array<double, 2>> sites;
        sites.reserve(nx * ny);
        for (std::size_t a = 0; a < nx; ++a)
            for (std::size_t b = 0; b < ny; ++b)
                sites.push_back({nx > 1 ? static_cast<double>(a) / static_cast<double>(nx - 1) : 0.0,
                                 ny > 1 ? static_cast<double>(b) / static_cast<double>(ny - 1) : 0.0});
        std::vector<double> times(nt);
        for (std::size_t t = 0; t < nt; ++t)
            times[t] = nt > 1 ? static_cast<double>(t) / static_cast<double>(nt - 1) : 0.0;
        return SpaceTimeLayout(std::move(sites), std::move(times), n_replicates);
    }
};

enum class MarginTag {
    unit_frechet,
    standard_exponential,
    standard_pareto,
    uniform,
    hypoexponential,
    gpd_target
};

inline const char* margin_tag_name(MarginTag tag) {
    switch (tag) {
        case MarginTag::unit_frechet: return "unit-frechet";
        case MarginTag::standard_exponential: return "standard-exponential";
        case MarginTag::standard_pareto: return "standard-pareto";
        case MarginTag::uniform: return "uniform";
        case MarginTag::hypoexponential: return "hypoexponential";
        case MarginTag::gpd_target: return "gpd-target";
    }
    return "?";
}

/// Replicate-by-site-by-time array with a margin tag. Cells may be marked
/// missing (real data); simulated data is always complete.
struct Dataset {
    SpaceTimeLayout layout;
    std::vector<double> values;   // index (r * n_sites + s) * n_times + t
    std::vector<uint8_t> present; // empty means "all present"
    MarginTag margin = MarginTag::standard_exponential;

    Dataset() = default;
    Dataset(SpaceTimeLayout layout_, MarginTag margin_)
        : layout(std::move(layout_)),
          values(layout.n_replicates * layout.n_cells(), 0.0),
          margin(margin_) {}

    std::size_t index(std::size_t r, std::size_t s, std::size_t t) const {
        return (r * layout.n_sites() + s) * layout.n_times() + t;
    }
    double& at(std::size_t r, std::size_t s, std::size_t t) { return values[index(r, s, t)]; }
    double at(std::size_t r, std::size_t s, std::size_t t) const { return values[index(r, s, t)]; }

    bool is_present(std::size_t r, std::size_t s, std::size_t t) const {
        return present.empty() || present[index(r, s, t)] != 0;
    }
    bool all_present() const { return present.empty(); }
};

/// A simulator output is a Dataset whose margin tag records the producing law.
using ProcessSample = Dataset;

}  // namespace stxm
