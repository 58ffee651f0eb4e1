#pragma once

// Pairwise tail statistics used by simulator and mixture tests.

#include <cstddef>
#include <vector>

namespace oracle {

// Symmetrized empirical chi at a known threshold q on the data scale:
// 2 * #(both exceed) / (#a exceeds + #b exceeds).
inline double chi_pair_at(const std::vector<double>& a, const std::vector<double>& b, double q) {
    std::size_t both = 0, ea = 0, eb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool xa = a[i] > q, xb = b[i] > q;
        ea += xa;
        eb += xb;
        both += xa && xb;
    }
    if (ea + eb == 0) return 0.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(ea + eb);
}

}  // namespace oracle
