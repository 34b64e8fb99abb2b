#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "iontrap/error.hpp"

namespace iontrap {

struct ScalarMinimum {
    double x = 0.0;
    double value = 0.0;
};

/// Golden-section search for a minimum of `f` on [lo, hi], stopping when
/// the bracket is narrower than rel_tol * |x| (or abs_tol).
inline ScalarMinimum golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                             double rel_tol = 1e-10, double abs_tol = 1e-300,
                                             int max_iterations = 500) {
    if (!(hi > lo)) throw ConfigError("golden_section_minimize: empty bracket");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iterations; ++it) {
        const double mid = 0.5 * (a + b);
        if (b - a <= rel_tol * std::abs(mid) + abs_tol) break;
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double x = fc < fd ? c : d;
    return {x, fc < fd ? fc : fd};
}

/// Every local minimum of `f` on [lo, hi] (lo > 0) that shows up on a grid of
/// `points` log-spaced abscissae, each polished by golden section on its
/// neighbouring bracket. Sorted by value, best first; minima that polish to
/// the same abscissa are merged.
inline std::vector<ScalarMinimum> log_grid_local_minima(const std::function<double(double)>& f, double lo, double hi,
                                                        int points, double rel_tol = 1e-10) {
    if (!(lo > 0.0) || !(hi > lo) || points < 3) throw ConfigError("log_grid_minimize: bad search range");
    const double ratio = std::pow(hi / lo, 1.0 / (points - 1));
    auto x = [&](int i) { return lo * std::pow(ratio, i); };
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) v[i] = f(x(i));

    std::vector<ScalarMinimum> found;
    for (int i = 0; i < points; ++i) {
        const bool left = i == 0 || v[i] <= v[i - 1];
        const bool right = i == points - 1 || v[i] <= v[i + 1];
        if (!left || !right) continue;
        ScalarMinimum m = golden_section_minimize(f, x(std::max(i - 1, 0)), x(std::min(i + 1, points - 1)), rel_tol);
        if (v[i] < m.value) m = {x(i), v[i]};
        const bool duplicate = std::any_of(found.begin(), found.end(), [&](const ScalarMinimum& o) {
            return std::abs(o.x - m.x) <= 1e3 * rel_tol * std::abs(m.x);
        });
        if (!duplicate) found.push_back(m);
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const ScalarMinimum& a, const ScalarMinimum& b) { return a.value < b.value; });
    return found;
}

/// Global minimum over the log grid; see log_grid_local_minima().
inline ScalarMinimum log_grid_minimize(const std::function<double(double)>& f, double lo, double hi, int points,
                                       double rel_tol = 1e-10) {
    return log_grid_local_minima(f, lo, hi, points, rel_tol).front();
}

}  // namespace iontrap
