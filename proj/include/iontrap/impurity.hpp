#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/linalg.hpp"
#include "iontrap/matrix.hpp"
#include "iontrap/modes.hpp"
#include "iontrap/optimize.hpp"
#include "iontrap/spectral.hpp"

namespace iontrap {

/// Most frequent value in `masses` (equal within 1e-12 relative). Ties go to
/// the smaller mass.
inline double modal_mass(std::span<const double> masses) {
    if (masses.empty()) throw ConfigError("modal_mass: no masses");
    double best = 0.0;
    std::size_t best_count = 0;
    for (double candidate : masses) {
        std::size_t count = 0;
        for (double m : masses)
            if (std::abs(m - candidate) <= 1e-12 * std::abs(candidate)) ++count;
        if (count > best_count || (count == best_count && candidate < best)) {
            best = candidate;
            best_count = count;
        }
    }
    return best;
}

/// Ion masses (kg, left to right) and the scale mass M-bar used to
/// symmetrize the inhomogeneous chain.
struct MassDistribution {
    std::vector<double> masses;
    double scale_mass = 0.0;

    static MassDistribution with_modal_scale(std::vector<double> masses) {
        const double scale = modal_mass(masses);
        MassDistribution d{std::move(masses), scale};
        d.validate();
        return d;
    }

    /// `n` ions of `base_mass` except ion `site` (1-based).
    static MassDistribution single_impurity(int n, double base_mass, int site, double impurity_mass) {
        if (site < 1 || site > n) throw ConfigError("impurity site " + std::to_string(site) + " out of range");
        std::vector<double> m(static_cast<std::size_t>(n), base_mass);
        m[static_cast<std::size_t>(site - 1)] = impurity_mass;
        MassDistribution d{std::move(m), base_mass};
        d.validate();
        return d;
    }

    int size() const { return static_cast<int>(masses.size()); }

    /// delta M_m = M_m - M-bar.
    std::vector<double> deviations() const {
        std::vector<double> d(masses.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = masses[i] - scale_mass;
        return d;
    }

    double max_relative_deviation() const {
        double r = 0.0;
        for (double m : masses) r = std::max(r, std::abs(m - scale_mass) / scale_mass);
        return r;
    }

    void validate() const {
        if (masses.empty()) throw ConfigError("MassDistribution: empty");
        for (double m : masses)
            if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("MassDistribution: masses must be positive");
        if (!(scale_mass > 0.0)) throw ConfigError("MassDistribution: scale mass must be positive");
    }
};

/// Modes of the mass-weighted chain, in scaled coordinates s_n = sqrt(M_n / M-bar) q_n.
struct PerturbedModes {
    std::vector<double> eigenvalues;  // ascending
    Matrix eigenvectors;              // columns, b'^(p)_1 > 0
    std::vector<double> frequencies;  // rad/s, sqrt(kappa mu'_p / M-bar)
};

namespace detail {

inline void check_sizes(const CouplingMatrix& a, const MassDistribution& masses) {
    masses.validate();
    if (a.size() != masses.masses.size())
        throw ConfigError("coupling matrix is " + std::to_string(a.size()) + "x" + std::to_string(a.size()) +
                          " but " + std::to_string(masses.masses.size()) + " masses were given");
}

}  // namespace detail

/// A'_mn = M-bar A_mn / sqrt(M_m M_n).
inline Matrix build_scaled_coupling(const CouplingMatrix& a, const MassDistribution& masses) {
    detail::check_sizes(a, masses);
    const std::size_t n = a.size();
    Matrix out(n, n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k)
            out(m, k) = masses.scale_mass * a(m, k) / std::sqrt(masses.masses[m] * masses.masses[k]);
    return out;
}

inline PerturbedModes perturbed_modes(const CouplingMatrix& a, const MassDistribution& masses, double kappa) {
    if (!(kappa > 0.0)) throw ConfigError("perturbed_modes: kappa must be positive");
    SymmetricEigen eig = symmetric_eigen(build_scaled_coupling(a, masses));
    const std::size_t n = eig.values.size();
    PerturbedModes out{eig.values, eig.vectors, std::vector<double>(n)};
    for (std::size_t p = 0; p < n; ++p) {
        if (out.eigenvectors(0, p) < 0.0)
            for (std::size_t m = 0; m < n; ++m) out.eigenvectors(m, p) = -out.eigenvectors(m, p);
        out.frequencies[p] = std::sqrt(kappa * out.eigenvalues[p] / masses.scale_mass);
    }
    return out;
}

/// First-order change of the coupling matrix,
///   dA_mn = -(dM_m + dM_n) A_mn / (2 M-bar).
/// Requires every |dM| / M-bar < 0.5; beyond ~0.1 the expansion is poor.
inline Matrix perturbation_delta_A(const CouplingMatrix& a, const MassDistribution& masses) {
    detail::check_sizes(a, masses);
    if (!(masses.max_relative_deviation() < 0.5))
        throw ConfigError("perturbation_delta_A: mass deviation too large for a perturbative treatment");
    const std::vector<double> d = masses.deviations();
    const std::size_t n = a.size();
    Matrix out(n, n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k) out(m, k) = -(d[m] + d[k]) * a(m, k) / (2.0 * masses.scale_mass);
    return out;
}

/// First-order eigenvalue shifts dmu_p = -(mu_p / M-bar) sum_m (b^(p)_m)^2 dM_m.
inline std::vector<double> perturbation_delta_mu(const ModeBasis& basis, const MassDistribution& masses) {
    masses.validate();
    const auto n = basis.eigenvalues.size();
    if (masses.masses.size() != n) throw ConfigError("perturbation_delta_mu: size mismatch");
    const std::vector<double> d = masses.deviations();
    std::vector<double> out(n);
    for (std::size_t p = 0; p < n; ++p) {
        double s = 0.0;
        for (std::size_t m = 0; m < n; ++m) s += basis.eigenvectors(m, p) * basis.eigenvectors(m, p) * d[m];
        out[p] = -basis.eigenvalues[p] / masses.scale_mass * s;
    }
    return out;
}

/// First-order ratio omega'_p / omega'_1 for mode p (1-based, p >= 2):
///   sqrt(mu_p) (2 M-bar - sum_m dM_m (b^(p)_m)^2) / (2 M-bar - sum_m dM_m / N).
inline double frequency_ratio(int mode, const MassDistribution& masses, const ModeBasis& basis) {
    const int n = basis.size();
    if (mode < 2 || mode > n) throw ConfigError("frequency_ratio: mode " + std::to_string(mode) + " not in 2..N");
    if (masses.size() != n) throw ConfigError("frequency_ratio: size mismatch");
    const std::vector<double> d = masses.deviations();
    const auto p = static_cast<std::size_t>(mode - 1);
    double weighted = 0.0, total = 0.0;
    for (std::size_t m = 0; m < d.size(); ++m) {
        weighted += d[m] * basis.eigenvectors(m, p) * basis.eigenvectors(m, p);
        total += d[m];
    }
    const double mbar = masses.scale_mass;
    return std::sqrt(basis.eigenvalues[p]) * (2.0 * mbar - weighted) / (2.0 * mbar - total / n);
}

/// Exact ratios sqrt(mu'_p / mu'_1) for p = 2..N from a full eigensolve of A'.
inline std::vector<double> exact_frequency_ratios(const CouplingMatrix& a, const MassDistribution& masses) {
    const SymmetricEigen eig = symmetric_eigen(build_scaled_coupling(a, masses));
    std::vector<double> r;
    for (std::size_t p = 1; p < eig.values.size(); ++p) r.push_back(std::sqrt(eig.values[p] / eig.values[0]));
    return r;
}

/// A measured ratio omega'_p / omega'_1, p 1-based and >= 2.
struct ObservedRatio {
    int mode = 2;
    double ratio = 0.0;
};

/// Ratios of every line to the lowest one, labelled as modes 2..N in order.
inline std::vector<ObservedRatio> ratios_from_frequencies(std::span<const double> frequencies) {
    if (frequencies.size() < 2) throw ConfigError("need at least two frequencies to form a ratio");
    if (!(frequencies[0] > 0.0)) throw ConfigError("lowest frequency must be positive");
    std::vector<ObservedRatio> out;
    for (std::size_t p = 1; p < frequencies.size(); ++p)
        out.push_back({static_cast<int>(p) + 1, frequencies[p] / frequencies[0]});
    return out;
}

enum class EstimationMethod { first_order_inversion, exact_search };

inline const char* to_string(EstimationMethod m) {
    return m == EstimationMethod::first_order_inversion ? "first-order-inversion" : "exact-search";
}

struct ModeMassEstimate {
    int mode = 0;
    double mass = std::numeric_limits<double>::quiet_NaN();  // kg
    double residual = std::numeric_limits<double>::quiet_NaN();
    bool used = false;
    std::string note;
};

struct MassCandidate {
    int site = 0;
    double mass = 0.0;
    double residual = 0.0;
};

struct MassEstimate {
    int impurity_index = 0;  // 1-based
    double estimated_mass = 0.0;
    EstimationMethod method = EstimationMethod::first_order_inversion;
    std::vector<ModeMassEstimate> per_mode_estimates;
    double residual = 0.0;     // sum_p (r_p - exact ratio_p)^2 at the estimate
    double uncertainty = 0.0;  // scatter of the per-mode estimates, kg
    std::vector<MassCandidate> candidates;  // exact search: best per site, ascending residual
    std::vector<int> tied_sites;                  // distinct sites among tied_candidates, best first
    std::vector<MassCandidate> tied_candidates;   // (site, mass) pairs that fit as well as the best
    bool ambiguous = false;
    bool degenerate = false;  // estimate equals the reference mass: no impurity seen
};

/// Relative deviation from the reference mass below which an estimate is
/// reported as "no impurity".
inline constexpr double degenerate_tolerance = 1e-6;

namespace detail {

inline double ratio_misfit(const CouplingMatrix& a, std::span<const ObservedRatio> observed, int site,
                           double reference_mass, double impurity_mass) {
    const auto masses = MassDistribution::single_impurity(static_cast<int>(a.size()), reference_mass, site, impurity_mass);
    const std::vector<double> model = exact_frequency_ratios(a, masses);
    double s = 0.0;
    for (const auto& o : observed) {
        const double d = o.ratio - model[static_cast<std::size_t>(o.mode - 2)];
        s += d * d;
    }
    return s;
}

inline void check_observed(std::span<const ObservedRatio> observed, int n) {
    if (observed.empty()) throw ConfigError("no observed frequency ratios");
    for (const auto& o : observed) {
        if (o.mode < 2 || o.mode > n) throw ConfigError("observed ratio for mode " + std::to_string(o.mode) + " not in 2..N");
        if (!(o.ratio > 0.0) || !std::isfinite(o.ratio)) throw ConfigError("observed ratios must be positive");
    }
}

inline double scatter(const std::vector<ModeMassEstimate>& est) {
    double sum = 0.0, sum2 = 0.0;
    int k = 0;
    for (const auto& e : est)
        if (e.used) {
            sum += e.mass;
            sum2 += e.mass * e.mass;
            ++k;
        }
    if (k < 2) return 0.0;
    const double mean = sum / k;
    return std::sqrt(std::max(0.0, (sum2 - k * mean * mean) / (k - 1)));
}

}  // namespace detail

/// Impurity mass implied by one ratio r_p at the first order in dM/M:
///   M_i = M (1 + 2 (r_p - sqrt(mu_p)) / (r_p / N - sqrt(mu_p) (b^(p)_i)^2)).
inline double first_order_mass(double ratio, double eigenvalue, double component, int n_ions, double reference_mass) {
    const double root = std::sqrt(eigenvalue);
    const double denom = ratio / n_ions - root * component * component;
    return reference_mass * (1.0 + 2.0 * (ratio - root) / denom);
}

struct FirstOrderOptions {
    /// Modes whose ratio moves less than this fraction of the centre-of-mass
    /// shift (|r/N - sqrt(mu) b^2| / (r/N)) are excluded as insensitive.
    double min_sensitivity = 0.05;
};

/// Mass of a single impurity at `site` (1-based) from observed ratios,
/// inverting the first-order ratio mode by mode.
///
/// Per-mode estimates are combined with weights 1 / misfit, where misfit is
/// the exact-model residual of all observed ratios at that mode's estimate.
/// Modes with a node at the impurity or too little sensitivity are listed
/// with used == false and a note. Throws NumericalError if no mode is usable.
inline MassEstimate estimate_impurity_mass_first_order(std::span<const ObservedRatio> observed, int site,
                                                       const ModeBasis& basis, double reference_mass,
                                                       const FirstOrderOptions& opts = {}) {
    const int n = basis.size();
    detail::check_observed(observed, n);
    if (site < 1 || site > n) throw ConfigError("impurity site " + std::to_string(site) + " out of range");
    if (!(reference_mass > 0.0)) throw ConfigError("reference mass must be positive");
    const CouplingMatrix a{reconstruct_coupling(basis)};
    const auto row = static_cast<std::size_t>(site - 1);

    MassEstimate est;
    est.impurity_index = site;
    est.method = EstimationMethod::first_order_inversion;
    double wsum = 0.0, wmass = 0.0;
    for (const auto& o : observed) {
        const auto p = static_cast<std::size_t>(o.mode - 1);
        const double b = basis.eigenvectors(row, p);
        ModeMassEstimate me;
        me.mode = o.mode;
        const double sensitivity =
            std::abs(o.ratio / n - std::sqrt(basis.eigenvalues[p]) * b * b) / (o.ratio / n);
        if (std::abs(b) < node_tolerance) {
            me.note = "impurity sits at a node of this mode";
        } else if (sensitivity < opts.min_sensitivity) {
            me.note = "ratio insensitive to the impurity mass at first order";
        } else {
            me.mass = first_order_mass(o.ratio, basis.eigenvalues[p], b, n, reference_mass);
            if (!(me.mass > 0.0) || !std::isfinite(me.mass)) {
                me.note = "non-physical estimate";
            } else {
                me.used = true;
                me.residual = detail::ratio_misfit(a, observed, site, reference_mass, me.mass);
                const double w = 1.0 / (me.residual + 1e-300);
                wsum += w;
                wmass += w * me.mass;
            }
        }
        est.per_mode_estimates.push_back(std::move(me));
    }
    if (wsum == 0.0)
        throw NumericalError("no usable mode: the impurity sits at a node of, or is invisible to, every observed mode");

    est.estimated_mass = wmass / wsum;
    est.residual = detail::ratio_misfit(a, observed, site, reference_mass, est.estimated_mass);
    est.uncertainty = detail::scatter(est.per_mode_estimates);
    est.candidates.push_back({site, est.estimated_mass, est.residual});
    est.tied_candidates = est.candidates;
    est.tied_sites.push_back(site);
    est.degenerate = std::abs(est.estimated_mass - reference_mass) <= degenerate_tolerance * reference_mass;
    return est;
}

struct ExactSearchOptions {
    double lower = 0.2;  // search range, multiples of the reference mass
    double upper = 5.0;
    int grid_points = 64;
    double rel_tol = 1e-10;
    double tie_ratio = 0.05;
    double tie_floor = 1e-18;
};

/// Brute-force fit of (site, mass) against the exact forward model: for every
/// candidate site the misfit sum_p (r_p - omega'_p / omega'_1)^2 is minimized
/// over the impurity mass. Sites default to the whole chain, which needs at
/// least two ratios. Every (site, mass) pair that fits as well as the best is
/// listed in `tied_candidates`: mirror sites always tie, and for two ions a
/// mass ratio f and 1/f give the same spectrum.
inline MassEstimate estimate_impurity_mass_exact(std::span<const ObservedRatio> observed,
                                                 const std::optional<std::vector<int>>& candidate_sites,
                                                 const CouplingMatrix& a, double reference_mass,
                                                 const ExactSearchOptions& opts = {}) {
    const int n = static_cast<int>(a.size());
    detail::check_observed(observed, n);
    if (!(reference_mass > 0.0)) throw ConfigError("reference mass must be positive");
    std::vector<int> sites;
    if (candidate_sites) {
        sites = *candidate_sites;
        if (sites.empty()) throw ConfigError("empty candidate site list");
        for (int s : sites)
            if (s < 1 || s > n) throw ConfigError("candidate site " + std::to_string(s) + " out of range");
    } else {
        if (observed.size() < 2)
            throw ConfigError("locating the impurity needs at least two observed ratios");
        for (int s = 1; s <= n; ++s) sites.push_back(s);
    }

    MassEstimate est;
    est.method = EstimationMethod::exact_search;
    auto tied = [&](double r, double best) { return r - best <= opts.tie_ratio * r + opts.tie_floor; };
    const double lo = opts.lower * reference_mass, hi = opts.upper * reference_mass;
    for (int s : sites) {
        auto f = [&](double m) { return detail::ratio_misfit(a, observed, s, reference_mass, m); };
        const auto minima = log_grid_local_minima(f, lo, hi, opts.grid_points, opts.rel_tol);
        // A second mass that fits as well as the first is a genuine alternative.
        for (const auto& m : minima)
            if (&m == &minima.front() || tied(m.value, minima.front().value)) est.candidates.push_back({s, m.x, m.value});
    }
    std::stable_sort(est.candidates.begin(), est.candidates.end(),
                     [](const MassCandidate& x, const MassCandidate& y) { return x.residual < y.residual; });

    const MassCandidate top = est.candidates.front();
    est.impurity_index = top.site;
    est.estimated_mass = top.mass;
    est.residual = top.residual;
    for (const auto& c : est.candidates) {
        if (!tied(c.residual, top.residual)) continue;
        est.tied_candidates.push_back(c);
        if (std::find(est.tied_sites.begin(), est.tied_sites.end(), c.site) == est.tied_sites.end())
            est.tied_sites.push_back(c.site);
    }
    est.degenerate = std::abs(top.mass - reference_mass) <= degenerate_tolerance * reference_mass;
    // With no impurity every site fits equally well; that is not a tie between answers.
    est.ambiguous = est.tied_candidates.size() > 1 && !est.degenerate;

    // Single-ratio fits at the chosen site expose inconsistent lines. One
    // ratio can admit several masses; the branch nearest the joint fit is kept.
    for (const auto& o : observed) {
        const ObservedRatio one[] = {o};
        auto f = [&](double m) { return detail::ratio_misfit(a, one, top.site, reference_mass, m); };
        auto model = [&](double m) {
            const auto masses = MassDistribution::single_impurity(n, reference_mass, top.site, m);
            return exact_frequency_ratios(a, masses)[static_cast<std::size_t>(o.mode - 2)];
        };
        ModeMassEstimate me;
        me.mode = o.mode;
        const double h = 1e-4 * reference_mass;
        const double slope = std::abs(model(top.mass + h) - model(top.mass - h)) / (2.0 * h);
        if (slope * reference_mass < 1e-6 * o.ratio) {
            me.note = "ratio insensitive to the impurity mass";
        } else {
            // Near an extremum of the ratio two roots sit close together; a finer grid separates them.
            const auto minima = log_grid_local_minima(f, lo, hi, 8 * opts.grid_points, opts.rel_tol);
            const ScalarMinimum* pick = &minima.front();
            for (const auto& m : minima)
                if (tied(m.value, minima.front().value) &&
                    std::abs(std::log(m.x / top.mass)) < std::abs(std::log(pick->x / top.mass)))
                    pick = &m;
            me.mass = pick->x;
            me.residual = pick->value;
            me.used = true;
        }
        est.per_mode_estimates.push_back(std::move(me));
    }
    est.uncertainty = detail::scatter(est.per_mode_estimates);
    return est;
}

}  // namespace iontrap
