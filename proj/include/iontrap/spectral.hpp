#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iontrap/constants.hpp"
#include "iontrap/dynamics.hpp"
#include "iontrap/error.hpp"
#include "iontrap/linalg.hpp"
#include "iontrap/matrix.hpp"
#include "iontrap/modes.hpp"

namespace iontrap {

/// One spectral line of q(t) = amplitude * sin(frequency * t + phase).
/// `signed_amplitude` carries the sign of the sine coefficient: after an
/// impulse every mode starts as a pure sine, so the sign is the sign of beta.
struct SpectralPeak {
    double frequency = 0.0;  // rad/s
    double amplitude = 0.0;  // m, >= 0
    double signed_amplitude = 0.0;
    double phase = 0.0;  // rad
};

struct MotionSpectrum {
    int observe_ion = 1;
    std::vector<SpectralPeak> peaks;  // ascending frequency
    double noise_floor = 0.0;         // rms fit residual, m
    bool signs_known = true;
};

struct SpectrumOptions {
    double min_periods = 10.0;        // of the lowest frequency present
    int zero_padding = 4;             // DFT grid oversampling (model-free path)
    double peak_threshold = 1e-3;     // relative to the strongest line (model-free path)
    double noise_threshold = 8.0;     // multiple of the median DFT magnitude (model-free path)
    int max_refine_iterations = 100;  // Gauss-Newton on frequencies (model-free path)
};

namespace detail {

struct SineFit {
    std::vector<double> sine;
    std::vector<double> cosine;
    double rms_residual = 0.0;
};

// Linear least squares for y(t) = sum_p s_p sin(w_p t) + c_p cos(w_p t).
inline SineFit fit_sinusoids(std::span<const double> t, std::span<const double> y, std::span<const double> w) {
    const std::size_t k = t.size();
    const std::size_t p = w.size();
    if (k < 2 * p) throw NumericalError("spectral fit: fewer samples than unknowns");
    Matrix design(k, 2 * p);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            design(i, 2 * j) = std::sin(w[j] * t[i]);
            design(i, 2 * j + 1) = std::cos(w[j] * t[i]);
        }
    const std::vector<double> x = solve_least_squares(design, std::vector<double>(y.begin(), y.end()));

    SineFit fit{std::vector<double>(p), std::vector<double>(p), 0.0};
    for (std::size_t j = 0; j < p; ++j) {
        fit.sine[j] = x[2 * j];
        fit.cosine[j] = x[2 * j + 1];
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double model = 0.0;
        for (std::size_t j = 0; j < p; ++j) model += fit.sine[j] * design(i, 2 * j) + fit.cosine[j] * design(i, 2 * j + 1);
        ss += (y[i] - model) * (y[i] - model);
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(k));
    return fit;
}

inline void check_resolution(std::span<const double> w, double duration, const char* what) {
    const double resolution = 2.0 * constants::pi / duration;
    for (std::size_t j = 1; j < w.size(); ++j)
        if (w[j] - w[j - 1] < resolution)
            throw NumericalError(std::string("unresolvable ") + what + " " + std::to_string(j) + " and " +
                                     std::to_string(j + 1) + ": frequency gap " + std::to_string(w[j] - w[j - 1]) +
                                     " rad/s is below the resolution " + std::to_string(resolution) + " rad/s",
                                 w[j] - w[j - 1]);
}

inline void check_duration(double lowest, double duration, double min_periods) {
    if (duration * lowest < min_periods * 2.0 * constants::pi)
        throw ConfigError("insufficient duration: " + std::to_string(duration) + " s covers fewer than " +
                          std::to_string(min_periods) + " periods of the lowest line");
}

// Blackman-Harris windowed DFT magnitude on an oversampled grid; returns the
// quadratically interpolated frequencies of local maxima above threshold.
inline std::vector<double> locate_peaks(std::span<const double> y, double dt, const SpectrumOptions& opts) {
    const std::size_t k = y.size();
    std::vector<double> windowed(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double x = 2.0 * constants::pi * static_cast<double>(i) / static_cast<double>(k - 1);
        const double w = 0.35875 - 0.48829 * std::cos(x) + 0.14128 * std::cos(2 * x) - 0.01168 * std::cos(3 * x);
        windowed[i] = w * y[i];
    }
    const double bin = 2.0 * constants::pi / (static_cast<double>(k) * dt * opts.zero_padding);
    const auto bins = static_cast<std::size_t>(opts.zero_padding) * k / 2;
    std::vector<double> mag(bins + 1, 0.0);
    for (std::size_t j = 1; j <= bins; ++j) {
        const std::complex<double> step = std::polar(1.0, -bin * static_cast<double>(j) * dt);
        std::complex<double> phasor = 1.0;
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            acc += windowed[i] * phasor;
            phasor *= step;
            if ((i & 63) == 63) phasor /= std::abs(phasor);
        }
        mag[j] = std::abs(acc);
    }
    const double top = *std::max_element(mag.begin(), mag.end());
    std::vector<double> found;
    if (top == 0.0) return found;
    // Lines are sparse, so the median bin measures the noise.
    std::vector<double> sorted(mag.begin() + 1, mag.end());
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double floor = std::max(opts.peak_threshold * top, opts.noise_threshold * sorted[sorted.size() / 2]);
    for (std::size_t j = 2; j + 1 <= bins; ++j) {
        if (mag[j] < floor) continue;
        if (!(mag[j] > mag[j - 1] && mag[j] >= mag[j + 1])) continue;
        const double a = mag[j - 1], b = mag[j], c = mag[j + 1];
        const double denom = a - 2.0 * b + c;
        const double offset = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
        found.push_back(bin * (static_cast<double>(j) + offset));
    }
    return found;
}

// Joint Gauss-Newton refinement of frequencies and sine/cosine coefficients.
// Time is scaled by the record length and amplitudes by the peak sample so the
// Jacobian columns are of comparable size.
inline std::vector<double> refine_frequencies(std::span<const double> t, std::span<const double> y,
                                              std::vector<double> w, int max_iterations) {
    const std::size_t k = t.size();
    const std::size_t p = w.size();
    const double tscale = t.back() - t.front();
    const double yscale = std::max(max_abs(y), std::numeric_limits<double>::min());
    std::vector<double> tau(k), z(k);
    for (std::size_t i = 0; i < k; ++i) {
        tau[i] = t[i] / tscale;
        z[i] = y[i] / yscale;
    }
    std::vector<double> freq(p);
    for (std::size_t j = 0; j < p; ++j) freq[j] = w[j] * tscale;

    SineFit lin = fit_sinusoids(tau, z, freq);
    std::vector<double> theta(3 * p);
    for (std::size_t j = 0; j < p; ++j) theta[3 * j] = lin.sine[j], theta[3 * j + 1] = lin.cosine[j], theta[3 * j + 2] = freq[j];

    auto residual = [&](const std::vector<double>& th, std::vector<double>& r) {
        double ss = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            double model = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double ph = th[3 * j + 2] * tau[i];
                model += th[3 * j] * std::sin(ph) + th[3 * j + 1] * std::cos(ph);
            }
            r[i] = z[i] - model;
            ss += r[i] * r[i];
        }
        return ss;
    };

    std::vector<double> r(k), trial(3 * p), r_trial(k);
    double cost = residual(theta, r);
    for (int it = 0; it < max_iterations; ++it) {
        Matrix jac(k, 3 * p);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                const double ph = theta[3 * j + 2] * tau[i];
                const double s = std::sin(ph), c = std::cos(ph);
                jac(i, 3 * j) = s;
                jac(i, 3 * j + 1) = c;
                jac(i, 3 * j + 2) = tau[i] * (theta[3 * j] * c - theta[3 * j + 1] * s);
            }
        const std::vector<double> delta = solve_least_squares(jac, r);
        double lambda = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h, lambda *= 0.5) {
            for (std::size_t q = 0; q < theta.size(); ++q) trial[q] = theta[q] + lambda * delta[q];
            const double c = residual(trial, r_trial);
            if (c < cost) {
                improved = true;
                cost = c;
                theta.swap(trial);
                r.swap(r_trial);
                break;
            }
        }
        double step = 0.0;
        for (std::size_t j = 0; j < p; ++j) step = std::max(step, std::abs(lambda * delta[3 * j + 2]));
        if (!improved || step < 1e-13) break;
    }
    for (std::size_t j = 0; j < p; ++j) w[j] = theta[3 * j + 2] / tscale;
    return w;
}

inline MotionSpectrum assemble_spectrum(int observe_ion, std::span<const double> w, const SineFit& fit) {
    MotionSpectrum spec{observe_ion, {}, fit.rms_residual, true};
    for (std::size_t j = 0; j < w.size(); ++j) {
        SpectralPeak peak;
        peak.frequency = w[j];
        peak.amplitude = std::hypot(fit.sine[j], fit.cosine[j]);
        peak.phase = std::atan2(fit.cosine[j], fit.sine[j]);
        peak.signed_amplitude = fit.sine[j] >= 0.0 ? peak.amplitude : -peak.amplitude;
        spec.peaks.push_back(peak);
    }
    return spec;
}

}  // namespace detail

/// Spectral lines of one ion's sampled motion.
///
/// With `model_frequencies` the lines are fitted by linear least squares at
/// exactly those frequencies (one sine/cosine pair each), which is free of
/// leakage and recovers the sign of every line. Without them, lines are
/// located in a windowed DFT, refined by interpolation and a joint
/// Gauss-Newton fit of frequencies, then fitted the same way.
///
/// Failures: ConfigError for a record shorter than `min_periods` of the
/// lowest line, NumericalError for lines closer than 2 pi / duration or for a
/// record with no motion.
inline MotionSpectrum estimate_spectrum(std::span<const double> times, std::span<const double> samples,
                                        int observe_ion, const std::optional<std::vector<double>>& model_frequencies,
                                        const SpectrumOptions& opts = {}) {
    if (times.size() != samples.size()) throw ConfigError("estimate_spectrum: times/samples length mismatch");
    if (times.size() < 8) throw ConfigError("estimate_spectrum: record too short");
    const double duration = times.back() - times.front();
    if (!(duration > 0.0)) throw ConfigError("estimate_spectrum: non-positive duration");
    if (max_abs(samples) == 0.0) throw NumericalError("no motion detected: the observed ion never moves");

    std::vector<double> w;
    if (model_frequencies) {
        w = *model_frequencies;
        if (w.empty()) throw ConfigError("estimate_spectrum: empty model frequency list");
        if (!std::is_sorted(w.begin(), w.end())) throw ConfigError("estimate_spectrum: model frequencies must ascend");
        const double nyquist = constants::pi * (static_cast<double>(times.size()) - 1.0) / duration;
        if (!(w.back() < nyquist)) throw ConfigError("estimate_spectrum: model frequency above the Nyquist limit");
        detail::check_duration(w.front(), duration, opts.min_periods);
        detail::check_resolution(w, duration, "modes");
    } else {
        const double dt = duration / (static_cast<double>(times.size()) - 1.0);
        w = detail::locate_peaks(samples, dt, opts);
        if (w.empty()) throw NumericalError("no motion detected: no spectral peaks above threshold");
        detail::check_duration(w.front(), duration, opts.min_periods);
        detail::check_resolution(w, duration, "peaks");
        w = detail::refine_frequencies(times, samples, std::move(w), opts.max_refine_iterations);
        std::sort(w.begin(), w.end());
        detail::check_resolution(w, duration, "peaks");
    }
    return detail::assemble_spectrum(observe_ion, w, detail::fit_sinusoids(times, samples, w));
}

inline MotionSpectrum estimate_spectrum(const Trajectory& traj, int observe_ion,
                                        const std::optional<std::vector<double>>& model_frequencies = std::nullopt,
                                        const SpectrumOptions& opts = {}) {
    const std::vector<double> series = traj.ion_series(observe_ion);
    return estimate_spectrum(traj.times, series, observe_ion, model_frequencies, opts);
}

/// Copy of `spectrum` with every sign replaced by +, as a magnitude-only
/// measurement would report it.
inline MotionSpectrum discard_signs(MotionSpectrum spectrum) {
    for (auto& p : spectrum.peaks) {
        p.signed_amplitude = p.amplitude;
        p.phase = 0.0;
    }
    spectrum.signs_known = false;
    return spectrum;
}

namespace detail {

// Signed amplitude per mode. Peaks are matched to basis.frequencies when
// present (missing lines count as zero), otherwise taken in order.
inline std::vector<double> mode_amplitudes(const MotionSpectrum& spectrum, const ModeBasis& basis) {
    const std::size_t n = basis.eigenvalues.size();
    std::vector<double> beta(n, 0.0);
    if (basis.frequencies.empty()) {
        if (spectrum.peaks.size() != n)
            throw ConfigError("spectrum has " + std::to_string(spectrum.peaks.size()) + " lines but the chain has " +
                              std::to_string(n) + " modes; supply mode frequencies to match them");
        for (std::size_t p = 0; p < n; ++p) beta[p] = spectrum.peaks[p].signed_amplitude;
        return beta;
    }
    const auto& w = basis.frequencies;
    for (std::size_t p = 0; p < n; ++p) {
        double window = INFINITY;
        if (p > 0) window = std::min(window, 0.5 * (w[p] - w[p - 1]));
        if (p + 1 < n) window = std::min(window, 0.5 * (w[p + 1] - w[p]));
        for (const auto& peak : spectrum.peaks)
            if (std::abs(peak.frequency - w[p]) < window) {
                beta[p] = peak.signed_amplitude;
                window = std::abs(peak.frequency - w[p]);
            }
    }
    return beta;
}

}  // namespace detail

/// Below this magnitude an eigenvector component of the observed ion is
/// treated as a node and the mode is unusable for the inversion.
inline constexpr double node_tolerance = 1e-8;

/// Estimated eigenvector components b^(p)_n of the struck ion n:
///   b^(p)_n = sqrt(mu_p) / (N b^(p)_m) * beta^(p)_m / beta^(1)_m,
/// m being the observed ion. Entries for modes with a node at m are NaN.
/// With `signs_known == false` the magnitudes are returned.
inline std::vector<double> recover_eigenvector_components(const MotionSpectrum& spectrum, const ModeBasis& basis) {
    const int n_ions = basis.size();
    const int m = spectrum.observe_ion;
    if (m < 1 || m > n_ions) throw ConfigError("observe_ion " + std::to_string(m) + " out of range");
    if (n_ions % 2 == 1 && n_ions > 1 && m == (n_ions + 1) / 2)
        throw ConfigError("the central ion of an odd chain cannot be used: antisymmetric modes never move it");

    const std::vector<double> beta = detail::mode_amplitudes(spectrum, basis);
    const double reference = beta[0];
    if (!(std::abs(reference) > 1e-12 * max_abs(beta)) || reference == 0.0)
        throw NumericalError("centre-of-mass amplitude vanishes; no reference for the amplitude ratios", reference);

    const auto row = static_cast<std::size_t>(m - 1);
    std::vector<double> b(beta.size());
    for (std::size_t p = 0; p < b.size(); ++p) {
        const double bm = basis.eigenvectors(row, p);
        if (std::abs(bm) < node_tolerance) {
            b[p] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double ratio = beta[p] / reference;
        const double scale = std::sqrt(basis.eigenvalues[p]) / (n_ions * bm);
        b[p] = spectrum.signs_known ? scale * ratio : std::abs(scale * ratio);
    }
    return b;
}

struct CollisionReport {
    int inferred_site = 0;                  // 1-based
    std::vector<double> residuals;          // per candidate site
    double confidence = 0.0;                // 1 - best / runner-up
    std::vector<double> recovered_components;
    std::vector<int> tied_sites;            // sites indistinguishable from the best, best first
    bool ambiguous = false;
};

struct InferenceOptions {
    double tie_ratio = 0.05;   // misfits within 5 % of each other are a tie
    double tie_floor = 1e-12;  // absolute residual difference treated as zero
};

/// Matches the recovered components against every column of the eigenvector
/// table, weighting mode p by mu_p, and returns the best candidate. Sites
/// whose misfit is within the tie tolerance of the best are reported in
/// `tied_sites` and the report is flagged ambiguous.
inline CollisionReport infer_collision_site(const MotionSpectrum& spectrum, const ModeBasis& basis,
                                            const InferenceOptions& opts = {}) {
    CollisionReport report;
    report.recovered_components = recover_eigenvector_components(spectrum, basis);
    const auto n = basis.eigenvalues.size();
    const auto& bh = report.recovered_components;

    report.residuals.assign(n, 0.0);
    for (std::size_t site = 0; site < n; ++site) {
        double r = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            if (std::isnan(bh[p])) continue;
            const double expect = spectrum.signs_known ? basis.eigenvectors(site, p) : std::abs(basis.eigenvectors(site, p));
            r += basis.eigenvalues[p] * (bh[p] - expect) * (bh[p] - expect);
        }
        report.residuals[site] = r;
    }

    const auto best = static_cast<std::size_t>(
        std::min_element(report.residuals.begin(), report.residuals.end()) - report.residuals.begin());
    const double r_best = report.residuals[best];
    report.inferred_site = static_cast<int>(best) + 1;
    report.tied_sites.push_back(report.inferred_site);

    double runner_up = INFINITY;
    for (std::size_t site = 0; site < n; ++site) {
        if (site == best) continue;
        const double r = report.residuals[site];
        runner_up = std::min(runner_up, r);
        if (r - r_best <= opts.tie_ratio * r + opts.tie_floor) report.tied_sites.push_back(static_cast<int>(site) + 1);
    }
    report.ambiguous = report.tied_sites.size() > 1;
    if (n == 1) {
        report.confidence = 1.0;
    } else if (runner_up > 0.0) {
        report.confidence = std::clamp(1.0 - r_best / runner_up, 0.0, 1.0);
    }
    if (report.ambiguous) report.confidence = 0.0;
    return report;
}

}  // namespace iontrap
