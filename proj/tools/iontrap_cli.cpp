// iontrap: normal modes, collision-site diagnosis and impurity mass estimation
// for a linear ion chain.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 ambiguous diagnostic.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "iontrap/io.hpp"
#include "iontrap/iontrap.hpp"

namespace fs = std::filesystem;
using namespace iontrap;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;
constexpr int exit_ambiguous = 4;

struct Options {
    int n = 3;
    double omega0_hz = 1e6;
    double mass_amu = 40.0;
    std::string out = ".";
    std::string format = "csv";
    double noise_sigma = 0.0;
    std::optional<std::uint64_t> seed;

    // collide
    std::optional<int> site;
    std::optional<double> v0;
    int observe_ion = 1;
    std::optional<double> sample_rate;
    std::optional<double> duration;
    bool model_free = false;

    // impurity
    std::optional<double> impurity_mass_amu;
    bool unknown_site = false;
    std::string method = "auto";
};

TrapConfig trap_config(const Options& o) {
    if (o.n < 1) throw ConfigError("--n must be at least 1");
    if (!(o.mass_amu > 0.0)) throw ConfigError("--mass-amu must be positive");
    if (!(o.omega0_hz > 0.0)) throw ConfigError("--omega0-hz must be positive");
    return TrapConfig::from_lab_units(o.n, o.mass_amu, o.omega0_hz);
}

std::uint64_t require_seed(const Options& o) {
    if (!(o.noise_sigma >= 0.0)) throw ConfigError("--noise-sigma must be non-negative");
    if (o.noise_sigma > 0.0 && !o.seed) throw ConfigError("--noise-sigma > 0 requires --seed for reproducible output");
    return o.seed.value_or(0);
}

fs::path output_dir(const Options& o) {
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path.string() + " for writing");
    writer(os);
    if (!os) throw ConfigError("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

bool use_json(const Options& o) {
    if (o.format != "csv" && o.format != "json") throw ConfigError("--format must be csv or json");
    return o.format == "json";
}

// ---------------------------------------------------------------------- modes

int run_modes(const Options& o) {
    const TrapConfig config = trap_config(o);
    const bool json = use_json(o);
    const EquilibriumChain chain = equilibrium_chain(config);
    const ModeBasis basis = with_frequencies(eigendecompose(build_coupling_matrix(chain)), config);
    const fs::path dir = output_dir(o);

    if (json) {
        write_json(dir / "modes.json", io::modes_to_json(config, chain, basis));
    } else {
        write_file(dir / "modes.csv", [&](std::ostream& os) { io::write_modes_csv(os, basis); });
        write_file(dir / "equilibrium.csv", [&](std::ostream& os) { io::write_equilibrium_csv(os, chain); });
    }
    std::cout << "N = " << config.n_ions << ", length scale " << io::format_number(chain.length_scale) << " m\n";
    for (int p = 0; p < basis.size(); ++p)
        std::cout << "  mode " << p + 1 << ": mu = " << io::format_number(basis.eigenvalues[p])
                  << ", f = " << io::format_number(io::hertz(basis.frequencies[p])) << " Hz\n";
    return exit_ok;
}

// -------------------------------------------------------------------- collide

// Record long enough for 20 centre-of-mass periods and to resolve the
// closest pair of lines four times over; sampled at 20x the top line.
std::pair<double, double> default_sampling(const ModeBasis& basis) {
    const auto& w = basis.frequencies;
    double duration = 20.0 * 2.0 * constants::pi / w.front();
    for (std::size_t p = 1; p < w.size(); ++p) duration = std::max(duration, 4.0 * 2.0 * constants::pi / (w[p] - w[p - 1]));
    return {20.0 * io::hertz(w.back()), duration};
}

int run_collide(const Options& o) {
    const TrapConfig config = trap_config(o);
    const bool json = use_json(o);
    const std::uint64_t seed = require_seed(o);
    if (!o.site) throw ConfigError("collide needs --site (1-based index of the struck ion)");
    const ModeBasis basis = compute_modes(config);
    const ImpulseEvent event{*o.site, o.v0.value_or(default_impulse_velocity(config))};
    detail::check_event(event, config.n_ions);

    const auto [rate_default, duration_default] = default_sampling(basis);
    const double rate = o.sample_rate.value_or(rate_default);
    const double duration = o.duration.value_or(duration_default);

    Trajectory traj = synthesize_trajectory(event, basis, config, rate, duration);
    if (o.noise_sigma > 0.0) {
        // Noise is quoted relative to the strongest line of the observed ion.
        const double dominant = max_abs(beta_amplitudes(event, o.observe_ion, basis, config));
        traj = with_measurement_noise(std::move(traj), o.noise_sigma * dominant, seed);
    }

    std::optional<std::vector<double>> model;
    if (!o.model_free) model = basis.frequencies;
    const MotionSpectrum spectrum = estimate_spectrum(traj, o.observe_ion, model);
    const CollisionReport report = infer_collision_site(spectrum, basis);

    const fs::path dir = output_dir(o);
    if (json) {
        write_json(dir / "trajectory.json", io::to_json(traj));
        write_json(dir / "spectrum.json", io::to_json(spectrum));
    } else {
        write_file(dir / "trajectory.csv", [&](std::ostream& os) { io::write_trajectory_csv(os, traj); });
        write_file(dir / "spectrum.csv", [&](std::ostream& os) { io::write_spectrum_csv(os, spectrum); });
    }
    write_json(dir / "collision_report.json", io::to_json(report));

    std::cout << "struck ion (true): " << event.ion << "\ninferred site: " << report.inferred_site
              << "\nconfidence: " << io::format_number(report.confidence) << '\n';
    if (report.ambiguous) {
        std::cout << "ambiguous: sites";
        for (int s : report.tied_sites) std::cout << ' ' << s;
        std::cout << " fit equally well\n";
        return exit_ambiguous;
    }
    return exit_ok;
}

// ------------------------------------------------------------------- impurity

int run_impurity(const Options& o) {
    const TrapConfig config = trap_config(o);
    const bool json = use_json(o);
    const std::uint64_t seed = require_seed(o);
    if (!o.site) throw ConfigError("impurity needs --site (1-based position of the dark ion)");
    if (!o.impurity_mass_amu) throw ConfigError("impurity needs --impurity-mass-amu");
    if (o.method != "auto" && o.method != "first-order" && o.method != "exact")
        throw ConfigError("--method must be auto, first-order or exact");

    const EquilibriumChain chain = equilibrium_chain(config);
    const CouplingMatrix a = build_coupling_matrix(chain);
    const ModeBasis basis = with_frequencies(eigendecompose(a), config);
    const double impurity_mass = *o.impurity_mass_amu * constants::atomic_mass_unit;
    const auto masses = MassDistribution::single_impurity(config.n_ions, config.ion_mass, *o.site, impurity_mass);
    if (config.n_ions < 2) throw ConfigError("impurity analysis needs at least two ions");

    // Simulated measurement: exact perturbed spectrum, optional relative noise on each line.
    PerturbedModes measured = perturbed_modes(a, masses, config.kappa);
    if (o.noise_sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, o.noise_sigma);
        for (double& w : measured.frequencies) w *= 1.0 + g(rng);
    }
    const std::vector<ObservedRatio> ratios = ratios_from_frequencies(measured.frequencies);

    const bool exact = o.method == "exact" || (o.method == "auto" && o.unknown_site);
    if (o.method == "first-order" && o.unknown_site)
        throw ConfigError("the first-order inversion needs the impurity site; drop --unknown-site or use --method exact");
    MassEstimate est;
    if (exact) {
        std::optional<std::vector<int>> sites;
        if (!o.unknown_site) sites = std::vector<int>{*o.site};
        est = estimate_impurity_mass_exact(ratios, sites, a, config.ion_mass);
    } else {
        est = estimate_impurity_mass_first_order(ratios, *o.site, basis, config.ion_mass);
    }

    const fs::path dir = output_dir(o);
    if (json) {
        nlohmann::json lines = nlohmann::json::array();
        for (std::size_t p = 0; p < measured.frequencies.size(); ++p)
            lines.push_back({{"mode", p + 1},
                             {"frequency_Hz", io::hertz(measured.frequencies[p])},
                             {"ratio", measured.frequencies[p] / measured.frequencies[0]}});
        write_json(dir / "frequencies.json", {{"lines", std::move(lines)}});
    } else {
        write_file(dir / "frequencies.csv", [&](std::ostream& os) {
            os << "mode,frequency_Hz,ratio_1\n";
            for (std::size_t p = 0; p < measured.frequencies.size(); ++p)
                os << p + 1 << ',' << io::format_number(io::hertz(measured.frequencies[p])) << ','
                   << io::format_number(measured.frequencies[p] / measured.frequencies[0]) << '\n';
        });
    }
    write_json(dir / "mass_estimate.json", io::to_json(est));

    std::cout << "method: " << to_string(est.method) << "\nsite: " << est.impurity_index
              << "\nestimated mass: " << io::format_number(est.estimated_mass / constants::atomic_mass_unit)
              << " u (true " << io::format_number(*o.impurity_mass_amu) << " u)\n";
    if (est.degenerate) std::cout << "degenerate: spectrum matches a uniform chain\n";
    if (est.ambiguous) {
        std::cout << "ambiguous: equally good fits at";
        for (const auto& c : est.tied_candidates)
            std::cout << " (site " << c.site << ", " << io::format_number(c.mass / constants::atomic_mass_unit) << " u)";
        std::cout << '\n';
        return exit_ambiguous;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Normal modes and diagnostics of a linear ion chain"};
    app.set_config("--config", "", "Flat key = value file; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();

    Options o;
    app.add_option("--n", o.n, "Number of ions")->capture_default_str();
    app.add_option("--omega0-hz", o.omega0_hz, "Axial trap frequency in Hz")->capture_default_str();
    app.add_option("--mass-amu", o.mass_amu, "Ion mass in atomic mass units")->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--format", o.format, "Output format: csv or json")->capture_default_str();
    app.add_option("--noise-sigma", o.noise_sigma,
                   "collide: noise rms relative to the strongest line; impurity: relative noise on each frequency")
        ->capture_default_str();
    app.add_option("--seed", o.seed, "Random seed, required when --noise-sigma > 0");
    app.add_option("--site", o.site, "Struck ion (collide) or impurity position (impurity), 1-based");
    app.add_option("--v0", o.v0, "Impulse velocity in m/s (collide)");
    app.add_option("--observe-ion", o.observe_ion, "Ion whose motion is analysed (collide)")->capture_default_str();
    app.add_option("--sample-rate", o.sample_rate, "Sampling rate in Hz (collide)");
    app.add_option("--duration", o.duration, "Record length in s (collide)");
    app.add_flag("--model-free", o.model_free, "Locate lines without the computed mode frequencies (collide)");
    app.add_option("--impurity-mass-amu", o.impurity_mass_amu, "Mass of the dark ion in u (impurity)");
    app.add_flag("--unknown-site", o.unknown_site, "Search over all positions (impurity)");
    app.add_option("--method", o.method, "auto, first-order or exact (impurity)")->capture_default_str();

    auto* modes = app.add_subcommand("modes", "Equilibrium positions, eigenvalues, eigenvectors and frequencies");
    auto* collide = app.add_subcommand("collide", "Simulate a collision and infer the struck ion");
    auto* impurity = app.add_subcommand("impurity", "Simulate a dark impurity and estimate its mass");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (modes->parsed()) return run_modes(o);
        if (collide->parsed()) return run_collide(o);
        if (impurity->parsed()) return run_impurity(o);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numerical;
    }
    return exit_config;
}
