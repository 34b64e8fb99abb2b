#include <gtest/gtest.h>

#include <sstream>

#include "iontrap/io.hpp"

using namespace iontrap;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(io::format_number(0.1), "0.1");
    EXPECT_EQ(io::format_number(-2.5e-9), "-2.5e-09");
    EXPECT_EQ(io::format_number(std::nan("")), "nan");
    const double x = 1.0 / 3.0;
    EXPECT_EQ(std::stod(io::format_number(x)), x);
}

TEST(Csv, TrajectoryHeaderAndRows) {
    const auto config = TrapConfig::from_lab_units(3, 40.0, 1e6);
    const auto basis = compute_modes(config);
    const auto t = synthesize_trajectory({1, default_impulse_velocity(config)}, basis, config, 10e6, 1e-6);
    std::ostringstream os;
    io::write_trajectory_csv(os, t);
    EXPECT_EQ(first_line(os.str()), "t_s,q1_m,q2_m,q3_m");
    EXPECT_EQ(line_count(os.str()), t.samples() + 1);
}

TEST(Csv, SpectrumColumns) {
    MotionSpectrum s;
    s.peaks.push_back({2.0 * constants::pi * 1e6, 3e-8, -3e-8, 0.5});
    std::ostringstream os;
    io::write_spectrum_csv(os, s);
    EXPECT_EQ(os.str(), "frequency_Hz,amplitude_m,phase_rad\n1e+06,3e-08,0.5\n");
}

TEST(Csv, ModesAndEquilibrium) {
    const auto config = TrapConfig::from_lab_units(2, 40.0, 1e6);
    const auto chain = equilibrium_chain(config);
    const auto basis = compute_modes(config);
    std::ostringstream m, e;
    io::write_modes_csv(m, basis);
    io::write_equilibrium_csv(e, chain);
    EXPECT_EQ(first_line(m.str()), "mode,eigenvalue_1,omega_rad_per_s,frequency_Hz,b1_1,b2_1");
    EXPECT_EQ(line_count(m.str()), 3u);
    EXPECT_EQ(first_line(e.str()), "ion,position_m,position_1");
    EXPECT_EQ(line_count(e.str()), 3u);
}

TEST(Json, ModesDocument) {
    const auto config = TrapConfig::from_lab_units(3, 40.0, 1e6);
    const auto j = io::modes_to_json(config, equilibrium_chain(config), compute_modes(config));
    EXPECT_EQ(j.at("n_ions"), 3);
    ASSERT_EQ(j.at("modes").size(), 3u);
    EXPECT_NEAR(j.at("modes")[2].at("eigenvalue").get<double>(), 5.8, 1e-12);
    EXPECT_NEAR(j.at("modes")[0].at("frequency_Hz").get<double>(), 1e6, 1e-3);
    EXPECT_EQ(j.at("equilibrium_positions_m").size(), 3u);
}

TEST(Json, CollisionReportNullsForNodes) {
    CollisionReport r;
    r.inferred_site = 2;
    r.residuals = {0.5, 0.0};
    r.recovered_components = {0.7, std::nan("")};
    r.tied_sites = {2};
    const auto j = io::to_json(r);
    EXPECT_EQ(j.at("inferred_site"), 2);
    EXPECT_TRUE(j.at("recovered_eigenvector_components")[1].is_null());
    EXPECT_FALSE(j.at("ambiguous").get<bool>());
}

TEST(Json, MassEstimateKeys) {
    MassEstimate est;
    est.impurity_index = 1;
    est.estimated_mass = 42.0 * constants::atomic_mass_unit;
    est.method = EstimationMethod::exact_search;
    est.per_mode_estimates.push_back({2, std::nan(""), std::nan(""), false, "node"});
    est.candidates.push_back({1, est.estimated_mass, 0.0});
    est.tied_candidates = est.candidates;
    est.tied_sites = {1};
    const auto j = io::to_json(est);
    EXPECT_EQ(j.at("method"), "exact-search");
    EXPECT_NEAR(j.at("estimated_mass_amu").get<double>(), 42.0, 1e-12);
    EXPECT_TRUE(j.at("per_mode_estimates")[0].at("mass_kg").is_null());
    for (const char* key : {"residual", "uncertainty_kg", "candidates", "tied_candidates", "tied_sites", "ambiguous",
                            "degenerate", "impurity_index"})
        EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Json, SpectrumAndTrajectory) {
    const auto config = TrapConfig::from_lab_units(2, 40.0, 1e6);
    const auto basis = compute_modes(config);
    const auto t = synthesize_trajectory({1, default_impulse_velocity(config)}, basis, config, 20e6, 12e-6);
    const auto s = estimate_spectrum(t, 1, basis.frequencies);
    const auto js = io::to_json(s);
    ASSERT_EQ(js.at("peaks").size(), 2u);
    EXPECT_NEAR(js.at("peaks")[1].at("frequency_Hz").get<double>(), std::sqrt(3.0) * 1e6, 1e-3);
    const auto jt = io::to_json(t);
    EXPECT_EQ(jt.at("times").size(), t.samples());
    EXPECT_EQ(jt.at("displacements")[0].size(), 2u);
}
