#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rulforge/cmapss.hpp"

namespace rulforge {

// Degradation trend applied to informative sensors as a function of life
// fraction x = t/T: a ramp a*x or an accelerating onset a*exp(b*x).
enum class DegradationProfile { kLinear, kExponentialOnset };

// Everything the generator needs; the same spec always produces the same
// fleet. Informative channels are the first `informative_sensors` indices,
// the last two channels are frozen, and the rest carry pure noise.
struct FleetSpec {
    std::string name = "SYN1";
    std::size_t units = 50;
    std::size_t min_life = 120;
    std::size_t max_life = 200;
    std::size_t regimes = 1;  // 1 or 6
    DegradationProfile profile = DegradationProfile::kLinear;
    double noise_sd = 0.1;
    std::size_t informative_sensors = 3;
    std::uint64_t seed = 42;
    // optional override, one 3-vector per regime
    std::vector<std::array<double, 3>> regime_centers;
};

void validate(const FleetSpec& spec);

// The operating-setting center of each regime (defaults styled after the
// real six-condition flight envelopes).
std::vector<std::array<double, 3>> regime_setting_centers(
    const FleetSpec& spec);

// Noiseless sensor value at life fraction x for the given regime; the
// generator adds Gaussian noise on top of exactly this.
double clean_sensor_value(const FleetSpec& spec, std::size_t sensor,
                          std::size_t regime, double x);

// Spec serialization. Missing keys fall back to the field defaults, so a
// spec file only has to name what it overrides; profile is "linear" or
// "exp-onset".
std::string fleet_spec_to_json(const FleetSpec& spec);
FleetSpec fleet_spec_from_json(const std::string& text);
FleetSpec load_fleet_spec(const std::string& path);

struct SyntheticFleet {
    std::vector<EngineTrajectory> train;  // run to failure
    std::vector<EngineTrajectory> test;   // truncated before failure
    std::vector<std::uint32_t> test_offsets;
    std::vector<std::size_t> train_lifetimes;
    std::vector<std::size_t> test_lifetimes;  // full, pre-truncation
};

SyntheticFleet generate_fleet(const FleetSpec& spec);

// Ground-truth remaining life max(0, T - cycle) from the generator's own
// lifetime table. ContractError for an unknown unit.
double oracle_rul(const SyntheticFleet& fleet, bool is_test,
                  std::uint32_t unit, std::uint32_t cycle);

// Writes train_{name}.txt, test_{name}.txt and RUL_{name}.txt in the
// standard 26-column text layout; returns the three paths.
std::vector<std::string> save_fleet(const std::string& dir,
                                    const FleetSpec& spec,
                                    const SyntheticFleet& fleet);

}  // namespace rulforge
