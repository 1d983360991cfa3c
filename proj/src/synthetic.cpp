#include "rulforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rulforge/errors.hpp"
#include "rulforge/rng.hpp"

namespace rulforge {

namespace {

// Styled after the published six flight conditions (altitude, Mach, TRA).
const std::vector<std::array<double, 3>> kSixConditionCenters = {
    {0.0, 0.0, 100.0},  {10.0, 0.25, 100.0}, {20.0, 0.7, 100.0},
    {25.0, 0.62, 60.0}, {35.0, 0.84, 60.0},  {42.0, 0.84, 40.0}};

constexpr std::size_t kFrozenChannels = 2;

struct SensorCoefs {
    double base = 0.0;
    double amplitude = 0.0;
    double direction = 1.0;
    double rate = 1.0;
};

// Coefficients and regime offsets depend only on the spec seed, never on
// how many rows get generated.
struct GeneratorTables {
    std::array<SensorCoefs, kSensorCount> coefs;
    std::vector<std::array<double, kSensorCount>> regime_offsets;
};

GeneratorTables make_tables(const FleetSpec& spec) {
    GeneratorTables tables;
    Rng rng = Rng(spec.seed).derive(0);
    for (std::size_t j = 0; j < kSensorCount; ++j) {
        SensorCoefs& c = tables.coefs[j];
        c.base = rng.uniform(20.0, 600.0);
        c.amplitude = rng.uniform(5.0, 25.0);
        c.direction = (rng.next_u64() & 1) ? 1.0 : -1.0;
        c.rate = rng.uniform(1.0, 2.5);
    }
    tables.regime_offsets.resize(spec.regimes);
    for (std::size_t r = 0; r < spec.regimes; ++r) {
        for (std::size_t j = 0; j < kSensorCount; ++j) {
            tables.regime_offsets[r][j] = rng.uniform(-15.0, 15.0);
        }
    }
    return tables;
}

bool is_frozen(std::size_t sensor) {
    return sensor >= kSensorCount - kFrozenChannels;
}

double clean_from_tables(const FleetSpec& spec, const GeneratorTables& tables,
                         std::size_t sensor, std::size_t regime, double x) {
    const SensorCoefs& c = tables.coefs[sensor];
    if (is_frozen(sensor)) return c.base;
    double value = c.base + tables.regime_offsets[regime][sensor];
    if (sensor < spec.informative_sensors) {
        double trend = spec.profile == DegradationProfile::kLinear
                           ? c.amplitude * x
                           : c.amplitude * std::exp(c.rate * x);
        value += c.direction * trend;
    }
    return value;
}

EngineTrajectory generate_unit(const FleetSpec& spec,
                               const GeneratorTables& tables,
                               std::uint32_t unit, std::size_t life,
                               Rng& rng) {
    const auto centers = regime_setting_centers(spec);
    EngineTrajectory traj;
    traj.unit = unit;
    for (std::size_t t = 1; t <= life; ++t) {
        traj.cycles.push_back(static_cast<std::uint32_t>(t));
        std::size_t regime = spec.regimes == 1 ? 0 : rng.index(spec.regimes);
        std::array<double, kSettingCount> os{};
        for (std::size_t d = 0; d < kSettingCount; ++d) {
            os[d] = centers[regime][d] + rng.uniform(-0.002, 0.002);
        }
        traj.settings.push_back(os);

        double x = static_cast<double>(t) / static_cast<double>(life);
        std::array<double, kSensorCount> s{};
        for (std::size_t j = 0; j < kSensorCount; ++j) {
            s[j] = clean_from_tables(spec, tables, j, regime, x);
            if (!is_frozen(j)) s[j] += spec.noise_sd * rng.normal();
        }
        traj.sensors.push_back(s);
    }
    return traj;
}

}  // namespace

void validate(const FleetSpec& spec) {
    if (spec.units == 0) throw ConfigError("fleet needs at least one unit");
    if (spec.min_life < 30) {
        throw ConfigError("lifetimes must be at least 30 cycles");
    }
    if (spec.max_life < spec.min_life) {
        throw ConfigError("max lifetime below min lifetime");
    }
    if (spec.regimes != 1 && spec.regimes != 6) {
        throw ConfigError("regime count must be 1 or 6");
    }
    if (spec.informative_sensors > kSensorCount - kFrozenChannels) {
        throw ConfigError("too many informative sensors");
    }
    if (spec.noise_sd < 0.0) throw ConfigError("negative noise level");
    if (!spec.regime_centers.empty() &&
        spec.regime_centers.size() != spec.regimes) {
        throw ConfigError("regime center override must match the regime count");
    }
    if (spec.name.empty()) throw ConfigError("fleet name must not be empty");
}

std::vector<std::array<double, 3>> regime_setting_centers(
    const FleetSpec& spec) {
    if (!spec.regime_centers.empty()) return spec.regime_centers;
    if (spec.regimes == 1) return {{0.0, 0.0, 100.0}};
    return kSixConditionCenters;
}

double clean_sensor_value(const FleetSpec& spec, std::size_t sensor,
                          std::size_t regime, double x) {
    validate(spec);
    if (sensor >= kSensorCount) {
        throw ContractError("sensor index out of range");
    }
    if (regime >= spec.regimes) {
        throw ContractError("regime index out of range");
    }
    return clean_from_tables(spec, make_tables(spec), sensor, regime, x);
}

std::string fleet_spec_to_json(const FleetSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["units"] = spec.units;
    j["min_life"] = spec.min_life;
    j["max_life"] = spec.max_life;
    j["regimes"] = spec.regimes;
    j["profile"] = spec.profile == DegradationProfile::kLinear ? "linear"
                                                               : "exp-onset";
    j["noise_sd"] = spec.noise_sd;
    j["informative_sensors"] = spec.informative_sensors;
    j["seed"] = spec.seed;
    if (!spec.regime_centers.empty()) {
        nlohmann::json centers = nlohmann::json::array();
        for (const auto& c : spec.regime_centers) {
            centers.push_back({c[0], c[1], c[2]});
        }
        j["regime_centers"] = std::move(centers);
    }
    return j.dump(2) + "\n";
}

FleetSpec fleet_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fleet spec parse failed: ") + e.what());
    }
    FleetSpec spec;
    try {
        spec.name = j.value("name", spec.name);
        spec.units = j.value("units", spec.units);
        spec.min_life = j.value("min_life", spec.min_life);
        spec.max_life = j.value("max_life", spec.max_life);
        spec.regimes = j.value("regimes", spec.regimes);
        if (j.contains("profile")) {
            const std::string p = j.at("profile").get<std::string>();
            if (p == "linear") {
                spec.profile = DegradationProfile::kLinear;
            } else if (p == "exp-onset") {
                spec.profile = DegradationProfile::kExponentialOnset;
            } else {
                throw DataError("unknown degradation profile \"" + p + "\"");
            }
        }
        spec.noise_sd = j.value("noise_sd", spec.noise_sd);
        spec.informative_sensors =
            j.value("informative_sensors", spec.informative_sensors);
        spec.seed = j.value("seed", spec.seed);
        if (j.contains("regime_centers")) {
            for (const auto& row : j.at("regime_centers")) {
                if (row.size() != 3) {
                    throw DataError("regime center rows need 3 values");
                }
                spec.regime_centers.push_back({row[0].get<double>(),
                                               row[1].get<double>(),
                                               row[2].get<double>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("fleet spec field error: ") + e.what());
    }
    validate(spec);
    return spec;
}

FleetSpec load_fleet_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fleet spec " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fleet_spec_from_json(buf.str());
}

SyntheticFleet generate_fleet(const FleetSpec& spec) {
    validate(spec);
    GeneratorTables tables = make_tables(spec);
    Rng root(spec.seed);

    SyntheticFleet fleet;
    for (std::size_t u = 0; u < spec.units; ++u) {
        Rng rng = root.derive(1 + u);
        std::size_t life =
            spec.min_life + rng.index(spec.max_life - spec.min_life + 1);
        fleet.train_lifetimes.push_back(life);
        fleet.train.push_back(generate_unit(
            spec, tables, static_cast<std::uint32_t>(u + 1), life, rng));
    }
    for (std::size_t u = 0; u < spec.units; ++u) {
        Rng rng = root.derive(100001 + u);
        std::size_t life =
            spec.min_life + rng.index(spec.max_life - spec.min_life + 1);
        fleet.test_lifetimes.push_back(life);
        std::size_t kept = 30 + rng.index(life - 30 + 1);
        EngineTrajectory full = generate_unit(
            spec, tables, static_cast<std::uint32_t>(u + 1), life, rng);
        full.cycles.resize(kept);
        full.settings.resize(kept);
        full.sensors.resize(kept);
        fleet.test.push_back(std::move(full));
        fleet.test_offsets.push_back(static_cast<std::uint32_t>(life - kept));
    }
    return fleet;
}

double oracle_rul(const SyntheticFleet& fleet, bool is_test,
                  std::uint32_t unit, std::uint32_t cycle) {
    const std::vector<std::size_t>& lifetimes =
        is_test ? fleet.test_lifetimes : fleet.train_lifetimes;
    if (unit == 0 || unit > lifetimes.size()) {
        throw ContractError("oracle_rul: unknown unit " + std::to_string(unit));
    }
    double life = static_cast<double>(lifetimes[unit - 1]);
    return std::max(0.0, life - static_cast<double>(cycle));
}

std::vector<std::string> save_fleet(const std::string& dir,
                                    const FleetSpec& spec,
                                    const SyntheticFleet& fleet) {
    std::vector<std::string> paths = {dir + "/train_" + spec.name + ".txt",
                                      dir + "/test_" + spec.name + ".txt",
                                      dir + "/RUL_" + spec.name + ".txt"};
    save_trajectories(paths[0], fleet.train);
    save_trajectories(paths[1], fleet.test);

    std::string rul_text;
    for (std::uint32_t off : fleet.test_offsets) {
        rul_text += std::to_string(off) + "\n";
    }
    std::ofstream out(paths[2]);
    if (!out) throw IoError("cannot open " + paths[2] + " for writing");
    out << rul_text;
    if (!out) throw IoError("write failed for " + paths[2]);
    return paths;
}

}  // namespace rulforge
