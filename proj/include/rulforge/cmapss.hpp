#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rulforge {

inline constexpr std::size_t kSettingCount = 3;
inline constexpr std::size_t kSensorCount = 21;

// Column names for the 21 sensor channels, in file order.
extern const std::array<const char*, kSensorCount> kSensorNames;

// One run-to-failure (or truncated) engine history. Rows are stored
// column-grouped: settings[t] and sensors[t] describe cycle cycles[t].
struct EngineTrajectory {
    std::uint32_t unit = 0;
    std::vector<std::uint32_t> cycles;
    std::vector<std::array<double, kSettingCount>> settings;
    std::vector<std::array<double, kSensorCount>> sensors;

    std::size_t length() const { return cycles.size(); }
};

// Fleet-level reference numbers for one data subset.
struct SubsetMeta {
    std::string id;
    std::size_t train_units = 0;
    std::size_t test_units = 0;
    std::size_t operating_conditions = 1;
    std::size_t fault_modes = 1;
    std::size_t max_train_cycles = 0;
    std::size_t min_train_cycles = 0;
    std::size_t max_test_cycles = 0;
    std::size_t min_test_cycles = 0;

    bool multi_condition() const { return operating_conditions > 1; }
};

// Reference row for FD001..FD004; UsageError on any other id.
SubsetMeta subset_meta(const std::string& id);

// Parses the standard 26-column text layout (unit, cycle, os1..os3,
// s1..s21), whitespace-separated, grouping rows by unit in order of first
// appearance. DataError on malformed rows (with the 1-based line number)
// and on per-unit cycle gaps.
std::vector<EngineTrajectory> parse_trajectories(std::istream& in);
std::vector<EngineTrajectory> load_trajectories(const std::string& path);

// One nonnegative integer per line, one per test unit. DataError when the
// count disagrees with `expected_units` or a value is negative.
std::vector<std::uint32_t> parse_rul_offsets(std::istream& in,
                                             std::size_t expected_units);
std::vector<std::uint32_t> load_rul_offsets(const std::string& path,
                                            std::size_t expected_units);

// Writes trajectories back out in the same 26-column layout at full
// precision, so parse -> write -> parse is value-identical.
void write_trajectories(std::ostream& out,
                        const std::vector<EngineTrajectory>& trajectories);
void save_trajectories(const std::string& path,
                       const std::vector<EngineTrajectory>& trajectories);

// Soft checks of a parsed fleet against the reference numbers: returns one
// message per discrepancy (engine count, cycle ranges) instead of failing,
// since published counts do not all match derivable ones.
std::vector<std::string> validate_fleet(
    const std::vector<EngineTrajectory>& trajectories, const SubsetMeta& meta,
    bool is_test);

}  // namespace rulforge
