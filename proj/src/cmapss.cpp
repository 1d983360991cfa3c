#include "rulforge/cmapss.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "rulforge/errors.hpp"
#include "rulforge/serialize.hpp"

namespace rulforge {

const std::array<const char*, kSensorCount> kSensorNames = {
    "T2",   "T24",  "T30",     "T50",    "P2",       "P15", "P30",
    "Nf",   "Nc",   "Epr",     "Ps30",   "Phi",      "NRf", "NRc",
    "BPR",  "farB", "htBleed", "NF-dmd", "PCNR-dmd", "W31", "W32"};

SubsetMeta subset_meta(const std::string& id) {
    if (id == "FD001") return {id, 100, 100, 1, 1, 362, 128, 303, 31};
    if (id == "FD002") return {id, 260, 259, 6, 1, 378, 128, 367, 21};
    if (id == "FD003") return {id, 100, 100, 1, 2, 525, 145, 475, 38};
    if (id == "FD004") return {id, 249, 248, 6, 2, 543, 128, 486, 19};
    throw UsageError("unknown subset '" + id + "' (expected FD001..FD004)");
}

namespace {

// Splits a line on runs of spaces/tabs/CR, converting each token with
// strtod so trailing garbage inside a token is caught.
std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
    std::vector<double> values;
    const char* p = line.c_str();
    while (*p != '\0') {
        while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
        if (*p == '\0') break;
        char* end = nullptr;
        errno = 0;
        double v = std::strtod(p, &end);
        if (end == p || errno == ERANGE ||
            (*end != '\0' && *end != ' ' && *end != '\t' && *end != '\r')) {
            throw DataError("line " + std::to_string(line_no) +
                            ": non-numeric token");
        }
        values.push_back(v);
        p = end;
    }
    return values;
}

}  // namespace

std::vector<EngineTrajectory> parse_trajectories(std::istream& in) {
    constexpr std::size_t kColumns = 2 + kSettingCount + kSensorCount;
    std::vector<EngineTrajectory> fleet;
    // unit id -> index in `fleet`, preserving order of first appearance
    std::vector<std::pair<std::uint32_t, std::size_t>> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<double> row = parse_row(line, line_no);
        if (row.empty()) continue;  // tolerate blank/whitespace lines
        if (row.size() != kColumns) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(kColumns) + " columns, got " +
                            std::to_string(row.size()));
        }
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw DataError("line " + std::to_string(line_no) +
                                ": non-finite value");
            }
        }
        if (row[0] < 1.0 || row[0] != static_cast<std::uint32_t>(row[0])) {
            throw DataError("line " + std::to_string(line_no) +
                            ": unit id must be a positive integer");
        }
        if (row[1] < 1.0 || row[1] != static_cast<std::uint32_t>(row[1])) {
            throw DataError("line " + std::to_string(line_no) +
                            ": cycle index must be a positive integer");
        }
        auto unit = static_cast<std::uint32_t>(row[0]);
        auto cycle = static_cast<std::uint32_t>(row[1]);

        EngineTrajectory* traj = nullptr;
        for (auto& [id, idx] : seen) {
            if (id == unit) {
                traj = &fleet[idx];
                break;
            }
        }
        if (traj == nullptr) {
            seen.emplace_back(unit, fleet.size());
            fleet.emplace_back();
            traj = &fleet.back();
            traj->unit = unit;
        }

        std::uint32_t expected =
            traj->cycles.empty() ? 1 : traj->cycles.back() + 1;
        if (cycle != expected) {
            throw DataError("unit " + std::to_string(unit) + ": cycle " +
                            std::to_string(cycle) + " at line " +
                            std::to_string(line_no) + ", expected " +
                            std::to_string(expected));
        }
        traj->cycles.push_back(cycle);
        std::array<double, kSettingCount> os{};
        for (std::size_t i = 0; i < kSettingCount; ++i) os[i] = row[2 + i];
        traj->settings.push_back(os);
        std::array<double, kSensorCount> s{};
        for (std::size_t i = 0; i < kSensorCount; ++i) {
            s[i] = row[2 + kSettingCount + i];
        }
        traj->sensors.push_back(s);
    }
    return fleet;
}

std::vector<EngineTrajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_trajectories(in);
}

std::vector<std::uint32_t> parse_rul_offsets(std::istream& in,
                                             std::size_t expected_units) {
    std::vector<std::uint32_t> offsets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<double> row = parse_row(line, line_no);
        if (row.empty()) continue;
        if (row.size() != 1) {
            throw DataError("line " + std::to_string(line_no) +
                            ": expected one value per line");
        }
        double v = row[0];
        if (v < 0.0) {
            throw DataError("line " + std::to_string(line_no) +
                            ": negative terminal offset");
        }
        if (v != static_cast<std::uint32_t>(v)) {
            throw DataError("line " + std::to_string(line_no) +
                            ": terminal offset must be an integer");
        }
        offsets.push_back(static_cast<std::uint32_t>(v));
    }
    if (offsets.size() != expected_units) {
        throw DataError("expected " + std::to_string(expected_units) +
                        " terminal offsets, got " +
                        std::to_string(offsets.size()));
    }
    return offsets;
}

std::vector<std::uint32_t> load_rul_offsets(const std::string& path,
                                            std::size_t expected_units) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_rul_offsets(in, expected_units);
}

void write_trajectories(std::ostream& out,
                        const std::vector<EngineTrajectory>& trajectories) {
    for (const EngineTrajectory& traj : trajectories) {
        for (std::size_t t = 0; t < traj.length(); ++t) {
            out << traj.unit << ' ' << traj.cycles[t];
            for (double v : traj.settings[t]) out << ' ' << g17(v);
            for (double v : traj.sensors[t]) out << ' ' << g17(v);
            out << '\n';
        }
    }
}

void save_trajectories(const std::string& path,
                       const std::vector<EngineTrajectory>& trajectories) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_trajectories(out, trajectories);
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> validate_fleet(
    const std::vector<EngineTrajectory>& trajectories, const SubsetMeta& meta,
    bool is_test) {
    std::vector<std::string> warnings;
    std::size_t expected = is_test ? meta.test_units : meta.train_units;
    if (trajectories.size() != expected) {
        warnings.push_back(meta.id + ": expected " + std::to_string(expected) +
                           (is_test ? " test" : " training") +
                           " units, found " +
                           std::to_string(trajectories.size()));
    }
    if (trajectories.empty()) return warnings;

    std::size_t shortest = trajectories.front().length();
    std::size_t longest = shortest;
    for (const EngineTrajectory& traj : trajectories) {
        shortest = std::min(shortest, traj.length());
        longest = std::max(longest, traj.length());
    }
    std::size_t want_max = is_test ? meta.max_test_cycles : meta.max_train_cycles;
    std::size_t want_min = is_test ? meta.min_test_cycles : meta.min_train_cycles;
    if (longest > want_max) {
        warnings.push_back(meta.id + ": longest unit has " +
                           std::to_string(longest) + " cycles, reference max " +
                           std::to_string(want_max));
    }
    if (shortest < want_min) {
        warnings.push_back(meta.id + ": shortest unit has " +
                           std::to_string(shortest) +
                           " cycles, reference min " +
                           std::to_string(want_min));
    }
    return warnings;
}

}  // namespace rulforge
