#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rulforge/tensor.hpp"

namespace rulforge {

// Labels live on the normalized scale (RUL / 125); predictions are mapped
// back to raw cycles at the edges.
constexpr double kRulCap = 125.0;

// A windowed dataset: B windows of W consecutive cycles with F features each,
// plus the normalized RUL label at each window's final cycle and enough
// provenance to trace a window back to its unit.
struct WindowBatch {
    Tensor inputs;  // B x W x F
    std::vector<double> labels;
    std::vector<std::uint32_t> units;
    std::vector<std::uint32_t> end_cycles;

    std::size_t count() const { return inputs.rank() == 3 ? inputs.dim(0) : 0; }
    std::size_t window() const { return inputs.rank() == 3 ? inputs.dim(1) : 0; }
    std::size_t features() const { return inputs.rank() == 3 ? inputs.dim(2) : 0; }
};

// Shape/label-range consistency; throws ContractError on violation.
void validate(const WindowBatch& batch);

// Binary format: "RULW" magic, then little-endian u32 version/B/W/F, B*W*F
// doubles, B label doubles, and B (unit u32, end_cycle u32) records.
void save_windows(const std::string& path, const WindowBatch& batch);
WindowBatch load_windows(const std::string& path);

}  // namespace rulforge
