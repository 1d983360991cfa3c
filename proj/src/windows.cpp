#include "rulforge/windows.hpp"

#include <fstream>

#include "rulforge/errors.hpp"
#include "rulforge/serialize.hpp"

namespace rulforge {

void validate(const WindowBatch& batch) {
    if (batch.inputs.rank() != 3) {
        throw ContractError("window batch inputs must be B x W x F, got shape " +
                            shape_str(batch.inputs.shape()));
    }
    const std::size_t b = batch.count();
    if (batch.labels.size() != b || batch.units.size() != b || batch.end_cycles.size() != b) {
        throw ContractError("window batch label/provenance counts do not match window count " +
                            std::to_string(b));
    }
    for (double y : batch.labels) {
        if (!(y >= 0.0 && y <= 1.0)) {
            throw ContractError("window label " + g17(y) + " outside [0, 1]");
        }
    }
    if (!batch.inputs.all_finite()) throw ContractError("window batch contains non-finite values");
}

void save_windows(const std::string& path, const WindowBatch& batch) {
    validate(batch);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open window file for writing: " + path);
    out.write("RULW", 4);
    write_u32_le(out, 1u);
    write_u32_le(out, static_cast<std::uint32_t>(batch.count()));
    write_u32_le(out, static_cast<std::uint32_t>(batch.window()));
    write_u32_le(out, static_cast<std::uint32_t>(batch.features()));
    for (double v : batch.inputs.data()) write_f64_le(out, v);
    for (double v : batch.labels) write_f64_le(out, v);
    for (std::size_t i = 0; i < batch.count(); ++i) {
        write_u32_le(out, batch.units[i]);
        write_u32_le(out, batch.end_cycles[i]);
    }
    if (!out) throw IoError("failed writing window file: " + path);
}

WindowBatch load_windows(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open window file: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "RULW") {
        throw DataError("not a window file (bad magic): " + path);
    }
    const std::uint32_t version = read_u32_le(in, "version");
    if (version != 1) throw DataError("unsupported window file version " + std::to_string(version));
    const std::uint32_t b = read_u32_le(in, "window count");
    const std::uint32_t w = read_u32_le(in, "window length");
    const std::uint32_t f = read_u32_le(in, "feature count");
    WindowBatch batch;
    batch.inputs = Tensor({b, w, f});
    for (double& v : batch.inputs.data()) v = read_f64_le(in, "inputs");
    batch.labels.resize(b);
    for (double& v : batch.labels) v = read_f64_le(in, "labels");
    batch.units.resize(b);
    batch.end_cycles.resize(b);
    for (std::uint32_t i = 0; i < b; ++i) {
        batch.units[i] = read_u32_le(in, "unit id");
        batch.end_cycles[i] = read_u32_le(in, "end cycle");
    }
    validate(batch);
    return batch;
}

}  // namespace rulforge
