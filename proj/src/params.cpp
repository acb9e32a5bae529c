#include "awdiff/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "awdiff/tensor_io.hpp"

namespace awdiff {

std::size_t ParamSet::total_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.count();
    return n;
}

bool ParamSet::same_shape(const ParamSet& other) const {
    if (blocks.size() != other.blocks.size()) return false;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].name != other.blocks[i].name) return false;
        if (blocks[i].dims != other.blocks[i].dims) return false;
    }
    return true;
}

void ParamSet::require_same_shape(const ParamSet& other, const char* context) const {
    if (!same_shape(other))
        throw InvariantError(std::string(context) + ": parameter block shapes differ");
}

void ParamSet::require_finite(const char* context) const {
    for (const auto& b : blocks)
        for (double v : b.values)
            if (!std::isfinite(v))
                throw InvariantError(std::string(context) + ": non-finite value in block " + b.name);
}

TensorBlock& ParamSet::find(const std::string& name) {
    for (auto& b : blocks)
        if (b.name == name) return b;
    throw ParameterError("no parameter block named " + name);
}

const TensorBlock& ParamSet::find(const std::string& name) const {
    for (const auto& b : blocks)
        if (b.name == name) return b;
    throw ParameterError("no parameter block named " + name);
}

void ParamSet::fill(double value) {
    for (auto& b : blocks)
        for (auto& v : b.values) v = value;
}

void ParamSet::scale_add(double a, const ParamSet& other, double b) {
    require_same_shape(other, "scale_add");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto& dst = blocks[i].values;
        const auto& src = other.blocks[i].values;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = a * dst[j] + b * src[j];
    }
}

void ParamSet::save(const std::string& stem) const {
    {
        std::ofstream manifest(stem + ".manifest");
        if (!manifest) throw IoError("cannot open for writing: " + stem + ".manifest");
        for (const auto& b : blocks) {
            manifest << b.name << " " << b.dims.size();
            for (auto d : b.dims) manifest << " " << d;
            manifest << "\n";
        }
    }
    std::ofstream out(stem + ".blocks.awt", std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + stem + ".blocks.awt");
    for (const auto& b : blocks) {
        RawTensor t;
        t.dims = b.dims;
        t.values = b.values;
        write_raw_tensor(out, t);
    }
}

ParamSet ParamSet::load(const std::string& stem) {
    std::ifstream manifest(stem + ".manifest");
    if (!manifest) throw IoError("cannot open: " + stem + ".manifest");
    ParamSet set;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        TensorBlock b;
        std::size_t rank = 0;
        if (!(ss >> b.name >> rank)) throw FormatError("bad manifest line: " + line);
        b.dims.resize(rank);
        for (auto& d : b.dims)
            if (!(ss >> d)) throw FormatError("bad manifest line: " + line);
        set.blocks.push_back(std::move(b));
    }
    std::ifstream in(stem + ".blocks.awt", std::ios::binary);
    if (!in) throw IoError("cannot open: " + stem + ".blocks.awt");
    for (auto& b : set.blocks) {
        RawTensor t = read_raw_tensor(in);
        if (t.dims != b.dims)
            throw CorruptionError("block " + b.name + " dims disagree with manifest");
        b.values = std::move(t.values);
    }
    return set;
}

void ema_update(ParamSet& shadow, const ParamSet& current, double decay) {
    if (decay < 0.0 || decay >= 1.0) throw ParameterError("ema decay must lie in [0, 1)");
    shadow.require_same_shape(current, "ema_update");
    shadow.scale_add(decay, current, 1.0 - decay);
}

} // namespace awdiff
