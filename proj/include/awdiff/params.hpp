#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awdiff/errors.hpp"

namespace awdiff {

/// One named tensor of trainable values (or optimizer statistics).
struct TensorBlock {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<double> values;

    std::size_t count() const { return values.size(); }
};

/// Ordered list of named blocks. Order is part of the contract: elementwise
/// operations and serialization walk blocks in index order, which keeps
/// training bitwise reproducible.
struct ParamSet {
    std::vector<TensorBlock> blocks;

    std::size_t total_count() const;
    bool same_shape(const ParamSet& other) const;
    void require_same_shape(const ParamSet& other, const char* context) const;
    void require_finite(const char* context) const;

    TensorBlock& find(const std::string& name);
    const TensorBlock& find(const std::string& name) const;

    void fill(double value);

    /// this = a*this + b*other, elementwise across all blocks.
    void scale_add(double a, const ParamSet& other, double b);

    /// Writes `<stem>.manifest` (text: name rank dims per block, in order)
    /// and `<stem>.blocks.awt` (concatenated raw tensors in the same order).
    void save(const std::string& stem) const;
    static ParamSet load(const std::string& stem);
};

/// shadow = decay*shadow + (1-decay)*current, elementwise.
void ema_update(ParamSet& shadow, const ParamSet& current, double decay);

} // namespace awdiff
