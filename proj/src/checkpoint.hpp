// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container: magic "TSTCD", a format version, then a
// sequence of named tensors (name, shape, little-endian 64-bit floats).
// Loading restores values bitwise; any truncation or corruption fails with
// the file offset.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tstcd {

struct CheckpointEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<double> data;
};

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    std::vector<CheckpointEntry> entries;

    void add(const std::string& name, const TensorPtr& t);
    void add_scalar(const std::string& name, double v);
    void add_vector(const std::string& name, const std::vector<double>& v);

    const CheckpointEntry* find(const std::string& name) const;
    const CheckpointEntry& require(const std::string& name) const;
    double scalar(const std::string& name) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace tstcd
