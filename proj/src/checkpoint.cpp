// SPDX-License-Identifier: Apache-2.0

#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace tstcd {

namespace {

constexpr char kMagic[5] = {'T', 'S', 'T', 'C', 'D'};

class Reader {
public:
    Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}

    void read(void* dst, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw ParseError(path_ + ": unexpected end of file at offset " + std::to_string(offset_) +
                             " while reading " + what);
        }
        offset_ += n;
    }

    std::uint32_t read_u32(const char* what) {
        std::uint32_t v = 0;
        read(&v, sizeof(v), what);
        return v;
    }

    std::int64_t read_i64(const char* what) {
        std::int64_t v = 0;
        read(&v, sizeof(v), what);
        return v;
    }

    std::size_t offset() const { return offset_; }

private:
    std::ifstream& in_;
    std::string path_;
    std::size_t offset_ = 0;
};

}  // namespace

void Checkpoint::add(const std::string& name, const TensorPtr& t) {
    entries.push_back(CheckpointEntry{name, t->shape, t->data});
}

void Checkpoint::add_scalar(const std::string& name, double v) {
    entries.push_back(CheckpointEntry{name, {1, 1}, {v}});
}

void Checkpoint::add_vector(const std::string& name, const std::vector<double>& v) {
    entries.push_back(CheckpointEntry{name, {1, static_cast<std::int64_t>(v.size())}, v});
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

const CheckpointEntry& Checkpoint::require(const std::string& name) const {
    const CheckpointEntry* e = find(name);
    if (!e) throw ParseError("checkpoint: missing tensor \"" + name + "\"");
    return *e;
}

double Checkpoint::scalar(const std::string& name) const {
    const CheckpointEntry& e = require(name);
    if (e.data.size() != 1) throw ParseError("checkpoint: tensor \"" + name + "\" is not a scalar");
    return e.data[0];
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint32_t count = static_cast<std::uint32_t>(entries.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& e : entries) {
        const std::uint32_t name_len = static_cast<std::uint32_t>(e.name.size());
        out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        const std::uint32_t ndim = static_cast<std::uint32_t>(e.shape.size());
        out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
        for (std::int64_t d : e.shape) out.write(reinterpret_cast<const char*>(&d), sizeof(d));
        out.write(reinterpret_cast<const char*>(e.data.data()),
                  static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Reader r(in, path);

    char magic[5];
    r.read(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError(path + ": bad magic at offset 0, not a checkpoint file");
    }
    const std::uint32_t version = r.read_u32("version");
    if (version != kVersion) {
        throw ParseError(path + ": unsupported format version " + std::to_string(version));
    }
    const std::uint32_t count = r.read_u32("tensor count");

    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const std::uint32_t name_len = r.read_u32("name length");
        if (name_len > 4096) {
            throw ParseError(path + ": implausible name length at offset " +
                             std::to_string(r.offset()));
        }
        e.name.resize(name_len);
        r.read(e.name.data(), name_len, "name");
        const std::uint32_t ndim = r.read_u32("rank");
        if (ndim < 1 || ndim > 3) {
            throw ParseError(path + ": tensor \"" + e.name + "\" has invalid rank " +
                             std::to_string(ndim) + " at offset " + std::to_string(r.offset()));
        }
        std::int64_t total = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::int64_t dim = r.read_i64("dimension");
            if (dim < 1 || dim > (1 << 28)) {
                throw ParseError(path + ": tensor \"" + e.name + "\" has invalid dimension " +
                                 std::to_string(dim) + " at offset " + std::to_string(r.offset()));
            }
            e.shape.push_back(dim);
            total *= dim;
        }
        e.data.resize(static_cast<std::size_t>(total));
        r.read(e.data.data(), static_cast<std::size_t>(total) * sizeof(double), "tensor data");
        ck.entries.push_back(std::move(e));
    }

    // Anything after the last tensor is corruption, not padding.
    char extra;
    in.read(&extra, 1);
    if (in.gcount() != 0) {
        throw ParseError(path + ": trailing bytes at offset " + std::to_string(r.offset()));
    }
    return ck;
}

}  // namespace tstcd
