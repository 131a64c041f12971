#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "updm/tensor.hpp"

namespace updm {

// Provenance travels with every artifact: which stage produced it, under
// which config hash and seed, and which checkpoint fed it.
struct Provenance {
    std::string stage;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string parent_hash;
};

// Binary container: magic "UPDM", format version, provenance + meta JSON,
// then a named tensor table of row-major little-endian 64-bit values, closed
// by an fnv1a-64 payload hash. Loading refuses wrong magic/version and any
// payload whose hash does not match (truncation included).
struct Checkpoint {
    static constexpr char kMagic[4] = {'U', 'P', 'D', 'M'};
    static constexpr std::uint32_t kVersion = 1;

    Provenance prov;
    std::string meta_json;  // stage-specific payload (specs, candidate losses, ...)
    std::vector<std::pair<std::string, Tensor>> tensors;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    // hash of the canonical payload bytes; doubles as an artifact identity
    std::string content_hash() const;

    const Tensor& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
};

std::string hash_hex(std::uint64_t h);

}  // namespace updm
