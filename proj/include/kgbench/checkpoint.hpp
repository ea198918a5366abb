#pragma once

// Shared binary checkpoint container, bit-exact on round trip.
//
// Layout (little-endian):
//   magic "KGBC" | version u32 | model tag string | registry hash u64
//   meta count u32 | (key string, value string)*
//   table count u32 | (name string, rows u64, cols u64, rows*cols f64)*
// Strings are u32 length + bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "kgbench/mat.hpp"

namespace kgbench {

struct CheckpointTable {
    std::string name;
    Mat mat;
};

struct Checkpoint {
    std::string model_tag;
    std::uint64_t registry_hash = 0;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<CheckpointTable> tables;

    const Mat& table(const std::string& name) const;
    const std::string& meta_value(const std::string& key) const;
    bool has_table(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kgbench
