#include "kgbench/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "kgbench/errors.hpp"

namespace kgbench {

namespace {

constexpr char kMagic[4] = {'K', 'G', 'B', 'C'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw CheckpointError("truncated checkpoint");
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw CheckpointError("truncated checkpoint");
    return v;
}
std::string read_string(std::istream& in) {
    std::uint32_t len = read_u32(in);
    if (len > (1u << 20)) throw CheckpointError("implausible string length");
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw CheckpointError("truncated checkpoint");
    return s;
}

}  // namespace

const Mat& Checkpoint::table(const std::string& name) const {
    for (const CheckpointTable& t : tables)
        if (t.name == name) return t.mat;
    throw CheckpointError("checkpoint table not found: " + name);
}

bool Checkpoint::has_table(const std::string& name) const {
    for (const CheckpointTable& t : tables)
        if (t.name == name) return true;
    return false;
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    throw CheckpointError("checkpoint meta key not found: " + key);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_string(out, ckpt.model_tag);
    write_u64(out, ckpt.registry_hash);
    write_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
    for (const auto& [k, v] : ckpt.meta) {
        write_string(out, k);
        write_string(out, v);
    }
    write_u32(out, static_cast<std::uint32_t>(ckpt.tables.size()));
    for (const CheckpointTable& t : ckpt.tables) {
        write_string(out, t.name);
        write_u64(out, t.mat.rows);
        write_u64(out, t.mat.cols);
        out.write(reinterpret_cast<const char*>(t.mat.data.data()),
                  static_cast<std::streamsize>(t.mat.data.size() * sizeof(double)));
    }
    if (!out) throw DataError("short write: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("bad checkpoint magic: " + path.string());
    std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.model_tag = read_string(in);
    ckpt.registry_hash = read_u64(in);
    std::uint32_t n_meta = read_u32(in);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        std::string k = read_string(in);
        std::string v = read_string(in);
        ckpt.meta.emplace_back(std::move(k), std::move(v));
    }
    std::uint32_t n_tables = read_u32(in);
    for (std::uint32_t i = 0; i < n_tables; ++i) {
        CheckpointTable t;
        t.name = read_string(in);
        std::uint64_t rows = read_u64(in);
        std::uint64_t cols = read_u64(in);
        if (rows * cols > (1ull << 32)) throw CheckpointError("implausible table size");
        t.mat = Mat(rows, cols);
        in.read(reinterpret_cast<char*>(t.mat.data.data()),
                static_cast<std::streamsize>(t.mat.data.size() * sizeof(double)));
        if (!in) throw CheckpointError("truncated checkpoint table: " + t.name);
        ckpt.tables.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace kgbench
