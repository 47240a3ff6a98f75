#include "rg4/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rg4/rng.hpp"

namespace rg4::core {

namespace {

constexpr char kMagic[7] = {'R', 'G', '4', 'C', 'K', 'P', 'T'};
constexpr uint8_t kVersion = 1;

void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    auto u = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) {
        for (size_t i = 0; i < sizeof(T); ++i) buf[i] = u[sizeof(T) - 1 - i];
    } else {
        std::memcpy(buf, u.data(), sizeof(T));
    }
    put_bytes(os, buf, sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> buf;
    is.read(reinterpret_cast<char*>(buf.data()), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> rev;
        for (size_t i = 0; i < sizeof(T); ++i) rev[i] = buf[sizeof(T) - 1 - i];
        return std::bit_cast<T>(rev);
    }
    return std::bit_cast<T>(buf);
}

void write_record(std::ostream& os, const std::string& name, const Tensor& t) {
    put_le<uint32_t>(os, static_cast<uint32_t>(name.size()));
    put_bytes(os, name.data(), name.size());
    put_le<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (int e : t.shape()) put_le<uint64_t>(os, static_cast<uint64_t>(e));
    for (double v : t.vec()) put_le<double>(os, v);
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    put_bytes(os, kMagic, sizeof(kMagic));
    put_le<uint8_t>(os, kVersion);
    put_le<uint32_t>(os, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) write_record(os, p.name, *p.tensor);
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void save_checkpoint(const std::string& path, const std::map<std::string, Tensor>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    put_bytes(os, kMagic, sizeof(kMagic));
    put_le<uint8_t>(os, kVersion);
    put_le<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) write_record(os, name, t);
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(kMagic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    const auto version = get_le<uint8_t>(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const auto count = get_le<uint32_t>(is);
    std::map<std::string, Tensor> out;
    for (uint32_t r = 0; r < count; ++r) {
        const auto name_len = get_le<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated name");
        const auto rank = get_le<uint32_t>(is);
        std::vector<int> shape(rank);
        for (auto& e : shape) e = static_cast<int>(get_le<uint64_t>(is));
        const size_t n = shape_numel(shape);
        std::vector<double> data(n);
        for (auto& v : data) v = get_le<double>(is);
        out[name] = Tensor::from(shape, std::move(data));
    }
    return out;
}

void load_into(const std::string& path, std::vector<NamedParam>& params) {
    auto loaded = load_checkpoint(path);
    for (auto& p : params) {
        auto it = loaded.find(p.name);
        if (it == loaded.end())
            throw std::runtime_error("checkpoint: '" + path + "' has no parameter '" + p.name + "'");
        if (it->second.shape() != p.tensor->shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + p.name + "': file " +
                                     it->second.shape_str() + " vs model " + p.tensor->shape_str());
        p.tensor->vec() = it->second.vec();
    }
}

uint64_t params_hash(const std::vector<NamedParam>& params) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params) {
        h = fnv1a64(p.name, h);
        for (int e : p.tensor->shape()) h = fnv1a64_bytes(&e, sizeof(e), h);
        h = fnv1a64_bytes(p.tensor->data(), p.tensor->numel() * sizeof(double), h);
    }
    return h;
}

}  // namespace rg4::core
