#include "nilm/nn/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace nilm::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ParamStore::total_elements() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

ParamStore ParamStore::zeros_like() const {
    ParamStore z(seed_);
    for (const auto& [name, t] : entries_) z.set(name, Tensor(t.shape(), 0.0));
    return z;
}

ParamStore ParamStore::subset(std::string_view prefix) const {
    ParamStore s(seed_);
    for (const auto& [name, t] : entries_)
        if (std::string_view(name).starts_with(prefix)) s.set(name, t);
    return s;
}

void ParamStore::merge_from(const ParamStore& other) {
    for (const auto& [name, t] : other) entries_[name] = t;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    // FNV-1a over the tag, mixed with the root seed (splitmix64 finalizer).
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::uint64_t z = h ^ (root + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Tensor init_normal(const Shape& shape, double stddev, std::uint64_t seed, std::string_view name) {
    std::mt19937_64 rng(derive_seed(seed, name));
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(shape, 0.0);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

Tensor init_he(const Shape& shape, std::size_t fan_in, std::uint64_t seed, std::string_view name) {
    return init_normal(shape, std::sqrt(2.0 / static_cast<double>(fan_in)), seed, name);
}

namespace {

constexpr char kMagic[8] = {'N', 'I', 'L', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, store.seed());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, t] : store) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(out, d);
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    const auto version = get<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
    ParamStore store(get<std::uint64_t>(in, path));
    const auto count = get<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get<std::uint32_t>(in, path);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rank = get<std::uint32_t>(in, path);
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in, path));
        std::vector<double> data(shape_size(shape));
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
        store.set(name, Tensor(std::move(shape), std::move(data)));
    }
    return store;
}

}  // namespace nilm::nn
