#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nilm/nn/tensor.hpp"

namespace nilm::nn {

// Named parameter tensors. Iteration is sorted by name, which makes every
// traversal (optimizer, Fisher, checkpoint) deterministic.
class ParamStore {
public:
    using Map = std::map<std::string, Tensor>;

    ParamStore() = default;
    explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t seed) { seed_ = seed; }

    void set(const std::string& name, Tensor t) { entries_[name] = std::move(t); }
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    void erase(const std::string& name) { entries_.erase(name); }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);

    std::size_t size() const { return entries_.size(); }
    std::size_t total_elements() const;
    std::vector<std::string> names() const;

    Map::iterator begin() { return entries_.begin(); }
    Map::iterator end() { return entries_.end(); }
    Map::const_iterator begin() const { return entries_.begin(); }
    Map::const_iterator end() const { return entries_.end(); }

    // Zero-valued store with the same names and shapes.
    ParamStore zeros_like() const;
    // Entries whose name starts with `prefix`.
    ParamStore subset(std::string_view prefix) const;
    // Copies every entry of `other` over this store (adding missing names).
    void merge_from(const ParamStore& other);

    bool operator==(const ParamStore& other) const { return entries_ == other.entries_; }

private:
    Map entries_;
    std::uint64_t seed_ = 0;
};

// Stable per-name seed so that initialization of one parameter does not depend
// on which other parameters exist.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

Tensor init_normal(const Shape& shape, double stddev, std::uint64_t seed, std::string_view name);
// He-normal for layers followed by ReLU; fan_in is the number of inputs per output.
Tensor init_he(const Shape& shape, std::size_t fan_in, std::uint64_t seed, std::string_view name);

// Binary checkpoint:
//   "NILMCKPT" | u32 version | u64 seed | u32 count |
//   count × (u32 name_len | name | u32 rank | rank × u64 dim | n × f64)
// Little-endian, values stored bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace nilm::nn
