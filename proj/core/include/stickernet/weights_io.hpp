#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stickernet/nn.hpp"

namespace stickernet::nn {

/// One entry of a weight container.
struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
    friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

inline constexpr char kWeightMagic[4] = {'S', 'N', 'W', '1'};
inline constexpr std::uint32_t kWeightVersion = 1;

/// Flat little-endian container: magic "SNW1", u32 version, u32 count, then per
/// entry u32 name length, name bytes, u32 rank, u32 dims, float32 data.
std::vector<unsigned char> encode_weights(std::span<const NamedArray> arrays);
std::vector<NamedArray> decode_weights(std::span<const unsigned char> bytes);

void write_weight_file(const std::filesystem::path& path, std::span<const NamedArray> arrays);
std::vector<NamedArray> read_weight_file(const std::filesystem::path& path);

inline constexpr const char* kVelocityPrefix = "sgd.velocity/";
inline constexpr const char* kEpochEntry = "meta.epoch";

/// Parameters, plus optimizer velocity and epoch counter when given.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const SgdMomentum* optimizer = nullptr, std::optional<int> epoch = std::nullopt);

/// Loads parameter values by name; every parameter must be present with a
/// matching shape. Velocity is restored when the file has it and `optimizer`
/// is given. Returns the stored epoch, if any.
std::optional<int> load_checkpoint(const std::filesystem::path& path, ModelParams& params,
                                   SgdMomentum* optimizer = nullptr);

}  // namespace stickernet::nn
