#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stickernet/classifier.hpp"
#include "stickernet/placement.hpp"
#include "stickernet/training.hpp"

namespace stickernet {

/// Every tunable of the pipeline. Persisted as a flat `key = value` file.
struct RunConfig {
    std::uint64_t seed = 1;
    int input_size = 64;

    std::vector<int> host_widths{16, 32, 32, 32};
    std::vector<int> host_taps{2, 3};
    std::vector<int> sticker_widths{8, 16, 16, 16};
    int head_hidden = 64;
    double lambda = 3.0;
    std::string regression_loss = "diou";

    std::vector<int> classifier_widths{16, 32, 32, 32};
    int classifier_resize = 80;
    int classifier_hidden = 32;

    double threshold_filter = 0.5;
    double threshold_mask = 0.5;
    double threshold_transparency = 0.5;
    double filter_opacity = 0.6;

    int classifier_epochs = 20;
    int classifier_batch = 16;
    double classifier_lr = 0.01;
    int placement_epochs = 12;
    int placement_batch = 16;
    double placement_lr = 0.02;
    double momentum = 0.9;
    double lr_drop_fraction = 0.75;
    double lr_drop_factor = 0.1;

    int sample_cap = 300;
    std::string data_dir = "data";
    std::string weights_dir = "weights";

    /// Config keys in serialization order.
    static const std::vector<std::string>& keys();

    std::string get(std::string_view key) const;
    /// Throws InputError on an unknown key or a malformed value.
    void set(std::string_view key, std::string_view value);
    void validate() const;

    placement::PlacementConfig placement_config() const;
    classifier::ClassifierConfig classifier_config() const;
    classifier::Thresholds thresholds() const;
    TrainConfig classifier_train() const;
    TrainConfig placement_train() const;

    /// FNV-1a of the serialized config.
    std::uint64_t fingerprint() const;
};

std::string serialize_config(const RunConfig& c);
/// Parses `key = value` lines; `#` starts a comment. Unspecified keys keep defaults.
RunConfig parse_config(std::string_view text);
RunConfig read_config(const std::filesystem::path& path);
void write_config(const std::filesystem::path& path, const RunConfig& c);

}  // namespace stickernet
