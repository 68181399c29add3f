#pragma once

// Versioned text model file. One `key values...` record per line; arrays
// are written row-major with shortest round-trip decimal formatting, so
// save -> load -> save reproduces the bytes.

#include "isf/model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isf {

inline constexpr int kModelFormatVersion = 1;

struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelFile {
    ModelParams params;
    std::uint64_t seed = 0;
    /// Training settings echoed as (key, value) text pairs.
    std::vector<std::pair<std::string, std::string>> config_echo;
};

std::string format_model(const ModelFile& model);
ModelFile parse_model(const std::string& text);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace isf
