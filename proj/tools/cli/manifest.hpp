#pragma once

#include "qcreg/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qcreg::cli {

/// Lowercase hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

[[nodiscard]] nlohmann::ordered_json config_to_json(const pipeline::RegistrationConfig& config);

struct RunManifest {
    std::string subcommand;
    std::vector<std::pair<std::string, std::filesystem::path>> inputs;  // role, path
    std::optional<std::filesystem::path> config_file;
    std::filesystem::path output_dir;
    std::vector<std::string> arguments;
    nlohmann::ordered_json flags = nlohmann::ordered_json::object();
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    unsigned threads = 1;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    void write(const std::filesystem::path& path) const;
};

}  // namespace qcreg::cli
