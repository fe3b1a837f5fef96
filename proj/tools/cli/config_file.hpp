#pragma once

#include "qcreg/pipeline.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace qcreg::cli {

/// Value of one `key = value` line of the TOML subset read by --config:
/// booleans, integers, floats, basic strings and flat numeric arrays.
struct TomlValue {
    std::variant<bool, long long, double, std::string, std::vector<double>> data;

    [[nodiscard]] std::string type_name() const;
};

using TomlTable = std::map<std::string, TomlValue>;

// Table headers are accepted and ignored; keys are flat. Throws
// qcreg::Error(parse_error) with the offending line number.
[[nodiscard]] TomlTable parse_toml(const std::string& text, const std::string& origin = "config");
[[nodiscard]] TomlTable load_toml(const std::filesystem::path& path);

/// Recognized keys: alpha, beta, k1, k2, n, n1, m1, m2, tau_demons,
/// sigma_gauss, grid_res (integer or [w, h]), early_stop, early_stop_rel,
/// prealign, demons_sign. Unknown keys and mistyped values throw
/// qcreg::Error(invalid_argument).
void apply_config(const TomlTable& table, pipeline::RegistrationConfig& config);

/// Parses "512" or "640x480".
[[nodiscard]] intensity::Resolution parse_resolution(const std::string& text);

}  // namespace qcreg::cli
