#include "config_file.hpp"

#include "qcreg/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace qcreg::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

bool parse_number(std::string_view s, TomlValue& out) {
    std::string cleaned;
    for (char c : s) {
        if (c != '_') cleaned.push_back(c);
    }
    std::string_view t = cleaned;
    if (!t.empty() && t.front() == '+') t.remove_prefix(1);
    if (t.empty()) return false;
    const char* end = t.data() + t.size();
    if (t.find_first_of(".eE") == std::string_view::npos && t != "inf" && t != "nan") {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), end, v);
        if (ec == std::errc{} && ptr == end) {
            out.data = v;
            return true;
        }
        return false;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (ec != std::errc{} || ptr != end) return false;
    out.data = v;
    return true;
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& what) {
    raise(ErrorCode::parse_error, origin + ":" + std::to_string(line) + ": " + what);
}

TomlValue parse_value(std::string_view raw, const std::string& origin, std::size_t line) {
    TomlValue value;
    if (raw == "true" || raw == "false") {
        value.data = raw == "true";
        return value;
    }
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        value.data = std::string(raw.substr(1, raw.size() - 2));
        return value;
    }
    if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']') {
        std::vector<double> items;
        std::string_view body = trim(raw.substr(1, raw.size() - 2));
        while (!body.empty()) {
            const auto comma = body.find(',');
            const auto item = trim(body.substr(0, comma));
            if (!item.empty()) {
                TomlValue v;
                if (!parse_number(item, v)) fail(origin, line, "array items must be numbers");
                items.push_back(std::holds_alternative<long long>(v.data)
                                    ? static_cast<double>(std::get<long long>(v.data))
                                    : std::get<double>(v.data));
            }
            if (comma == std::string_view::npos) break;
            body = trim(body.substr(comma + 1));
        }
        value.data = std::move(items);
        return value;
    }
    if (!parse_number(raw, value)) fail(origin, line, "unrecognized value '" + std::string(raw) + "'");
    return value;
}

double as_double(const std::string& key, const TomlValue& v) {
    if (const auto* i = std::get_if<long long>(&v.data)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v.data)) return *d;
    raise(ErrorCode::invalid_argument, "config key '" + key + "' expects a number, got " + v.type_name());
}

int as_int(const std::string& key, const TomlValue& v) {
    if (const auto* i = std::get_if<long long>(&v.data)) return static_cast<int>(*i);
    raise(ErrorCode::invalid_argument, "config key '" + key + "' expects an integer, got " + v.type_name());
}

bool as_bool(const std::string& key, const TomlValue& v) {
    if (const auto* b = std::get_if<bool>(&v.data)) return *b;
    raise(ErrorCode::invalid_argument, "config key '" + key + "' expects true or false, got " + v.type_name());
}

}  // namespace

std::string TomlValue::type_name() const {
    switch (data.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "float";
        case 3: return "string";
        default: return "array";
    }
}

TomlTable parse_toml(const std::string& text, const std::string& origin) {
    TomlTable table;
    std::istringstream in(text);
    std::string raw_line;
    std::size_t line = 0;
    while (std::getline(in, raw_line)) {
        ++line;
        const auto content = trim(strip_comment(raw_line));
        if (content.empty()) continue;
        if (content.front() == '[') {
            if (content.back() != ']') fail(origin, line, "malformed table header");
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string_view::npos) fail(origin, line, "expected key = value");
        const auto key = trim(content.substr(0, eq));
        const auto value = trim(content.substr(eq + 1));
        if (key.empty() || value.empty()) fail(origin, line, "expected key = value");
        if (table.contains(std::string(key))) fail(origin, line, "duplicate key '" + std::string(key) + "'");
        table.emplace(std::string(key), parse_value(value, origin, line));
    }
    return table;
}

TomlTable load_toml(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::io_error, "config not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str(), path.string());
}

intensity::Resolution parse_resolution(const std::string& text) {
    auto to_int = [&](std::string_view s) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
            raise(ErrorCode::invalid_argument, "grid resolution must be N or WxH, got '" + text + "'");
        }
        return v;
    };
    const std::string_view s = trim(text);
    const auto x = s.find_first_of("xX");
    if (x == std::string_view::npos) {
        const int n = to_int(s);
        return {n, n};
    }
    return {to_int(s.substr(0, x)), to_int(s.substr(x + 1))};
}

void apply_config(const TomlTable& table, pipeline::RegistrationConfig& c) {
    for (const auto& [key, value] : table) {
        if (key == "alpha") c.alpha = as_double(key, value);
        else if (key == "beta") c.beta = as_double(key, value);
        else if (key == "k1") c.bounds.k1 = as_double(key, value);
        else if (key == "k2") c.bounds.k2 = as_double(key, value);
        else if (key == "n") c.n_outer = as_int(key, value);
        else if (key == "n1") c.n_proj = as_int(key, value);
        else if (key == "m1") c.m_outer = as_int(key, value);
        else if (key == "m2") c.m_smooth = as_int(key, value);
        else if (key == "tau_demons") c.tau_demons = as_double(key, value);
        else if (key == "sigma_gauss") c.sigma_gauss = as_double(key, value);
        else if (key == "early_stop") c.early_stop = as_bool(key, value);
        else if (key == "early_stop_rel") c.early_stop_rel = as_double(key, value);
        else if (key == "prealign") c.prealign = as_bool(key, value);
        else if (key == "demons_sign") c.demons_sign = as_int(key, value);
        else if (key == "grid_res") {
            if (const auto* i = std::get_if<long long>(&value.data)) {
                c.grid_res = {static_cast<int>(*i), static_cast<int>(*i)};
            } else if (const auto* a = std::get_if<std::vector<double>>(&value.data); a && a->size() == 2) {
                c.grid_res = {static_cast<int>((*a)[0]), static_cast<int>((*a)[1])};
            } else if (const auto* s = std::get_if<std::string>(&value.data)) {
                c.grid_res = parse_resolution(*s);
            } else {
                raise(ErrorCode::invalid_argument, "config key 'grid_res' expects N or [W, H]");
            }
        } else {
            raise(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
        }
    }
}

}  // namespace qcreg::cli
