#include "manifest.hpp"

#include "qcreg/error.hpp"
#include "version.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace qcreg::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::io_error, "cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        raise(ErrorCode::io_error, "SHA-256 unavailable");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

nlohmann::ordered_json config_to_json(const pipeline::RegistrationConfig& c) {
    nlohmann::ordered_json j;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["k1"] = c.bounds.k1;
    j["k2"] = c.bounds.k2;
    j["n"] = c.n_outer;
    j["n1"] = c.n_proj;
    j["m1"] = c.m_outer;
    j["m2"] = c.m_smooth;
    j["tau_demons"] = c.tau_demons;
    j["sigma_gauss"] = c.sigma_gauss;
    j["grid_res"] = {c.grid_res.width, c.grid_res.height};
    j["early_stop"] = c.early_stop;
    j["early_stop_rel"] = c.early_stop_rel;
    j["prealign"] = c.prealign;
    j["demons_sign"] = c.demons_sign;
    return j;
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "qcreg";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    nlohmann::ordered_json in = nlohmann::ordered_json::object();
    for (const auto& [role, path] : inputs) {
        in[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
    }
    j["inputs"] = in;
    if (config_file) {
        j["config_file"] = {{"path", config_file->string()}, {"sha256", sha256_file(*config_file)}};
    } else {
        j["config_file"] = nullptr;
    }
    j["output_dir"] = output_dir.string();
    j["arguments"] = arguments;
    j["flags"] = flags;
    j["config"] = config;
    j["threads"] = threads;
    return j;
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    out << to_json().dump(2) << '\n';
    if (!out) raise(ErrorCode::io_error, "failed writing " + path.string());
}

}  // namespace qcreg::cli
