#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dkfair/experiment.hpp"

namespace dkfair {

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw Error(ErrorKind::Io, "sha256 computation failed");
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
    return out;
}

std::string write_artifacts(const std::filesystem::path& dir, const std::map<std::string, std::string>& files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [name, content] : files) {
        const auto path = dir / name;
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
        std::ofstream out(path, std::ios::binary);
        out << content;
        if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
        entries.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    }
    const std::string manifest = nlohmann::json{{"files", entries}}.dump(2) + "\n";
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest;
    if (!out) throw Error(ErrorKind::Io, "cannot write manifest.json");
    return manifest;
}

}  // namespace dkfair
