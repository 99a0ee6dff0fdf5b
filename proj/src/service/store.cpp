#include "dermflow/image_io.hpp"
#include "dermflow/service.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <unistd.h>

namespace dermflow::service {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& p) {
    const auto bytes = imaging::read_file_bytes(p);
    return std::string(bytes.begin(), bytes.end());
}

bool valid_token(std::string_view s) {
    if (s.empty() || s.size() > 128) {
        return false;
    }
    for (char c : s) {
        const bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '-' || c == '_';
        if (!ok) {
            return false;
        }
    }
    return true;
}

}  // namespace

bool valid_case_id(std::string_view id) noexcept {
    if (id.size() != 32) {
        return false;
    }
    for (char c : id) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
            return false;
        }
    }
    return true;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
    static std::atomic<unsigned long> counter{0};
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.parent_path() /
                     ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Error("cannot write " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

CaseStore::CaseStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "cases");
    std::filesystem::create_directories(root_ / "responses");
    std::filesystem::create_directories(root_ / "eval");
}

void CaseStore::save(const workflow::Case& c) {
    const auto dir = root_ / "cases" / c.id();
    const auto image = dir / "image.bin";
    if (!std::filesystem::exists(image)) {
        const auto& bytes = c.image_bytes();
        write_file_atomic(image, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    write_file_atomic(dir / "case.json", workflow::case_to_json(c, false));
}

workflow::Case CaseStore::load(const std::string& id) const {
    if (!exists(id)) {
        throw NotFound("case " + id + " not found");
    }
    const auto dir = root_ / "cases" / id;
    json doc = json::parse(read_text(dir / "case.json"));
    const auto bytes = imaging::read_file_bytes(dir / "image.bin");
    doc["image"]["data"] = providers::base64_encode(bytes);
    return workflow::case_from_json(doc.dump());
}

bool CaseStore::exists(const std::string& id) const {
    return valid_case_id(id) && std::filesystem::exists(root_ / "cases" / id / "case.json");
}

std::vector<std::string> CaseStore::ids() const {
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(root_ / "cases")) {
        const std::string name = entry.path().filename().string();
        if (exists(name)) {
            out.push_back(name);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<std::string> CaseStore::load_response(const std::string& digest) const {
    const auto p = root_ / "responses" / (digest + ".json");
    if (!valid_token(digest) || !std::filesystem::exists(p)) {
        return std::nullopt;
    }
    return read_text(p);
}

void CaseStore::save_response(const std::string& digest, const std::string& document) {
    if (!valid_token(digest)) {
        throw InvalidArgument("invalid response key");
    }
    write_file_atomic(root_ / "responses" / (digest + ".json"), document);
}

void CaseStore::save_eval(const std::string& id, const std::string& document) {
    if (!valid_token(id)) {
        throw InvalidArgument("invalid evaluation run id");
    }
    write_file_atomic(root_ / "eval" / (id + ".json"), document);
}

std::optional<std::string> CaseStore::load_eval(const std::string& id) const {
    const auto p = root_ / "eval" / (id + ".json");
    if (!valid_token(id) || !std::filesystem::exists(p)) {
        return std::nullopt;
    }
    return read_text(p);
}

}  // namespace dermflow::service
