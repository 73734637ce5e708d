#include "earcanal/cli/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "earcanal/error.hpp"

namespace earcanal::cli {
namespace {

std::vector<std::filesystem::path> takes_in_dir(const std::filesystem::path& dir, const std::string& id) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("WAV directory not found: " + dir.string());
    std::vector<std::pair<int, std::filesystem::path>> found;
    const std::string prefix = id + "_";
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() != ".wav" || !name.starts_with(prefix)) continue;
        const auto stem = entry.path().stem().string().substr(prefix.size());
        int take = 0;
        const auto [ptr, err] = std::from_chars(stem.data(), stem.data() + stem.size(), take);
        if (err != std::errc{} || ptr != stem.data() + stem.size()) continue;
        found.emplace_back(take, entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<std::filesystem::path> out;
    for (auto& [_, p] : found) out.push_back(std::move(p));
    return out;
}

std::string relative_string(const std::filesystem::path& p, const std::filesystem::path& base) {
    return p.lexically_relative(base).generic_string();
}

}  // namespace

Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    try {
        std::set<std::string> seen;
        for (const auto& s : j.at("subjects")) {
            ManifestSubject sub;
            sub.id = s.at("id").get<std::string>();
            if (sub.id.empty()) throw ParseError("manifest subject with empty id");
            if (!seen.insert(sub.id).second) throw ParseError("duplicate manifest subject '" + sub.id + "'");
            sub.group = s.value("group", std::string{});
            if (s.contains("stl")) sub.stl = base_dir / s.at("stl").get<std::string>();
            if (s.contains("plant")) {
                sub.plant = base_dir / s.at("plant").get<std::string>();
                sub.takes = s.value("takes", 1);
                if (sub.takes < 1) throw ParseError("subject '" + sub.id + "' needs at least one take");
            }
            if (s.contains("wavs")) {
                for (const auto& w : s.at("wavs")) sub.wavs.push_back(base_dir / w.get<std::string>());
            }
            if (s.contains("wav_dir")) {
                auto listed = takes_in_dir(base_dir / s.at("wav_dir").get<std::string>(), sub.id);
                sub.wavs.insert(sub.wavs.end(), listed.begin(), listed.end());
            }
            if (sub.plant && !sub.wavs.empty()) {
                throw ParseError("subject '" + sub.id + "' lists both a plant and WAV takes");
            }
            m.subjects.push_back(std::move(sub));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid manifest: ") + e.what());
    }
    if (m.subjects.empty()) throw ParseError("manifest lists no subjects");
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return parse_manifest(j, path.parent_path());
}

nlohmann::json to_json(const Manifest& manifest) {
    nlohmann::json subjects = nlohmann::json::array();
    for (const auto& s : manifest.subjects) {
        nlohmann::json e = {{"id", s.id}};
        if (!s.group.empty()) e["group"] = s.group;
        if (s.stl) e["stl"] = relative_string(*s.stl, manifest.base_dir);
        if (s.plant) {
            e["plant"] = relative_string(*s.plant, manifest.base_dir);
            e["takes"] = s.takes;
        }
        if (!s.wavs.empty()) {
            nlohmann::json wavs = nlohmann::json::array();
            for (const auto& w : s.wavs) wavs.push_back(relative_string(w, manifest.base_dir));
            e["wavs"] = std::move(wavs);
        }
        subjects.push_back(std::move(e));
    }
    return {{"subjects", std::move(subjects)}};
}

}  // namespace earcanal::cli
