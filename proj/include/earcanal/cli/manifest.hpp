#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace earcanal::cli {

/// One subject of an input manifest. Paths are resolved against the manifest directory.
struct ManifestSubject {
    std::string id;
    std::string group;
    std::optional<std::filesystem::path> stl;
    /// Acoustic input: either a plant to simulate `takes` times, or recorded WAV takes.
    std::optional<std::filesystem::path> plant;
    int takes{0};
    std::vector<std::filesystem::path> wavs;
};

struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestSubject> subjects;
};

/// {"subjects": [{"id", "group"?, "stl"?, "plant"?, "takes"?, "wavs"? | "wav_dir"?}]}.
/// "wav_dir" lists files named <id>_<take>.wav in take order. Throws ParseError/IoError.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json to_json(const Manifest& manifest);

}  // namespace earcanal::cli
