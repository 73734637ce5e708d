#include "earcanal/cli/config.hpp"

#include <fstream>
#include <set>

#include "earcanal/error.hpp"
#include "earcanal/mls.hpp"

namespace earcanal::cli {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

acoustics::FeatureChainConfig AcousticConfig::feature_chain() const {
    return {trim_threshold, low_hz, high_hz, filter_order, feature_length};
}

void PipelineConfig::validate() const {
    try {
        shape.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("shape: ") + e.what());
    }
    const auto& a = acoustic;
    if (a.mls_order < acoustics::kMinMlsOrder || a.mls_order > acoustics::kMaxMlsOrder) {
        throw ConfigError("acoustic.mls_order must lie in [2, 24]");
    }
    if (a.repeats < 1) throw ConfigError("acoustic.repeats must be at least 1");
    if (!(a.trim_threshold > 0.0 && a.trim_threshold < 1.0)) throw ConfigError("acoustic.trim_threshold must lie in (0, 1)");
    if (!(a.low_hz > 0.0 && a.low_hz < a.high_hz)) throw ConfigError("acoustic band must satisfy 0 < low_hz < high_hz");
    if (a.filter_order <= 0 || a.filter_order % 2 != 0) throw ConfigError("acoustic.filter_order must be positive and even");
    if (a.feature_length == 0) throw ConfigError("acoustic.feature_length must be positive");
    if (!(a.noise_rms >= 0.0)) throw ConfigError("acoustic.noise_rms must be non-negative");
    if (!(synth.perturbation >= 0.0 && synth.perturbation <= 0.5)) throw ConfigError("synth.perturbation must lie in [0, 0.5]");
    for (double p : synth.sweep) {
        if (!(p >= 0.0 && p <= 0.5)) throw ConfigError("synth.sweep values must lie in [0, 0.5]");
    }
    if (synth.independents < 0) throw ConfigError("synth.independents must be non-negative");
    if (synth.takes < 1) throw ConfigError("synth.takes must be at least 1");
}

nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json z_origin = nullptr;
    if (c.shape.z_origin) z_origin = *c.shape.z_origin;
    return {{"version", kConfigVersion},
            {"seed", c.seed},
            {"shape", {{"delta_z", c.shape.delta_z}, {"theta_samples", c.shape.theta_samples}, {"z_origin", z_origin}}},
            {"acoustic",
             {{"mls_order", c.acoustic.mls_order},
              {"repeats", c.acoustic.repeats},
              {"trim_threshold", c.acoustic.trim_threshold},
              {"low_hz", c.acoustic.low_hz},
              {"high_hz", c.acoustic.high_hz},
              {"filter_order", c.acoustic.filter_order},
              {"feature_length", c.acoustic.feature_length},
              {"similarity_mode", acoustics::to_string(c.acoustic.similarity_mode)},
              {"noise_rms", c.acoustic.noise_rms}}},
            {"synth",
             {{"perturbation", c.synth.perturbation},
              {"independents", c.synth.independents},
              {"takes", c.synth.takes},
              {"sweep", c.synth.sweep},
              {"render_wav", c.synth.render_wav}}},
            {"io", {{"manifest", c.manifest}}}};
}

PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c) {
    try {
        reject_unknown(j, {"version", "seed", "shape", "acoustic", "synth", "io"}, "config");
        if (j.contains("version") && j.at("version").get<int>() != kConfigVersion) {
            throw ConfigError("unsupported config version " + j.at("version").dump());
        }
        read(j, "seed", c.seed);
        if (j.contains("shape")) {
            const auto& s = j.at("shape");
            reject_unknown(s, {"delta_z", "theta_samples", "z_origin"}, "shape");
            read(s, "delta_z", c.shape.delta_z);
            read(s, "theta_samples", c.shape.theta_samples);
            if (s.contains("z_origin")) {
                if (s.at("z_origin").is_null()) {
                    c.shape.z_origin.reset();
                } else {
                    c.shape.z_origin = s.at("z_origin").get<double>();
                }
            }
        }
        if (j.contains("acoustic")) {
            const auto& a = j.at("acoustic");
            reject_unknown(a,
                           {"mls_order", "repeats", "trim_threshold", "low_hz", "high_hz", "filter_order",
                            "feature_length", "similarity_mode", "noise_rms"},
                           "acoustic");
            read(a, "mls_order", c.acoustic.mls_order);
            read(a, "repeats", c.acoustic.repeats);
            read(a, "trim_threshold", c.acoustic.trim_threshold);
            read(a, "low_hz", c.acoustic.low_hz);
            read(a, "high_hz", c.acoustic.high_hz);
            read(a, "filter_order", c.acoustic.filter_order);
            read(a, "feature_length", c.acoustic.feature_length);
            read(a, "noise_rms", c.acoustic.noise_rms);
            if (a.contains("similarity_mode")) {
                c.acoustic.similarity_mode = acoustics::parse_similarity_mode(a.at("similarity_mode").get<std::string>());
            }
        }
        if (j.contains("synth")) {
            const auto& s = j.at("synth");
            reject_unknown(s, {"perturbation", "independents", "takes", "sweep", "render_wav"}, "synth");
            read(s, "perturbation", c.synth.perturbation);
            read(s, "independents", c.synth.independents);
            read(s, "takes", c.synth.takes);
            read(s, "sweep", c.synth.sweep);
            read(s, "render_wav", c.synth.render_wav);
        }
        if (j.contains("io")) {
            const auto& io = j.at("io");
            reject_unknown(io, {"manifest"}, "io");
            read(io, "manifest", c.manifest);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const PipelineConfig& config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config file: " + path.string());
    out << to_json(config).dump(2) << '\n';
    if (!out) throw IoError("failed writing config file: " + path.string());
}

std::uint64_t take_seed(std::uint64_t seed, std::size_t subject, int take) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (subject + 1)) ^ (0xc2b2ae3d27d4eb4full * static_cast<std::uint64_t>(take + 1));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace earcanal::cli
