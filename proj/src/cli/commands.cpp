#include "earcanal/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "earcanal/acoustics.hpp"
#include "earcanal/analysis.hpp"
#include "earcanal/cli/manifest.hpp"
#include "earcanal/ellipse.hpp"
#include "earcanal/error.hpp"
#include "earcanal/mesh.hpp"
#include "earcanal/mls.hpp"
#include "earcanal/shape.hpp"
#include "earcanal/synth.hpp"
#include "earcanal/wav.hpp"

namespace fs = std::filesystem;

namespace earcanal::cli {
namespace {

// Records what a command creates so a failed run leaves nothing half-written behind.
class OutputTracker {
public:
    OutputTracker() = default;
    OutputTracker(const OutputTracker&) = delete;
    OutputTracker& operator=(const OutputTracker&) = delete;
    ~OutputTracker() {
        if (!committed_) rollback();
    }

    void make_dir(const fs::path& dir) {
        std::vector<fs::path> missing;
        for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) {
            missing.push_back(p);
            if (p == p.parent_path()) break;
        }
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
        dirs_.insert(dirs_.end(), missing.rbegin(), missing.rend());
    }

    const fs::path& file(const fs::path& p) {
        output_.files.push_back(p);
        return p;
    }

    void write_text(const fs::path& path, const std::string& text) {
        file(path);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << text;
        if (!out) throw IoError("failed writing " + path.string());
    }

    void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

    void warn(std::string message) { output_.warnings.push_back(std::move(message)); }

    CommandOutput commit() {
        committed_ = true;
        return std::move(output_);
    }

private:
    void rollback() noexcept {
        std::error_code ec;
        for (const auto& f : output_.files) fs::remove(f, ec);
        for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
    }

    CommandOutput output_;
    std::vector<fs::path> dirs_;
    bool committed_{false};
};

Manifest require_manifest(const PipelineConfig& config) {
    if (config.manifest.empty()) throw ConfigError("no manifest given (use --manifest or io.manifest)");
    return load_manifest(config.manifest);
}

[[noreturn]] void throw_listing(const std::vector<std::string>& failures, bool io_failure, const std::string& what) {
    std::string msg = what + " failed for " + std::to_string(failures.size()) + " subject(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    if (io_failure) throw IoError(msg);
    throw ComputeError(msg);
}

std::string fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

void check_rate(double rate, const fs::path& source) {
    if (rate != acoustics::kPipelineSampleRate) {
        throw IoError(source.string() + ": sample rate " + fixed(rate, 0) + " Hz, expected 44100 Hz");
    }
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// The recording of one take: repeats + 1 excitation periods, first one discarded as warm-up.
std::vector<double> load_wav_take(const fs::path& path, const acoustics::ExcitationSignal& excitation, int repeats) {
    const wav::PcmAudio audio = wav::read_wav(path);
    check_rate(audio.sample_rate, path);
    const std::size_t needed = excitation.length() * static_cast<std::size_t>(repeats + 1);
    if (audio.samples.size() < needed) {
        throw IoError(path.string() + ": " + std::to_string(audio.samples.size()) + " samples, need " +
                      std::to_string(needed) + " (" + std::to_string(repeats + 1) + " periods of order " +
                      std::to_string(excitation.order) + ")");
    }
    return audio.samples;
}

std::vector<double> scaled_for_pcm(std::vector<double> x) {
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        for (auto& v : x) v *= 0.9 / peak;
    }
    return x;
}

void write_corpus(const PipelineConfig& config, double perturbation, const fs::path& dir, OutputTracker& out) {
    out.make_dir(dir);
    const auto family = synth::make_subject_family(config.seed, perturbation, config.synth.independents);
    std::optional<acoustics::ExcitationSignal> excitation;
    if (config.synth.render_wav) {
        excitation = acoustics::generate_mls(config.acoustic.mls_order);
        out.make_dir(dir / "wav");
    }

    nlohmann::json subjects = nlohmann::json::array();
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto& s = family[i];
        const auto stl = s.id + ".stl";
        const auto mesh = synth::generate_canal_mesh(s.canal);
        out.write_text(dir / stl, mesh::to_binary_stl(mesh));
        out.write_json(dir / (s.id + "_canal.json"), {{"id", s.id},
                                                       {"group", s.group},
                                                       {"deformation", s.deformation},
                                                       {"canal", synth::to_json(s.canal)}});
        const auto plant_name = s.id + "_plant.json";
        out.write_json(dir / plant_name, synth::plant_file_json(s.plant));

        nlohmann::json entry = {{"id", s.id}, {"group", s.group}, {"stl", stl}};
        if (excitation) {
            const auto plant = synth::generate_plant(s.plant);
            for (int t = 0; t < config.synth.takes; ++t) {
                const auto recorded =
                    acoustics::simulate_measurement(*excitation, plant, config.acoustic.repeats,
                                                    config.acoustic.noise_rms, take_seed(config.seed, i, t));
                const auto path = dir / "wav" / (s.id + "_" + std::to_string(t) + ".wav");
                out.file(path);
                wav::write_wav(path, scaled_for_pcm(recorded), acoustics::kPipelineSampleRate);
            }
            entry["wav_dir"] = "wav";
        } else {
            entry["plant"] = plant_name;
            entry["takes"] = config.synth.takes;
        }
        subjects.push_back(std::move(entry));
    }
    out.write_json(dir / "manifest.json", {{"subjects", std::move(subjects)}});
}

}  // namespace

CommandOutput cmd_shape(const PipelineConfig& config, const fs::path& out_dir) {
    config.validate();
    const Manifest manifest = require_manifest(config);

    std::vector<shape::Subject> subjects;
    std::vector<std::string> failures;
    bool io_failure = false;
    for (const auto& s : manifest.subjects) {
        try {
            if (!s.stl) throw ConfigError("no \"stl\" entry in the manifest");
            const auto mesh = mesh::read_stl(*s.stl);
            subjects.push_back({s.id, shape::center_function_from_mesh(mesh, config.shape)});
        } catch (const IoError& e) {
            io_failure = true;
            failures.push_back(s.id + ": " + e.what());
        } catch (const std::exception& e) {
            failures.push_back(s.id + ": " + e.what());
        }
    }
    if (!failures.empty()) throw_listing(failures, io_failure, "shape extraction");

    OutputTracker out;
    out.make_dir(out_dir);
    out.write_json(out_dir / "config.json", to_json(config));
    nlohmann::json ec_meta = nlohmann::json::array();
    for (const auto& s : subjects) {
        out.write_text(out_dir / (s.id + "_ec.csv"), shape::to_csv(s.ec));
        ec_meta.push_back({{"id", s.id},
                           {"entries", s.ec.size()},
                           {"interpolated_slices", s.ec.interpolated},
                           {"truncated_tail", s.ec.truncated_tail}});
        if (!s.ec.interpolated.empty()) {
            out.warn(s.id + ": " + std::to_string(s.ec.interpolated.size()) + " slice(s) could not be fitted and were interpolated");
        }
    }
    if (subjects.size() < 2) {
        out.warn("only one subject: similarity matrix skipped");
        return out.commit();
    }

    std::vector<shape::ShapeSimilarity> details;
    const auto matrix = shape::shape_similarity_matrix(subjects, config.shape, &details);
    out.write_text(out_dir / "shape_matrix.csv", to_csv(matrix));
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& d : details) {
        pairs.push_back({{"a", d.subject_pair.first},
                         {"b", d.subject_pair.second},
                         {"value", d.value},
                         {"best_theta", d.best_theta}});
    }
    out.write_json(out_dir / "shape_similarity.json", {{"subjects", std::move(ec_meta)}, {"pairs", std::move(pairs)}});
    return out.commit();
}

CommandOutput cmd_acoustic(const PipelineConfig& config, const fs::path& out_dir) {
    config.validate();
    const Manifest manifest = require_manifest(config);
    const auto& ac = config.acoustic;
    const auto chain = ac.feature_chain();
    const auto excitation = acoustics::generate_mls(ac.mls_order);

    std::vector<acoustics::AcousticFeature> features;
    std::vector<std::string> failures;
    bool io_failure = false;
    for (std::size_t i = 0; i < manifest.subjects.size(); ++i) {
        const auto& s = manifest.subjects[i];
        try {
            std::vector<acoustics::AcousticFeature> own;
            if (s.plant) {
                const auto plant = synth::plant_from_file_json(read_json_file(*s.plant));
                check_rate(plant.sample_rate, *s.plant);
                for (int t = 0; t < s.takes; ++t) {
                    const auto recorded = acoustics::simulate_measurement(excitation, plant, ac.repeats, ac.noise_rms,
                                                                          take_seed(config.seed, i, t));
                    const auto ir = acoustics::recover_impulse_response(recorded, excitation, ac.repeats);
                    own.push_back(acoustics::extract_feature(ir, chain, s.id, t));
                }
            } else if (!s.wavs.empty()) {
                for (std::size_t t = 0; t < s.wavs.size(); ++t) {
                    const auto recorded = load_wav_take(s.wavs[t], excitation, ac.repeats);
                    const auto ir = acoustics::recover_impulse_response(recorded, excitation, ac.repeats);
                    own.push_back(acoustics::extract_feature(ir, chain, s.id, static_cast<int>(t)));
                }
            } else {
                throw ConfigError("no \"plant\" or WAV takes in the manifest");
            }
            features.insert(features.end(), own.begin(), own.end());
        } catch (const IoError& e) {
            io_failure = true;
            failures.push_back(s.id + ": " + e.what());
        } catch (const std::exception& e) {
            failures.push_back(s.id + ": " + e.what());
        }
    }
    if (!failures.empty()) throw_listing(failures, io_failure, "acoustic feature extraction");

    OutputTracker out;
    out.make_dir(out_dir / "features");
    out.write_json(out_dir / "config.json", to_json(config));
    const nlohmann::json params = to_json(config).at("acoustic");
    for (const auto& f : features) {
        const auto f32 = out_dir / "features" / (f.subject_id + "_" + std::to_string(f.take_index) + ".f32");
        out.file(f32);
        out.file(fs::path(f32).replace_extension(".json"));
        acoustics::write_feature(f32, f, params);
    }
    if (manifest.subjects.size() < 2) {
        out.warn("only one subject: similarity matrix skipped");
        return out.commit();
    }

    std::vector<acoustics::AcousticSimilarity> details;
    const auto matrix = acoustics::acoustic_similarity_matrix(features, ac.similarity_mode, &details);
    out.write_text(out_dir / "acoustic_matrix.csv", to_csv(matrix));
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& d : details) {
        pairs.push_back({{"a", d.subject_pair.first}, {"b", d.subject_pair.second}, {"mean", d.mean}, {"std", d.std}});
    }
    out.write_json(out_dir / "acoustic_similarity.json",
                   {{"similarity_mode", acoustics::to_string(ac.similarity_mode)}, {"pairs", std::move(pairs)}});
    return out.commit();
}

CommandOutput cmd_correlate(const PipelineConfig& config, const fs::path& shape_csv, const fs::path& acoustic_csv,
                            const fs::path& out_dir) {
    config.validate();
    const SimilarityMatrix shape = read_csv(shape_csv);
    const SimilarityMatrix acoustic_in = read_csv(acoustic_csv);

    auto sorted = [](std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    if (sorted(shape.subject_ids()) != sorted(acoustic_in.subject_ids())) {
        std::string msg = "subject ids differ between matrices:\n  shape:";
        for (const auto& id : shape.subject_ids()) msg += " " + id;
        msg += "\n  acoustic:";
        for (const auto& id : acoustic_in.subject_ids()) msg += " " + id;
        throw IoError(msg);
    }
    if (!shape.complete() || !acoustic_in.complete()) throw IoError("similarity matrices must have every off-diagonal cell");

    SimilarityMatrix acoustic(shape.subject_ids(), acoustic_in.kind());
    for (std::size_t i = 0; i < shape.size(); ++i) {
        for (std::size_t j = i + 1; j < shape.size(); ++j) {
            const auto a = acoustic_in.require_index(shape.subject_ids()[i]);
            const auto b = acoustic_in.require_index(shape.subject_ids()[j]);
            acoustic.set(i, j, acoustic_in.value(a, b), acoustic_in.stddev(a, b));
        }
    }

    analysis::ReportInputs inputs;
    inputs.shape = shape;
    inputs.acoustic = acoustic;
    inputs.regressions = analysis::regress_all(shape, acoustic);
    inputs.config = to_json(config);

    OutputTracker out;
    out.make_dir(out_dir);
    out.write_json(out_dir / "config.json", inputs.config);
    for (const auto& r : inputs.regressions) {
        if (r.degenerate) out.warn(r.subject_id + ": degenerate regression (constant values), r reported as 0");
    }
    // emit_report writes a fixed set of names; register them so a failure rolls them back too.
    out.make_dir(out_dir / "regression");
    for (const auto& r : inputs.regressions) {
        out.file(out_dir / "regression" / (r.subject_id + ".json"));
        out.file(out_dir / "regression" / (r.subject_id + ".svg"));
    }
    for (const char* name : {"shape_matrix.csv", "acoustic_matrix.csv", "summary.csv", "summary.json"}) {
        out.file(out_dir / name);
    }
    analysis::emit_report(inputs, out_dir);
    return out.commit();
}

CommandOutput cmd_synth(const PipelineConfig& config_in, const fs::path& out_dir) {
    config_in.validate();
    // Generated canals open at z = 0; recording it keeps ring centroids off the slice edges.
    PipelineConfig config = config_in;
    if (!config.shape.z_origin) config.shape.z_origin = 0.0;
    OutputTracker out;
    out.make_dir(out_dir);
    out.write_json(out_dir / "config.json", to_json(config));
    if (config.synth.sweep.empty()) {
        write_corpus(config, config.synth.perturbation, out_dir, out);
        return out.commit();
    }
    for (double p : config.synth.sweep) {
        PipelineConfig level = config;
        level.synth.perturbation = p;
        level.synth.sweep.clear();
        const auto dir = out_dir / ("perturbation_" + fixed(p, 3));
        write_corpus(level, p, dir, out);
        out.write_json(dir / "config.json", to_json(level));
    }
    return out.commit();
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    return kExitCompute;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ear canal shape and acoustic similarity pipeline.\n"
                 "Exit codes: 0 success, 1 computational failure, 2 I/O or configuration failure."};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    const PipelineConfig defaults;
    struct Common {
        std::string config_path;
        std::string out_dir;
        std::uint64_t seed{};
        CLI::Option* seed_opt{};
    };

    auto add_common = [&](CLI::App* sub, Common& c) {
        sub->add_option("--config", c.config_path, "Pipeline config JSON; command-line flags override it")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", c.out_dir, "Output directory")->required();
        c.seed = defaults.seed;
        c.seed_opt = sub->add_option("--seed", c.seed, "Seed for every random draw")->capture_default_str();
    };

    // shape
    Common shape_c;
    PipelineConfig shape_v = defaults;
    std::string shape_manifest;
    double z_origin = 0.0;
    auto* shape_cmd = app.add_subcommand("shape", "Shape center functions and the shape similarity matrix");
    add_common(shape_cmd, shape_c);
    auto* shape_manifest_opt = shape_cmd->add_option("--manifest", shape_manifest, "Manifest JSON listing subject STL files");
    auto* dz_opt = shape_cmd->add_option("--delta-z", shape_v.shape.delta_z, "Slice width in mm")->capture_default_str();
    auto* theta_opt = shape_cmd->add_option("--theta-samples", shape_v.shape.theta_samples,
                                            "Rotation grid size over [0, 2*pi)")->capture_default_str();
    auto* z_opt = shape_cmd->add_option("--z-origin", z_origin, "Depth of the canal entrance (default: lowest centroid)");

    // acoustic
    Common ac_c;
    PipelineConfig ac_v = defaults;
    std::string ac_manifest, ac_mode = acoustics::to_string(defaults.acoustic.similarity_mode);
    auto* ac_cmd = app.add_subcommand("acoustic", "Acoustic features and the acoustic similarity matrix");
    add_common(ac_cmd, ac_c);
    auto* ac_manifest_opt = ac_cmd->add_option("--manifest", ac_manifest, "Manifest JSON listing plants or WAV takes");
    auto& a = ac_v.acoustic;
    auto* order_opt = ac_cmd->add_option("--mls-order", a.mls_order, "MLS order m (period 2^m - 1)")->capture_default_str();
    auto* rep_opt = ac_cmd->add_option("--repeats", a.repeats, "Synchronously averaged periods")->capture_default_str();
    auto* trim_opt = ac_cmd->add_option("--trim-threshold", a.trim_threshold, "Pre-rise trim level, fraction of peak")
                         ->capture_default_str();
    auto* low_opt = ac_cmd->add_option("--low-hz", a.low_hz, "Band-pass low edge")->capture_default_str();
    auto* high_opt = ac_cmd->add_option("--high-hz", a.high_hz, "Band-pass high edge (clamped just below Nyquist)")
                         ->capture_default_str();
    auto* fo_opt = ac_cmd->add_option("--filter-order", a.filter_order, "Total Butterworth band-pass order")
                       ->capture_default_str();
    auto* len_opt = ac_cmd->add_option("--feature-length", a.feature_length, "Feature samples")->capture_default_str();
    auto* mode_opt = ac_cmd->add_option("--similarity-mode", ac_mode, "vector or per_sample")
                         ->check(CLI::IsMember({"vector", "per_sample"}))
                         ->capture_default_str();
    auto* noise_opt = ac_cmd->add_option("--noise-rms", a.noise_rms, "Noise RMS of simulated takes")->capture_default_str();

    // correlate
    Common co_c;
    std::string shape_csv, acoustic_csv;
    auto* co_cmd = app.add_subcommand("correlate", "Per-subject regression of acoustic on shape similarity");
    add_common(co_cmd, co_c);
    co_cmd->add_option("--shape-csv", shape_csv, "Shape similarity matrix CSV")->required()->check(CLI::ExistingFile);
    co_cmd->add_option("--acoustic-csv", acoustic_csv, "Acoustic similarity matrix CSV")->required()->check(CLI::ExistingFile);

    // synth
    Common sy_c;
    PipelineConfig sy_v = defaults;
    auto& sy = sy_v.synth;
    auto* sy_cmd = app.add_subcommand("synth", "Synthetic twin-pair corpus (STL, plant JSON, manifest)");
    add_common(sy_cmd, sy_c);
    auto* pert_opt = sy_cmd->add_option("--perturbation", sy.perturbation, "Twin perturbation, fraction of the deformation range")
                         ->capture_default_str();
    auto* ind_opt = sy_cmd->add_option("--independents", sy.independents, "Unrelated subjects")->capture_default_str();
    auto* takes_opt = sy_cmd->add_option("--takes", sy.takes, "Takes per subject")->capture_default_str();
    auto* sweep_opt = sy_cmd->add_option("--sweep", sy.sweep, "Perturbation levels, one corpus each");
    auto* wav_opt = sy_cmd->add_flag("--wav", sy.render_wav, "Render takes as PCM16 WAV recordings");
    auto* sy_order_opt = sy_cmd->add_option("--mls-order", sy_v.acoustic.mls_order, "MLS order of rendered takes")
                             ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitIo;
    }

    auto resolve = [](const Common& c) {
        PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
        if (c.seed_opt->count() > 0) cfg.seed = c.seed;
        return cfg;
    };
    auto set_if = [](CLI::Option* opt, auto& target, const auto& value) {
        if (opt->count() > 0) target = value;
    };

    try {
        CommandOutput result;
        if (shape_cmd->parsed()) {
            auto cfg = resolve(shape_c);
            set_if(shape_manifest_opt, cfg.manifest, shape_manifest);
            set_if(dz_opt, cfg.shape.delta_z, shape_v.shape.delta_z);
            set_if(theta_opt, cfg.shape.theta_samples, shape_v.shape.theta_samples);
            if (z_opt->count() > 0) cfg.shape.z_origin = z_origin;
            result = cmd_shape(cfg, shape_c.out_dir);
        } else if (ac_cmd->parsed()) {
            auto cfg = resolve(ac_c);
            set_if(ac_manifest_opt, cfg.manifest, ac_manifest);
            set_if(order_opt, cfg.acoustic.mls_order, a.mls_order);
            set_if(rep_opt, cfg.acoustic.repeats, a.repeats);
            set_if(trim_opt, cfg.acoustic.trim_threshold, a.trim_threshold);
            set_if(low_opt, cfg.acoustic.low_hz, a.low_hz);
            set_if(high_opt, cfg.acoustic.high_hz, a.high_hz);
            set_if(fo_opt, cfg.acoustic.filter_order, a.filter_order);
            set_if(len_opt, cfg.acoustic.feature_length, a.feature_length);
            set_if(noise_opt, cfg.acoustic.noise_rms, a.noise_rms);
            if (mode_opt->count() > 0) cfg.acoustic.similarity_mode = acoustics::parse_similarity_mode(ac_mode);
            result = cmd_acoustic(cfg, ac_c.out_dir);
        } else if (co_cmd->parsed()) {
            result = cmd_correlate(resolve(co_c), shape_csv, acoustic_csv, co_c.out_dir);
        } else if (sy_cmd->parsed()) {
            auto cfg = resolve(sy_c);
            set_if(pert_opt, cfg.synth.perturbation, sy.perturbation);
            set_if(ind_opt, cfg.synth.independents, sy.independents);
            set_if(takes_opt, cfg.synth.takes, sy.takes);
            set_if(sweep_opt, cfg.synth.sweep, sy.sweep);
            set_if(wav_opt, cfg.synth.render_wav, sy.render_wav);
            set_if(sy_order_opt, cfg.acoustic.mls_order, sy_v.acoustic.mls_order);
            result = cmd_synth(cfg, sy_c.out_dir);
        }
        for (const auto& w : result.warnings) err << "warning: " << w << '\n';
        out << "wrote " << result.files.size() << " file(s)\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace earcanal::cli
