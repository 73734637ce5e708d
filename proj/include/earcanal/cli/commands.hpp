#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "earcanal/cli/config.hpp"

namespace earcanal::cli {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCompute = 1;
inline constexpr int kExitIo = 2;

/// Files a command produced. On failure every file and directory it created is removed.
struct CommandOutput {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

/// Ec CSV per subject of the manifest, plus the shape matrix when there are two or more subjects.
CommandOutput cmd_shape(const PipelineConfig& config, const std::filesystem::path& out_dir);

/// Feature files per take and the acoustic matrix. Plant inputs are simulated with per-take seeds
/// derived from the config seed; WAV inputs must be PCM16 mono at 44100 Hz.
CommandOutput cmd_acoustic(const PipelineConfig& config, const std::filesystem::path& out_dir);

/// Report bundle for two matrix CSVs. The acoustic matrix is reordered to the shape matrix's
/// subject order; differing id sets are an error.
CommandOutput cmd_correlate(const PipelineConfig& config, const std::filesystem::path& shape_csv,
                            const std::filesystem::path& acoustic_csv, const std::filesystem::path& out_dir);

/// Synthetic corpus (STL, plant JSON, manifest). A non-empty sweep writes one corpus per level.
/// The written config sets shape.z_origin to the generated entrance depth (0) unless given.
CommandOutput cmd_synth(const PipelineConfig& config, const std::filesystem::path& out_dir);

/// Maps the error hierarchy onto exit codes.
int exit_code_for(const std::exception& e);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace earcanal::cli
