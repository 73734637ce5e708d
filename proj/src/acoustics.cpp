#include "earcanal/acoustics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <span>
#include <map>
#include <stdexcept>

#include "earcanal/error.hpp"
#include "earcanal/fft.hpp"

namespace earcanal::acoustics {
namespace {

double energy(const std::vector<double>& x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

void require_forward(const ImpulseResponse& ir, Stage next) {
    if (static_cast<int>(ir.stage) >= static_cast<int>(next)) {
        throw std::invalid_argument("cannot apply stage '" + std::string(to_string(next)) +
                                    "' to a signal already at stage '" + std::string(to_string(ir.stage)) + "'");
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::raw: return "raw";
        case Stage::trimmed: return "trimmed";
        case Stage::min_phase: return "min_phase";
        case Stage::bandpassed: return "bandpassed";
        case Stage::normalized: return "normalized";
    }
    return "unknown";
}

ImpulseResponse trim_pre_rise(const ImpulseResponse& ir, double threshold_fraction) {
    require_forward(ir, Stage::trimmed);
    if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
        throw std::invalid_argument("trim threshold must lie in (0, 1)");
    }
    double peak = 0.0;
    for (double v : ir.samples) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw ComputeError("trim_pre_rise: all-zero signal");

    const double level = threshold_fraction * peak;
    const auto first = std::find_if(ir.samples.begin(), ir.samples.end(),
                                    [level](double v) { return std::abs(v) >= level; });
    ImpulseResponse out;
    out.sample_rate = ir.sample_rate;
    out.stage = Stage::trimmed;
    out.samples.assign(first, ir.samples.end());
    out.history = ir.history;
    out.history.push_back("trimmed: start=" + std::to_string(first - ir.samples.begin()) +
                          " threshold=" + fmt(threshold_fraction));
    return out;
}

std::size_t minimum_phase_fft_length(std::size_t n) {
    return fft::next_power_of_two(std::max<std::size_t>(16 * n, std::size_t{1} << 14));
}

namespace {

struct FoldResult {
    std::vector<double> y;
    std::size_t clamped{0};
};

FoldResult cepstral_fold(std::span<const double> x, std::size_t nfft) {
    const auto spectrum = fft::rfft(x, nfft);
    double peak = 0.0;
    for (const auto& c : spectrum) peak = std::max(peak, std::abs(c));
    const double floor = kSpectralFloor * peak;
    FoldResult r;
    std::vector<std::complex<double>> log_mag(spectrum.size());
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        double m = std::abs(spectrum[k]);
        if (m < floor) {
            m = floor;
            ++r.clamped;
        }
        log_mag[k] = std::log(m);
    }

    // Fold the real cepstrum onto positive quefrencies: the causal part of the log spectrum
    // whose imaginary part is the Hilbert transform of the log magnitude.
    std::vector<double> cep = fft::irfft(log_mag, nfft);
    const std::size_t half = nfft / 2;
    for (std::size_t k = 1; k < half; ++k) cep[k] *= 2.0;
    for (std::size_t k = half + 1; k < nfft; ++k) cep[k] = 0.0;

    auto folded = fft::rfft(cep, nfft);
    for (auto& c : folded) c = std::exp(c);
    r.y = fft::irfft(folded, nfft);
    return r;
}

}  // namespace

ImpulseResponse minimum_phase(const ImpulseResponse& ir) {
    require_forward(ir, Stage::min_phase);
    if (ir.samples.empty() || energy(ir.samples) == 0.0) {
        throw ComputeError("minimum_phase: zero-energy input");
    }
    const std::size_t n = ir.samples.size();

    // The exact result has n samples, so energy the fold leaves past n is cepstral aliasing.
    // Zeros near the unit circle need long transforms; grow until that residue is negligible.
    std::size_t nfft = minimum_phase_fft_length(n);
    FoldResult r;
    double residue = 0.0;
    for (;;) {
        r = cepstral_fold(ir.samples, nfft);
        const double total = energy(r.y);
        double tail = 0.0;
        for (std::size_t k = n; k < nfft; ++k) tail += r.y[k] * r.y[k];
        residue = total > 0.0 ? tail / total : 0.0;
        if (residue <= kMinimumPhaseResidue || nfft >= kMaxMinimumPhaseFft) break;
        nfft *= 2;
    }
    r.y.resize(n);

    ImpulseResponse out;
    out.sample_rate = ir.sample_rate;
    out.stage = Stage::min_phase;
    out.samples = std::move(r.y);
    out.history = ir.history;
    out.history.push_back("min_phase: nfft=" + std::to_string(nfft) + " clamped_bins=" + std::to_string(r.clamped) +
                          " tail_residue=" + fmt(residue));
    return out;
}

ImpulseResponse butterworth_bandpass(const ImpulseResponse& ir, double low_hz, double high_hz, int filter_order) {
    require_forward(ir, Stage::bandpassed);
    const BandpassDesign design = design_butterworth_bandpass(low_hz, high_hz, filter_order, ir.sample_rate);
    ImpulseResponse out;
    out.sample_rate = ir.sample_rate;
    out.stage = Stage::bandpassed;
    out.samples = design.apply(ir.samples);
    out.history = ir.history;
    std::string note = "bandpassed: " + fmt(design.low_hz) + "-" + fmt(design.high_hz) + " Hz order " +
                       std::to_string(filter_order);
    if (design.high_clamped) note += " (upper edge clamped from " + fmt(design.requested_high_hz) + " Hz)";
    out.history.push_back(std::move(note));
    return out;
}

AcousticFeature normalize_power(const ImpulseResponse& ir, std::string subject_id, int take_index) {
    require_forward(ir, Stage::normalized);
    const double e = energy(ir.samples);
    if (!(e > 0.0)) throw ComputeError("normalize_power: zero-energy input");
    const double scale = 1.0 / std::sqrt(e);
    AcousticFeature f;
    f.samples.reserve(ir.samples.size());
    for (double v : ir.samples) f.samples.push_back(v * scale);
    f.sample_rate = ir.sample_rate;
    f.subject_id = std::move(subject_id);
    f.take_index = take_index;
    f.history = ir.history;
    f.history.push_back("normalized: unit power");
    return f;
}

SimilarityMode parse_similarity_mode(const std::string& name) {
    if (name == "vector") return SimilarityMode::vector;
    if (name == "per_sample") return SimilarityMode::per_sample;
    throw std::invalid_argument("unknown similarity mode '" + name + "' (expected vector or per_sample)");
}

std::string to_string(SimilarityMode mode) {
    return mode == SimilarityMode::vector ? "vector" : "per_sample";
}

double acoustic_similarity(const AcousticFeature& a, const AcousticFeature& b, SimilarityMode mode) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n == 0) throw std::invalid_argument("acoustic_similarity: empty feature");

    if (mode == SimilarityMode::vector) {
        double dot = 0.0, ea = 0.0, eb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dot += a.samples[i] * b.samples[i];
            ea += a.samples[i] * a.samples[i];
            eb += b.samples[i] * b.samples[i];
        }
        if (ea == 0.0 || eb == 0.0) throw ComputeError("acoustic_similarity: zero-norm operand");
        return std::clamp(dot / std::sqrt(ea * eb), -1.0, 1.0);
    }

    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = a.samples[i] * b.samples[i];
        if (a.samples[i] == 0.0 || b.samples[i] == 0.0) continue;
        sum += p / (std::abs(a.samples[i]) * std::abs(b.samples[i]));
        ++used;
    }
    if (used == 0) throw ComputeError("acoustic_similarity: no sample pair with both values nonzero");
    return sum / static_cast<double>(used);
}

SimilarityMatrix acoustic_similarity_matrix(const std::vector<AcousticFeature>& features, SimilarityMode mode,
                                            std::vector<AcousticSimilarity>* details) {
    std::vector<std::string> ids;
    std::vector<std::vector<const AcousticFeature*>> takes;
    for (const auto& f : features) {
        auto it = std::find(ids.begin(), ids.end(), f.subject_id);
        if (it == ids.end()) {
            ids.push_back(f.subject_id);
            takes.emplace_back();
            it = ids.end() - 1;
        }
        takes[static_cast<std::size_t>(it - ids.begin())].push_back(&f);
    }
    if (ids.size() < 2) throw std::invalid_argument("acoustic similarity matrix needs at least two subjects");

    SimilarityMatrix m(ids, MatrixKind::acoustic);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            std::vector<double> values;
            values.reserve(takes[i].size() * takes[j].size());
            for (const auto* fa : takes[i]) {
                for (const auto* fb : takes[j]) values.push_back(acoustic_similarity(*fa, *fb, mode));
            }
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            const double sd = std::sqrt(var / static_cast<double>(values.size()));
            m.set(i, j, mean, sd);
            if (details) {
                details->push_back({mean, sd, {ids[i], ids[j]},
                                    {static_cast<int>(takes[i].size()), static_cast<int>(takes[j].size())}});
            }
        }
    }
    return m;
}

AcousticFeature extract_feature(const ImpulseResponse& raw, const FeatureChainConfig& config, std::string subject_id,
                                int take_index) {
    if (config.feature_length == 0) throw std::invalid_argument("feature_length must be positive");
    ImpulseResponse trimmed = trim_pre_rise(raw, config.trim_threshold);
    if (trimmed.samples.size() > config.feature_length) {
        trimmed.samples.resize(config.feature_length);
        trimmed.history.push_back("truncated: length=" + std::to_string(config.feature_length));
    }
    const ImpulseResponse minph = minimum_phase(trimmed);
    const ImpulseResponse band = butterworth_bandpass(minph, config.low_hz, config.high_hz, config.filter_order);
    return normalize_power(band, std::move(subject_id), take_index);
}

void write_feature(const std::filesystem::path& f32_path, const AcousticFeature& feature,
                   const nlohmann::json& parameters) {
    {
        std::ofstream out(f32_path, std::ios::binary);
        if (!out) throw IoError("cannot write feature file: " + f32_path.string());
        for (double v : feature.samples) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            char bytes[4];
            for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
            out.write(bytes, 4);
        }
        if (!out) throw IoError("failed writing feature file: " + f32_path.string());
    }
    nlohmann::json sidecar = {{"format", "float32le"},
                              {"samples", feature.samples.size()},
                              {"sample_rate", feature.sample_rate},
                              {"subject_id", feature.subject_id},
                              {"take_index", feature.take_index},
                              {"stage_history", feature.history},
                              {"parameters", parameters}};
    auto json_path = f32_path;
    json_path.replace_extension(".json");
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw IoError("cannot write feature sidecar: " + json_path.string());
    out << sidecar.dump(2) << '\n';
}

AcousticFeature read_feature(const std::filesystem::path& f32_path) {
    auto json_path = f32_path;
    json_path.replace_extension(".json");
    std::ifstream meta_in(json_path);
    if (!meta_in) throw IoError("cannot open feature sidecar: " + json_path.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(json_path.string() + ": " + e.what());
    }
    std::ifstream in(f32_path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + f32_path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto count = meta.at("samples").get<std::size_t>();
    if (bytes.size() != 4 * count) throw ParseError(f32_path.string() + ": sample count disagrees with sidecar");

    AcousticFeature f;
    f.sample_rate = meta.at("sample_rate").get<double>();
    f.subject_id = meta.at("subject_id").get<std::string>();
    f.take_index = meta.at("take_index").get<int>();
    f.history = meta.at("stage_history").get<std::vector<std::string>>();
    f.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        f.samples[i] = std::bit_cast<float>(bits);
    }
    return f;
}

}  // namespace earcanal::acoustics
