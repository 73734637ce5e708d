#include "earcanal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "earcanal/error.hpp"

namespace earcanal::synth {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDecayFloor = 1e-6;

// Family layout. Deformation is a canal twist rate in rad/mm; resonances move with it.
constexpr double kDeformationMin = -0.25;
constexpr double kDeformationMax = 0.25;
constexpr double kIndependentGap = 0.1;
constexpr double kResonanceShiftPerTwist = 0.4;

double polyval(const std::vector<double>& c, double z) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * z + *it;
    return v;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    // Drawn from raw bits so that results do not depend on the standard library's distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

std::string kind_name(Centerline::Kind k) {
    switch (k) {
        case Centerline::Kind::polynomial: return "polynomial";
        case Centerline::Kind::helix: return "helix";
        case Centerline::Kind::spiral: return "spiral";
    }
    return "polynomial";
}

Centerline::Kind parse_kind(const std::string& s) {
    if (s == "polynomial") return Centerline::Kind::polynomial;
    if (s == "helix") return Centerline::Kind::helix;
    if (s == "spiral") return Centerline::Kind::spiral;
    throw ParseError("unknown centerline kind '" + s + "'");
}

}  // namespace

Point2 Centerline::at(double z) const {
    switch (kind) {
        case Kind::polynomial: return {polyval(coeff_x, z), polyval(coeff_y, z)};
        case Kind::helix: return {radius * std::cos(wavenumber * z + phase), radius * std::sin(wavenumber * z + phase)};
        case Kind::spiral:
            return {drift * z * std::cos(wavenumber * z + phase), drift * z * std::sin(wavenumber * z + phase)};
    }
    return {};
}

double CanalGenerator::radius_at(double z) const { return polyval(radius_profile, z); }

void CanalGenerator::validate() const {
    if (!(length > 0.0)) throw std::invalid_argument("canal length must be positive");
    if (facets_per_ring < 3) throw std::invalid_argument("facets_per_ring must be at least 3");
    if (rings < 1) throw std::invalid_argument("rings must be at least 1");
    if (!(ellipticity >= 0.0 && ellipticity < 1.0)) throw std::invalid_argument("ellipticity must lie in [0, 1)");
    if (!(roughness >= 0.0)) throw std::invalid_argument("roughness must be non-negative");
    if (radius_profile.empty()) throw std::invalid_argument("invalid radius profile: no coefficients");
    constexpr int samples = 1000;
    for (int k = 0; k <= samples; ++k) {
        const double z = length * k / samples;
        if (!(radius_at(z) > 0.0)) {
            throw std::invalid_argument("invalid radius profile: non-positive radius at depth " + std::to_string(z));
        }
    }
}

mesh::TriangleMesh generate_canal_mesh(const CanalGenerator& gen) {
    gen.validate();
    const auto f = static_cast<std::size_t>(gen.facets_per_ring);
    const auto r = static_cast<std::size_t>(gen.rings);
    std::mt19937_64 rng(splitmix(gen.seed));
    std::normal_distribution<double> jitter(0.0, 1.0);

    std::vector<Vec3> verts((r + 1) * f);
    for (std::size_t j = 0; j <= r; ++j) {
        const double z = gen.length * static_cast<double>(j) / static_cast<double>(r);
        const Point2 c = gen.centerline.at(z);
        const double radius = gen.radius_at(z);
        const double a = radius * (1.0 + gen.ellipticity);
        const double b = radius * (1.0 - gen.ellipticity);
        const double angle = gen.section_angle + gen.section_angle_rate * z;
        for (std::size_t i = 0; i < f; ++i) {
            const double phi = kTwoPi * static_cast<double>(i) / static_cast<double>(f);
            double scale = 1.0;
            if (gen.roughness > 0.0) scale += gen.roughness * jitter(rng) / radius;
            const Point2 p = c + rotate({scale * a * std::cos(phi), scale * b * std::sin(phi)}, angle);
            verts[j * f + i] = {p.x, p.y, z};
        }
    }

    mesh::TriangleMesh m;
    m.source_format = mesh::StlFormat::binary;
    m.triangles.reserve(2 * f * r);
    for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t i = 0; i < f; ++i) {
            const std::size_t i1 = (i + 1) % f;
            const Vec3& v00 = verts[j * f + i];
            const Vec3& v01 = verts[j * f + i1];
            const Vec3& v10 = verts[(j + 1) * f + i];
            const Vec3& v11 = verts[(j + 1) * f + i1];
            for (const auto& tri : {std::array{v00, v01, v10}, std::array{v01, v11, v10}}) {
                m.triangles.push_back({tri, mesh::facet_normal(tri)});
            }
        }
    }
    return m;
}

acoustics::ImpulseResponse generate_plant(const PlantGenerator& gen, double sample_rate) {
    const std::size_t count = gen.resonance_frequencies.size();
    if (gen.q_factors.size() != count || gen.gains.size() != count) {
        throw std::invalid_argument("plant generator: frequency, Q and gain lists differ in length");
    }
    if (gen.tap_count < 1 || gen.delay < 0 || gen.delay >= gen.tap_count) {
        throw std::invalid_argument("plant generator: need 0 <= delay < tap_count");
    }
    if (!(gen.jitter >= 0.0 && gen.jitter < 1.0)) throw std::invalid_argument("plant generator: jitter must lie in [0, 1)");

    std::mt19937_64 rng(splitmix(gen.seed));
    const double nyquist = sample_rate / 2.0;
    std::vector<double> freqs(count), radii(count);
    for (std::size_t i = 0; i < count; ++i) {
        double fr = gen.resonance_frequencies[i];
        if (gen.jitter > 0.0) fr *= 1.0 + gen.jitter * uniform(rng, -1.0, 1.0);
        if (!(fr > 0.0) || !(fr < nyquist)) {
            throw std::invalid_argument("plant generator: resonance " + std::to_string(fr) + " Hz is not below Nyquist");
        }
        if (!(gen.q_factors[i] > 0.0)) throw std::invalid_argument("plant generator: Q must be positive");
        freqs[i] = fr;
        radii[i] = std::exp(-std::numbers::pi * fr / (gen.q_factors[i] * sample_rate));
    }

    acoustics::ImpulseResponse ir;
    ir.sample_rate = sample_rate;
    ir.samples.assign(static_cast<std::size_t>(gen.tap_count), 0.0);
    const auto delay = static_cast<std::size_t>(gen.delay);
    ir.samples[delay] += gen.direct_gain;
    for (std::size_t i = 0; i < count; ++i) {
        const double w = kTwoPi * freqs[i] / sample_rate;
        double env = 1.0;
        for (std::size_t n = delay; n < ir.samples.size(); ++n) {
            ir.samples[n] += gen.gains[i] * env * std::cos(w * static_cast<double>(n - delay));
            env *= radii[i];
        }
    }

    double peak = 0.0;
    for (double v : ir.samples) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw std::invalid_argument("plant generator: response is identically zero");
    double tail = 0.0;
    const double remaining = static_cast<double>(gen.tap_count - gen.delay);
    for (std::size_t i = 0; i < count; ++i) tail += std::abs(gen.gains[i]) * std::pow(radii[i], remaining);
    if (tail > kDecayFloor * peak) {
        throw std::invalid_argument("plant generator: response has not decayed below 1e-6 of peak within " +
                                    std::to_string(gen.tap_count) + " taps");
    }
    ir.history.push_back("plant: " + std::to_string(count) + " resonators, " + std::to_string(gen.tap_count) + " taps");
    return ir;
}

std::vector<SubjectSpec> make_subject_family(std::uint64_t base_seed, double perturbation, int independents) {
    if (!(perturbation >= 0.0 && perturbation <= 0.5)) {
        throw std::invalid_argument("perturbation must lie in [0, 0.5]");
    }
    if (independents < 0) throw std::invalid_argument("independents must be non-negative");

    std::mt19937_64 rng(splitmix(base_seed));
    const double range = kDeformationMax - kDeformationMin;

    // Nuisance parameters move the canal without changing its center-function directions.
    struct Nuisance {
        double drift, heading, radius, ellipticity, section_angle;
    };
    auto draw_nuisance = [&rng]() {
        return Nuisance{uniform(rng, 0.15, 0.35), uniform(rng, 0.0, kTwoPi), uniform(rng, 3.0, 4.0),
                        uniform(rng, 0.05, 0.25), uniform(rng, 0.0, std::numbers::pi)};
    };

    auto make = [&](std::string id, std::string group, double deformation, const Nuisance& nz, std::uint64_t seed) {
        SubjectSpec s;
        s.id = std::move(id);
        s.group = std::move(group);
        s.deformation = deformation;
        s.canal.centerline.kind = Centerline::Kind::spiral;
        s.canal.centerline.drift = nz.drift;
        s.canal.centerline.wavenumber = deformation;
        s.canal.centerline.phase = nz.heading;
        s.canal.radius_profile = {nz.radius, -0.05};
        s.canal.ellipticity = nz.ellipticity;
        s.canal.section_angle = nz.section_angle;
        s.canal.length = 10.0;
        s.canal.facets_per_ring = 30;
        s.canal.rings = 50;
        s.canal.seed = seed;

        // Earphone/microphone resonances shared by everyone, canal resonances tuned by deformation.
        const double shift = 1.0 + kResonanceShiftPerTwist * deformation;
        s.plant.resonance_frequencies = {1800.0, 9500.0, 3400.0 * shift, 6800.0 * shift, 12500.0 * shift};
        s.plant.q_factors = {2.0, 3.0, 6.0, 6.0, 6.0};
        s.plant.gains = {0.5, 0.25, 1.0, 0.7, 0.4};
        s.plant.direct_gain = 0.2;
        s.plant.delay = 12;
        s.plant.tap_count = 1024;
        s.plant.seed = seed;
        return s;
    };

    std::vector<SubjectSpec> family;
    const double twin_a = uniform(rng, kDeformationMin + 0.1 * range, kDeformationMax - 0.1 * range);
    const double sign = uniform(rng, -1.0, 1.0) < 0.0 ? -1.0 : 1.0;
    const double twin_b = twin_a + sign * perturbation * range;
    const Nuisance base = draw_nuisance();
    Nuisance sibling = base;
    sibling.drift *= 1.0 + perturbation;
    sibling.heading += perturbation * std::numbers::pi;
    sibling.radius *= 1.0 - 0.5 * perturbation;
    sibling.section_angle += perturbation;
    family.push_back(make("TwinsA", "twins", twin_a, base, splitmix(base_seed ^ 0xA)));
    family.push_back(make("TwinsB", "twins", twin_b, sibling, splitmix(base_seed ^ 0xB)));

    std::vector<double> taken = {twin_a, twin_b};
    for (int k = 0; k < independents; ++k) {
        double d = 0.0;
        for (int attempt = 0;; ++attempt) {
            d = uniform(rng, kDeformationMin, kDeformationMax);
            const bool clear = std::all_of(taken.begin(), taken.end(),
                                           [d](double t) { return std::abs(d - t) >= kIndependentGap; });
            if (clear) break;
            if (attempt > 10000) throw ComputeError("cannot place independent subjects in the deformation range");
        }
        taken.push_back(d);
        std::string id = "User";
        id += static_cast<char>('C' + k % 24);
        if (k >= 24) id += std::to_string(k / 24);
        family.push_back(make(id, "independent", d, draw_nuisance(), splitmix(base_seed + 0x100 + static_cast<std::uint64_t>(k))));
    }
    return family;
}

nlohmann::json to_json(const CanalGenerator& g) {
    const auto& c = g.centerline;
    return {{"centerline",
             {{"kind", kind_name(c.kind)},
              {"coeff_x", c.coeff_x},
              {"coeff_y", c.coeff_y},
              {"radius", c.radius},
              {"drift", c.drift},
              {"wavenumber", c.wavenumber},
              {"phase", c.phase}}},
            {"radius_profile", g.radius_profile},
            {"ellipticity", g.ellipticity},
            {"section_angle", g.section_angle},
            {"section_angle_rate", g.section_angle_rate},
            {"length", g.length},
            {"facets_per_ring", g.facets_per_ring},
            {"rings", g.rings},
            {"roughness", g.roughness},
            {"seed", g.seed}};
}

CanalGenerator canal_from_json(const nlohmann::json& j) {
    try {
        CanalGenerator g;
        const auto& c = j.at("centerline");
        g.centerline.kind = parse_kind(c.at("kind").get<std::string>());
        g.centerline.coeff_x = c.value("coeff_x", std::vector<double>{0.0});
        g.centerline.coeff_y = c.value("coeff_y", std::vector<double>{0.0});
        g.centerline.radius = c.value("radius", 0.0);
        g.centerline.drift = c.value("drift", 0.0);
        g.centerline.wavenumber = c.value("wavenumber", 0.0);
        g.centerline.phase = c.value("phase", 0.0);
        g.radius_profile = j.at("radius_profile").get<std::vector<double>>();
        g.ellipticity = j.value("ellipticity", 0.0);
        g.section_angle = j.value("section_angle", 0.0);
        g.section_angle_rate = j.value("section_angle_rate", 0.0);
        g.length = j.at("length").get<double>();
        g.facets_per_ring = j.at("facets_per_ring").get<int>();
        g.rings = j.at("rings").get<int>();
        g.roughness = j.value("roughness", 0.0);
        g.seed = j.value("seed", std::uint64_t{0});
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid canal generator JSON: ") + e.what());
    }
}

nlohmann::json to_json(const PlantGenerator& g) {
    return {{"resonance_frequencies", g.resonance_frequencies},
            {"q_factors", g.q_factors},
            {"gains", g.gains},
            {"direct_gain", g.direct_gain},
            {"delay", g.delay},
            {"tap_count", g.tap_count},
            {"jitter", g.jitter},
            {"seed", g.seed}};
}

PlantGenerator plant_generator_from_json(const nlohmann::json& j) {
    try {
        PlantGenerator g;
        g.resonance_frequencies = j.at("resonance_frequencies").get<std::vector<double>>();
        g.q_factors = j.at("q_factors").get<std::vector<double>>();
        g.gains = j.at("gains").get<std::vector<double>>();
        g.direct_gain = j.value("direct_gain", 0.0);
        g.delay = j.value("delay", 0);
        g.tap_count = j.at("tap_count").get<int>();
        g.jitter = j.value("jitter", 0.0);
        g.seed = j.value("seed", std::uint64_t{0});
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid plant generator JSON: ") + e.what());
    }
}

nlohmann::json plant_file_json(const PlantGenerator& gen, double sample_rate) {
    return {{"sample_rate", sample_rate}, {"resonator", to_json(gen)}};
}

acoustics::ImpulseResponse plant_from_file_json(const nlohmann::json& j) {
    double fs = acoustics::kPipelineSampleRate;
    try {
        fs = j.value("sample_rate", acoustics::kPipelineSampleRate);
        if (j.contains("taps")) {
            acoustics::ImpulseResponse ir;
            ir.sample_rate = fs;
            ir.samples = j.at("taps").get<std::vector<double>>();
            if (ir.samples.empty()) throw ParseError("plant tap list is empty");
            return ir;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid plant JSON: ") + e.what());
    }
    if (!j.contains("resonator")) throw ParseError("plant JSON needs either 'taps' or 'resonator'");
    try {
        return generate_plant(plant_generator_from_json(j.at("resonator")), fs);
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("invalid plant: ") + e.what());
    }
}

}  // namespace earcanal::synth
