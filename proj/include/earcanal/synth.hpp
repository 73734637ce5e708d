#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "earcanal/geometry.hpp"
#include "earcanal/mesh.hpp"
#include "earcanal/signal.hpp"

namespace earcanal::synth {

/// Canal axis as a function of depth z (mm), projected onto the slice plane.
struct Centerline {
    enum class Kind { polynomial, helix, spiral };
    Kind kind{Kind::polynomial};
    /// polynomial: x(z) = sum coeff_x[k] z^k, y(z) = sum coeff_y[k] z^k.
    std::vector<double> coeff_x{0.0};
    std::vector<double> coeff_y{0.0};
    /// helix: radius * (cos(wavenumber z + phase), sin(wavenumber z + phase)).
    /// spiral: drift * z * (cos(wavenumber z + phase), sin(wavenumber z + phase)).
    double radius{0.0};
    double drift{0.0};
    double wavenumber{0.0};
    double phase{0.0};

    Point2 at(double z) const;
};

struct CanalGenerator {
    Centerline centerline;
    /// Mean cross-section radius as a polynomial in depth, mm.
    std::vector<double> radius_profile{3.5};
    /// Cross-section semi-axes are r(1 + e) and r(1 - e).
    double ellipticity{0.0};
    /// Cross-section orientation: angle + angle_rate * z, radians.
    double section_angle{0.0};
    double section_angle_rate{0.0};
    double length{10.0};
    int facets_per_ring{30};
    int rings{50};
    /// Standard deviation of radial vertex jitter, mm.
    double roughness{0.0};
    std::uint64_t seed{0};

    double radius_at(double z) const;
    void validate() const;
};

struct PlantGenerator {
    std::vector<double> resonance_frequencies;
    std::vector<double> q_factors;
    std::vector<double> gains;
    double direct_gain{0.0};
    int delay{0};
    int tap_count{1024};
    /// Each resonance is scaled by (1 + jitter * u), u uniform in [-1, 1) drawn from `seed`.
    double jitter{0.0};
    std::uint64_t seed{0};
};

/// Closed tube body: 2 * facets_per_ring * rings triangles between horizontal rings.
/// Throws std::invalid_argument for a non-positive radius profile or bad sizes.
mesh::TriangleMesh generate_canal_mesh(const CanalGenerator& gen);

/// Delayed direct path plus parallel two-pole resonators, truncated at tap_count.
/// Throws std::invalid_argument when a resonance reaches Nyquist or the response has not decayed
/// below 1e-6 of its peak within tap_count.
acoustics::ImpulseResponse generate_plant(const PlantGenerator& gen,
                                          double sample_rate = acoustics::kPipelineSampleRate);

/// One synthetic subject. `deformation` drives both the canal twist and the canal resonances.
struct SubjectSpec {
    std::string id;
    std::string group;
    double deformation{0.0};
    CanalGenerator canal;
    PlantGenerator plant;
};

/// A twin pair (the second twin perturbed from the first by `perturbation` of the deformation
/// range) followed by `independents` unrelated subjects.
/// Independents keep a deformation gap of 0.1 from everyone else within [-0.25, 0.25], so only a
/// handful fit; ComputeError when they cannot be placed. std::invalid_argument for perturbation
/// outside [0, 0.5].
std::vector<SubjectSpec> make_subject_family(std::uint64_t base_seed, double perturbation, int independents = 2);

nlohmann::json to_json(const CanalGenerator& gen);
CanalGenerator canal_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PlantGenerator& gen);
PlantGenerator plant_generator_from_json(const nlohmann::json& j);

/// Plant file: {"sample_rate": fs, "taps": [...]} or {"sample_rate": fs, "resonator": {...}}.
nlohmann::json plant_file_json(const PlantGenerator& gen, double sample_rate = acoustics::kPipelineSampleRate);
acoustics::ImpulseResponse plant_from_file_json(const nlohmann::json& j);

}  // namespace earcanal::synth
