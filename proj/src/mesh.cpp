#include "earcanal/mesh.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "earcanal/error.hpp"

namespace earcanal::mesh {
namespace {

constexpr std::size_t kHeaderBytes = 80;
constexpr std::size_t kFacetBytes = 50;

std::uint32_t load_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, sizeof v);
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

float load_f32(const char* p) { return std::bit_cast<float>(load_u32(p)); }

void store_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void store_f32(std::string& out, double v) {
    store_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

Vec3 load_vec3(const char* p) {
    return {load_f32(p), load_f32(p + 4), load_f32(p + 8)};
}

void check_vertices(const Triangle& t, std::size_t index) {
    for (const auto& v : t.vertices) {
        if (!is_finite(v)) {
            throw ParseError("STL facet " + std::to_string(index) + " has a non-finite vertex");
        }
    }
}

TriangleMesh parse_binary(std::string_view bytes) {
    if (bytes.size() < kHeaderBytes + 4) {
        throw ParseError("truncated STL: " + std::to_string(bytes.size()) +
                         " bytes is shorter than the binary header");
    }
    const std::uint32_t count = load_u32(bytes.data() + kHeaderBytes);
    const std::size_t expected = kHeaderBytes + 4 + kFacetBytes * static_cast<std::size_t>(count);
    if (bytes.size() < expected) {
        throw ParseError("truncated STL: triangle count " + std::to_string(count) + " needs " +
                         std::to_string(expected) + " bytes, file has " +
                         std::to_string(bytes.size()));
    }
    if (bytes.size() != expected) {
        throw ParseError("STL triangle count field (" + std::to_string(count) +
                         ") disagrees with payload length " + std::to_string(bytes.size()));
    }
    TriangleMesh mesh;
    mesh.source_format = StlFormat::binary;
    mesh.triangles.reserve(count);
    const char* p = bytes.data() + kHeaderBytes + 4;
    for (std::uint32_t i = 0; i < count; ++i, p += kFacetBytes) {
        Triangle t;
        t.normal = load_vec3(p);
        t.vertices = {load_vec3(p + 12), load_vec3(p + 24), load_vec3(p + 36)};
        check_vertices(t, i);
        mesh.triangles.push_back(t);
    }
    return mesh;
}

class Tokenizer {
public:
    explicit Tokenizer(std::string_view text) : text_(text) {}

    std::optional<std::string_view> next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= text_.size()) return std::nullopt;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return text_.substr(start, pos_ - start);
    }

    std::string_view expect_token(std::string_view what) {
        auto tok = next();
        if (!tok) throw ParseError("truncated ASCII STL: expected " + std::string(what));
        return *tok;
    }

    void expect(std::string_view keyword) {
        const auto tok = expect_token(keyword);
        if (tok != keyword) {
            throw ParseError("ASCII STL line " + std::to_string(line_) + ": expected '" +
                             std::string(keyword) + "', got '" + std::string(tok) + "'");
        }
    }

    double number() {
        const auto tok = expect_token("a number");
        double value = 0.0;
        const char* first = tok.data();
        const char* last = tok.data() + tok.size();
        if (!tok.empty() && *first == '+') ++first;
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last) {
            throw ParseError("ASCII STL line " + std::to_string(line_) + ": non-numeric token '" +
                             std::string(tok) + "'");
        }
        return value;
    }

    Vec3 vec3() {
        const double x = number();
        const double y = number();
        const double z = number();
        return {x, y, z};
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    }

private:
    std::string_view text_;
    std::size_t pos_{0};
    std::size_t line_{1};
};

TriangleMesh parse_ascii(std::string_view text) {
    Tokenizer tok(text);
    tok.expect("solid");
    tok.skip_line();  // the solid name may contain spaces

    TriangleMesh mesh;
    mesh.source_format = StlFormat::ascii;
    while (true) {
        const auto word = tok.next();
        if (!word) throw ParseError("truncated ASCII STL: missing 'endsolid'");
        if (*word == "endsolid") break;
        if (*word != "facet") {
            throw ParseError("ASCII STL: expected 'facet' or 'endsolid', got '" +
                             std::string(*word) + "'");
        }
        tok.expect("normal");
        Triangle t;
        t.normal = tok.vec3();
        tok.expect("outer");
        tok.expect("loop");
        for (auto& v : t.vertices) {
            tok.expect("vertex");
            v = tok.vec3();
        }
        tok.expect("endloop");
        tok.expect("endfacet");
        check_vertices(t, mesh.triangles.size());
        mesh.triangles.push_back(t);
    }
    return mesh;
}

bool looks_ascii(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
    return bytes.substr(i, 5) == "solid";
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TriangleMesh parse_stl(std::string_view bytes) {
    if (bytes.empty()) throw ParseError("empty STL input");

    // Binary files may also begin with "solid"; a payload length that matches the count field
    // is the stronger signal.
    bool binary = true;
    if (bytes.size() >= kHeaderBytes + 4) {
        const std::uint32_t count = load_u32(bytes.data() + kHeaderBytes);
        const std::size_t expected =
            kHeaderBytes + 4 + kFacetBytes * static_cast<std::size_t>(count);
        binary = expected == bytes.size() || !looks_ascii(bytes);
    } else {
        binary = !looks_ascii(bytes);
    }

    TriangleMesh mesh = binary ? parse_binary(bytes) : parse_ascii(bytes);
    if (mesh.triangles.empty()) throw ParseError("STL contains no triangles");
    return mesh;
}

TriangleMesh read_stl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open STL file: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_stl(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string to_binary_stl(const TriangleMesh& mesh) {
    if (mesh.triangles.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw std::length_error("too many triangles for binary STL");
    }
    std::string out(kHeaderBytes, '\0');
    constexpr std::string_view header = "earcanal binary STL";
    std::copy(header.begin(), header.end(), out.begin());
    out.reserve(kHeaderBytes + 4 + kFacetBytes * mesh.triangles.size());
    store_u32(out, static_cast<std::uint32_t>(mesh.triangles.size()));
    for (const auto& t : mesh.triangles) {
        store_f32(out, t.normal.x);
        store_f32(out, t.normal.y);
        store_f32(out, t.normal.z);
        for (const auto& v : t.vertices) {
            store_f32(out, v.x);
            store_f32(out, v.y);
            store_f32(out, v.z);
        }
        out.push_back('\0');
        out.push_back('\0');
    }
    return out;
}

std::string to_ascii_stl(const TriangleMesh& mesh, std::string_view solid_name) {
    std::ostringstream os;
    os << "solid " << solid_name << '\n';
    for (const auto& t : mesh.triangles) {
        os << "  facet normal " << format_double(t.normal.x) << ' ' << format_double(t.normal.y)
           << ' ' << format_double(t.normal.z) << "\n    outer loop\n";
        for (const auto& v : t.vertices) {
            os << "      vertex " << format_double(v.x) << ' ' << format_double(v.y) << ' '
               << format_double(v.z) << '\n';
        }
        os << "    endloop\n  endfacet\n";
    }
    os << "endsolid " << solid_name << '\n';
    return os.str();
}

void write_binary_stl(const std::filesystem::path& path, const TriangleMesh& mesh) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write STL file: " + path.string());
    const std::string bytes = to_binary_stl(mesh);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing STL file: " + path.string());
}

Vec3 facet_normal(const std::array<Vec3, 3>& v) {
    const Vec3 n = cross(v[1] - v[0], v[2] - v[0]);
    const double len = norm(n);
    if (len == 0.0) return {};
    return (1.0 / len) * n;
}

CentroidCloud triangle_centroids(const TriangleMesh& mesh) {
    if (mesh.triangles.empty()) throw std::invalid_argument("triangle_centroids: empty mesh");
    CentroidCloud cloud;
    cloud.points.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        const auto& [a, b, c] = t.vertices;
        cloud.points.push_back({(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0,
                                (a.z + b.z + c.z) / 3.0});
    }
    return cloud;
}

int slice_index(double depth, double delta_z) {
    if (depth <= 0.0) return 0;
    auto n = static_cast<long long>(std::ceil(depth / delta_z)) - 1;
    // The quotient can round across a boundary; settle membership against the products.
    while (n > 0 && !(static_cast<double>(n) * delta_z < depth)) --n;
    while (!(depth <= static_cast<double>(n + 1) * delta_z)) ++n;
    if (n > std::numeric_limits<int>::max()) throw std::out_of_range("slice index overflow");
    return static_cast<int>(std::max<long long>(n, 0));
}

SliceSet slice_centroids(const CentroidCloud& cloud, double delta_z,
                         std::optional<double> z_origin) {
    if (!(delta_z > 0.0) || !std::isfinite(delta_z)) {
        throw std::invalid_argument("slice_centroids: delta_z must be positive");
    }
    if (cloud.points.empty()) throw std::invalid_argument("slice_centroids: empty centroid cloud");

    double z_min = std::numeric_limits<double>::infinity();
    for (const auto& p : cloud.points) z_min = std::min(z_min, p.z);
    const double origin = z_origin.value_or(z_min);
    if (origin > z_min) {
        throw std::invalid_argument("slice_centroids: z_origin lies above the lowest centroid");
    }

    SliceSet set;
    set.delta_z = delta_z;
    set.z_origin = origin;
    for (const auto& p : cloud.points) {
        const int n = slice_index(p.z - origin, delta_z);
        if (static_cast<std::size_t>(n) >= set.bins.size()) {
            const auto old = set.bins.size();
            set.bins.resize(static_cast<std::size_t>(n) + 1);
            for (auto i = old; i < set.bins.size(); ++i) set.bins[i].n = static_cast<int>(i);
        }
        set.bins[static_cast<std::size_t>(n)].points.push_back({p.x, p.y});
    }
    return set;
}

nlohmann::json to_json(const CentroidCloud& cloud) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : cloud.points) points.push_back({p.x, p.y, p.z});
    return {{"count", cloud.count()}, {"points", std::move(points)}};
}

nlohmann::json to_json(const SliceSet& slices) {
    nlohmann::json bins = nlohmann::json::array();
    for (const auto& b : slices.bins) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : b.points) pts.push_back({p.x, p.y});
        bins.push_back({{"n", b.n}, {"points", std::move(pts)}});
    }
    return {{"delta_z", slices.delta_z},
            {"z_origin", slices.z_origin},
            {"n_max", slices.n_max()},
            {"bins", std::move(bins)}};
}

CentroidCloud centroid_cloud_from_json(const nlohmann::json& j) {
    try {
        CentroidCloud cloud;
        for (const auto& p : j.at("points")) {
            cloud.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                                    p.at(2).get<double>()});
        }
        if (j.at("count").get<std::size_t>() != cloud.count()) {
            throw ParseError("centroid cloud count does not match its point list");
        }
        return cloud;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid centroid cloud JSON: ") + e.what());
    }
}

SliceSet slice_set_from_json(const nlohmann::json& j) {
    try {
        SliceSet set;
        set.delta_z = j.at("delta_z").get<double>();
        set.z_origin = j.at("z_origin").get<double>();
        for (const auto& b : j.at("bins")) {
            SliceBin bin;
            bin.n = b.at("n").get<int>();
            if (bin.n != static_cast<int>(set.bins.size())) {
                throw ParseError("slice bins are not contiguous");
            }
            for (const auto& p : b.at("points")) {
                bin.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            }
            set.bins.push_back(std::move(bin));
        }
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid slice set JSON: ") + e.what());
    }
}

}  // namespace earcanal::mesh
