#include "earcanal/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "earcanal/error.hpp"

namespace earcanal::wav {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t u32(std::string_view b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
    return v;
}

std::uint16_t u16(std::string_view b, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                      (static_cast<unsigned char>(b[at + 1]) << 8));
}

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xffu));
    out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

PcmAudio parse_wav(std::string_view bytes) {
    if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
        throw ParseError("not a RIFF/WAVE file");
    }
    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::string_view data;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const auto id = bytes.substr(pos, 4);
        const std::uint32_t size = u32(bytes, pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw ParseError("truncated WAV chunk '" + std::string(id) + "'");
        if (id == "fmt ") {
            if (size < 16) throw ParseError("WAV fmt chunk too short");
            format = u16(bytes, body);
            channels = u16(bytes, body + 2);
            rate = u32(bytes, body + 4);
            bits = u16(bytes, body + 14);
            if (format == kFormatExtensible) {
                if (size < 40) throw ParseError("WAV extensible fmt chunk too short");
                format = u16(bytes, body + 24);  // first two bytes of the subformat GUID
            }
            have_fmt = true;
        } else if (id == "data") {
            data = bytes.substr(body, size);
            have_data = true;
        }
        pos = body + size + (size & 1u);
    }
    if (!have_fmt) throw ParseError("WAV file has no fmt chunk");
    if (!have_data) throw ParseError("WAV file has no data chunk");
    if (format != kFormatPcm) throw ParseError("unsupported WAV encoding " + std::to_string(format) + " (expected PCM)");
    if (bits != 16) throw ParseError("unsupported WAV bit depth " + std::to_string(bits) + " (expected 16)");
    if (channels != 1) throw ParseError("unsupported WAV channel count " + std::to_string(channels) + " (expected mono)");
    if (data.size() % 2 != 0) throw ParseError("WAV data chunk has an odd byte count");

    PcmAudio audio;
    audio.sample_rate = rate;
    audio.samples.resize(data.size() / 2);
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        audio.samples[i] = static_cast<std::int16_t>(u16(data, 2 * i)) / 32768.0;
    }
    return audio;
}

PcmAudio read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_wav(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string to_wav(std::span<const double> samples, double sample_rate) {
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    const auto rate = static_cast<std::uint32_t>(std::lround(sample_rate));
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put32(out, 16);
    put16(out, kFormatPcm);
    put16(out, 1);
    put32(out, rate);
    put32(out, rate * 2);
    put16(out, 2);
    put16(out, 16);
    out += "data";
    put32(out, data_bytes);
    for (double v : samples) {
        const double scaled = std::clamp(std::round(v * 32767.0), -32768.0, 32767.0);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write WAV file: " + path.string());
    const std::string bytes = to_wav(samples, sample_rate);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing WAV file: " + path.string());
}

}  // namespace earcanal::wav
