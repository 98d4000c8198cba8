#include "posekit/pfm.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace posekit {

namespace {

bool host_is_little_endian() {
    const uint16_t probe = 1;
    uint8_t byte;
    std::memcpy(&byte, &probe, 1);
    return byte == 1;
}

}  // namespace

void write_pfm(const std::string& path, const Heatmap& h, int channel) {
    if (channel < 0 || channel >= h.channels) throw DimMismatch("pfm: channel out of range");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("pfm: cannot open for writing: " + path);
    out << "Pf\n" << h.width << " " << h.height << "\n" << "-1.0" << "\n";
    std::vector<float> row(static_cast<size_t>(h.width));
    // Bottom-up scanlines per the format.
    for (int y = h.height - 1; y >= 0; --y) {
        for (int x = 0; x < h.width; ++x) row[x] = static_cast<float>(h.at(channel, y, x));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw Error("pfm: write failed: " + path);
}

Heatmap read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("pfm: cannot open for reading: " + path);
    std::string magic;
    in >> magic;
    int samples_per_pixel;
    if (magic == "Pf") {
        samples_per_pixel = 1;
    } else if (magic == "PF") {
        samples_per_pixel = 3;
    } else {
        throw SchemaError("pfm: bad magic in " + path);
    }
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0 || scale == 0.0) throw SchemaError("pfm: bad header in " + path);
    in.get();  // single whitespace byte after the scale
    const bool file_little = scale < 0.0;
    const bool swap = file_little != host_is_little_endian();

    Heatmap out(w, h, 1);
    std::vector<float> row(static_cast<size_t>(w) * samples_per_pixel);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw SchemaError("pfm: truncated data in " + path);
        for (int x = 0; x < w; ++x) {
            float v = row[static_cast<size_t>(x) * samples_per_pixel];
            if (swap) {
                uint32_t bits;
                std::memcpy(&bits, &v, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&v, &bits, 4);
            }
            out.at(0, y, x) = static_cast<double>(v);
        }
    }
    return out;
}

}  // namespace posekit
