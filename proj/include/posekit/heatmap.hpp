#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "posekit/errors.hpp"

namespace posekit {

/// Multi-channel float grid in [0, 1], one channel per body part.
/// Data is stored as channel planes, row-major within each plane.
struct Heatmap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;
    std::vector<std::string> channel_names;  // optional, filled by the renderer

    Heatmap() = default;
    Heatmap(int w, int h, int c)
        : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, 0.0) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t plane_size() const { return static_cast<size_t>(width) * height; }
    bool same_shape(const Heatmap& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// Per-pixel max over all channels, as a single-channel heatmap.
Heatmap composite(const Heatmap& h);

/// Mirrors every channel across the vertical axis (exact column swap).
Heatmap flip_heatmap(const Heatmap& h);

}  // namespace posekit
