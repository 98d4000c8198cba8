#include "posekit/heatmap.hpp"

#include <algorithm>

namespace posekit {

Heatmap composite(const Heatmap& h) {
    Heatmap out(h.width, h.height, 1);
    out.channel_names = {"composite"};
    for (int c = 0; c < h.channels; ++c) {
        for (int y = 0; y < h.height; ++y) {
            for (int x = 0; x < h.width; ++x) {
                out.at(0, y, x) = std::max(out.at(0, y, x), h.at(c, y, x));
            }
        }
    }
    return out;
}

Heatmap flip_heatmap(const Heatmap& h) {
    Heatmap out = h;
    for (int c = 0; c < h.channels; ++c) {
        for (int y = 0; y < h.height; ++y) {
            for (int x = 0; x < h.width; ++x) {
                out.at(c, y, x) = h.at(c, y, h.width - 1 - x);
            }
        }
    }
    return out;
}

}  // namespace posekit
