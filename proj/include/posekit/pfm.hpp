#pragma once

#include <string>

#include "posekit/heatmap.hpp"

namespace posekit {

// Single-channel portable float map ("Pf" magic, negative scale = little
// endian, scanlines bottom-up). The reader also accepts 3-channel "PF"
// files and keeps the first channel.
void write_pfm(const std::string& path, const Heatmap& h, int channel = 0);
Heatmap read_pfm(const std::string& path);

}  // namespace posekit
