#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyadgen/pdm.hpp"

namespace dyadgen {

// Landmark connectivity as an edge list.
struct Topology {
    std::vector<std::pair<int, int>> edges;

    // iBUG-68: open polylines for jaw, brows and nose; closed loops for the
    // eyes and both lip contours. 63 edges.
    static Topology ibug68();

    void validate() const;  // indices in [0,67], no duplicate edges
};

// Binary raster, row-major, background 0 / line 1.
struct RasterFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// One-pixel-wide lines, exactly one pixel per major-axis step, computed in
// integer arithmetic (deterministic across platforms). Off-canvas portions
// are clipped per segment.
RasterFrame render(const Landmarks2D& landmarks, const Topology& topo, int width, int height);

// project + render per frame; frame count preserved.
std::vector<RasterFrame> render_sequence(const std::vector<ShapeParams>& sequence,
                                         const PDMModel& pdm, const Topology& topo, int width,
                                         int height);

// FNV-1a over dimensions and pixels; used for golden-image checks.
std::uint64_t frame_hash(const RasterFrame& frame);

// Portable graymaps `frame_%06d.pgm` (P5, maxval 255, line 0 on background 255).
void export_pgm(const std::vector<RasterFrame>& frames, const std::string& dir);

// Single SVG 1.1 file with one line group per frame, for quick inspection.
void export_svg(const std::vector<Landmarks2D>& frames, const Topology& topo, int width, int height,
                const std::string& path);

}  // namespace dyadgen
