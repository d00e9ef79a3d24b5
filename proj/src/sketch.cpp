#include "dyadgen/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "dyadgen/io_text.hpp"

namespace fs = std::filesystem;

namespace dyadgen {

namespace {

// Keeps rounded coordinates small enough that the rational rounding below
// never overflows 64-bit intermediates.
constexpr long kCoordLimit = 10'000'000;

long to_pixel(double v) {
    if (!std::isfinite(v)) throw DataError("non-finite landmark coordinate");
    return std::clamp(std::llround(v), -static_cast<long long>(kCoordLimit),
                      static_cast<long long>(kCoordLimit));
}

long floor_div(long a, long b) {  // b > 0
    long q = a / b, r = a % b;
    return (r != 0 && a < 0) ? q - 1 : q;
}

// round(num/den) to the nearest integer, ties toward +inf.
long round_ties_up(long num, long den) {
    if (den < 0) {
        num = -num;
        den = -den;
    }
    return floor_div(2 * num + den, 2 * den);
}

// round(num/den), ties toward -inf.
long round_ties_down(long num, long den) {
    if (den < 0) {
        num = -num;
        den = -den;
    }
    return -floor_div(-2 * num + den, 2 * den);
}

void plot(RasterFrame& f, long x, long y) {
    if (x < 0 || y < 0 || x >= f.width || y >= f.height) return;
    f.pixels[static_cast<std::size_t>(y) * f.width + x] = 1;
}

// The minor coordinate is the exactly-rounded line value at each major step,
// so rasters mirror bit-exactly when the landmarks are mirrored. For steep
// segments the tie side follows the travel direction, which flips under a
// horizontal mirror together with the geometry.
void draw_segment(RasterFrame& f, double ax, double ay, double bx, double by) {
    const long x0 = to_pixel(ax), y0 = to_pixel(ay);
    const long x1 = to_pixel(bx), y1 = to_pixel(by);
    if (std::max(x0, x1) < 0 || std::min(x0, x1) >= f.width || std::max(y0, y1) < 0 ||
        std::min(y0, y1) >= f.height)
        return;
    const long dx = x1 - x0, dy = y1 - y0;
    if (dx == 0 && dy == 0) {
        plot(f, x0, y0);
        return;
    }
    if (std::labs(dx) >= std::labs(dy)) {
        const long lo = std::max(std::min(x0, x1), 0L);
        const long hi = std::min(std::max(x0, x1), static_cast<long>(f.width - 1));
        for (long m = lo; m <= hi; ++m) plot(f, m, y0 + round_ties_up((m - x0) * dy, dx));
    } else {
        const long lo = std::max(std::min(y0, y1), 0L);
        const long hi = std::min(std::max(y0, y1), static_cast<long>(f.height - 1));
        const bool up = (dx > 0) == (dy > 0);
        for (long m = lo; m <= hi; ++m) {
            const long num = (m - y0) * dx;
            plot(f, x0 + (up ? round_ties_up(num, dy) : round_ties_down(num, dy)), m);
        }
    }
}

void add_chain(std::vector<std::pair<int, int>>& edges, int first, int last, bool closed) {
    for (int i = first; i < last; ++i) edges.emplace_back(i, i + 1);
    if (closed) edges.emplace_back(last, first);
}

}  // namespace

Topology Topology::ibug68() {
    Topology t;
    add_chain(t.edges, 0, 16, false);   // jaw
    add_chain(t.edges, 17, 21, false);  // right brow
    add_chain(t.edges, 22, 26, false);  // left brow
    add_chain(t.edges, 27, 30, false);  // nose bridge
    add_chain(t.edges, 31, 35, false);  // nostrils
    add_chain(t.edges, 36, 41, true);   // right eye
    add_chain(t.edges, 42, 47, true);   // left eye
    add_chain(t.edges, 48, 59, true);   // outer lip
    add_chain(t.edges, 60, 67, true);   // inner lip
    return t;
}

void Topology::validate() const {
    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= kLandmarkCount || b < 0 || b >= kLandmarkCount)
            throw DataError("topology edge index out of range");
        const auto key = std::minmax(a, b);
        if (!seen.insert(key).second) throw DataError("duplicate topology edge");
    }
}

RasterFrame render(const Landmarks2D& landmarks, const Topology& topo, int width, int height) {
    if (width < 1 || height < 1) throw UsageError("canvas dimensions must be >= 1");
    RasterFrame f;
    f.width = width;
    f.height = height;
    f.pixels.assign(static_cast<std::size_t>(width) * height, 0);
    for (const auto& [a, b] : topo.edges)
        draw_segment(f, landmarks(a, 0), landmarks(a, 1), landmarks(b, 0), landmarks(b, 1));
    return f;
}

std::vector<RasterFrame> render_sequence(const std::vector<ShapeParams>& sequence,
                                         const PDMModel& pdm, const Topology& topo, int width,
                                         int height) {
    std::vector<RasterFrame> frames;
    frames.reserve(sequence.size());
    for (const auto& params : sequence)
        frames.push_back(render(project(pdm, params), topo, width, height));
    return frames;
}

std::uint64_t frame_hash(const RasterFrame& frame) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    mix(static_cast<std::uint64_t>(frame.width));
    mix(static_cast<std::uint64_t>(frame.height));
    for (const std::uint8_t p : frame.pixels) {
        h ^= p;
        h *= 1099511628211ULL;
    }
    return h;
}

void export_pgm(const std::vector<RasterFrame>& frames, const std::string& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06zu.pgm", i);
        auto out = open_output((fs::path(dir) / name).string());
        out << "P5\n" << frames[i].width << ' ' << frames[i].height << "\n255\n";
        for (const std::uint8_t p : frames[i].pixels)
            out.put(p ? '\0' : static_cast<char>(0xff));  // dark lines on light background
        if (!out) throw DataError("write failed: " + std::string(name));
    }
}

void export_svg(const std::vector<Landmarks2D>& frames, const Topology& topo, int width, int height,
                const std::string& path) {
    auto out = open_output(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    for (std::size_t i = 0; i < frames.size(); ++i) {
        out << "  <g id=\"frame_" << i << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\">\n";
        for (const auto& [a, b] : topo.edges)
            out << "    <polyline points=\"" << g17(frames[i](a, 0)) << ',' << g17(frames[i](a, 1))
                << ' ' << g17(frames[i](b, 0)) << ',' << g17(frames[i](b, 1)) << "\"/>\n";
        out << "  </g>\n";
    }
    out << "</svg>\n";
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace dyadgen
