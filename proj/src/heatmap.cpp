#include "tutor/heatmap.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace tutor::motion {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_heatmap_png(const std::string& path, const std::vector<std::vector<double>>& values,
                       const std::vector<std::string>& labels, int cell_px) {
    (void)labels;
    if (values.empty() || values[0].empty()) throw std::invalid_argument("write_heatmap_png: empty matrix");
    const int rows = static_cast<int>(values.size());
    const int cols = static_cast<int>(values[0].size());

    double lo = values[0][0], hi = values[0][0];
    for (const auto& r : values)
        for (double v : r) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const double span = hi > lo ? hi - lo : 1.0;

    const int w = cols * cell_px, h = rows * cell_px;
    // filtered RGB scanlines (filter byte 0 per row)
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (1 + 3 * static_cast<std::size_t>(w)));
    for (int y = 0; y < h; ++y) {
        std::uint8_t* line = raw.data() + static_cast<std::size_t>(y) * (1 + 3 * static_cast<std::size_t>(w));
        line[0] = 0;
        for (int x = 0; x < w; ++x) {
            const double v = values[static_cast<std::size_t>(y / cell_px)][static_cast<std::size_t>(x / cell_px)];
            const double t = (v - lo) / span;  // 0 -> blue, 1 -> red
            line[1 + 3 * x + 0] = static_cast<std::uint8_t>(255.0 * t);
            line[1 + 3 * x + 1] = static_cast<std::uint8_t>(64.0 * (1.0 - std::abs(2.0 * t - 1.0)));
            line[1 + 3 * x + 2] = static_cast<std::uint8_t>(255.0 * (1.0 - t));
        }
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_heatmap_png: deflate failed");
    comp.resize(comp_len);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(w));
    put_u32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", comp);
    put_chunk(png, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_heatmap_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
}

}  // namespace tutor::motion
