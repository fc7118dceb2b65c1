#include "abrnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

namespace abrnet::plot {

namespace {

void write_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void write_chunk(std::ofstream& out, const char type[4],
                 const std::vector<unsigned char>& data) {
    std::vector<unsigned char> head;
    write_be32(head, static_cast<std::uint32_t>(data.size()));
    out.write(reinterpret_cast<const char*>(head.data()), 4);
    out.write(type, 4);
    if (!data.empty()) {
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
    }
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) {
        crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    }
    std::vector<unsigned char> tail;
    write_be32(tail, crc);
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

// 4x6 glyphs for numeric annotations.
const char* glyph(char c) {
    switch (c) {
        case '0': return "0110"  "1001"  "1001"  "1001"  "1001"  "0110";
        case '1': return "0010"  "0110"  "0010"  "0010"  "0010"  "0111";
        case '2': return "0110"  "1001"  "0001"  "0010"  "0100"  "1111";
        case '3': return "1110"  "0001"  "0110"  "0001"  "0001"  "1110";
        case '4': return "1001"  "1001"  "1111"  "0001"  "0001"  "0001";
        case '5': return "1111"  "1000"  "1110"  "0001"  "0001"  "1110";
        case '6': return "0110"  "1000"  "1110"  "1001"  "1001"  "0110";
        case '7': return "1111"  "0001"  "0010"  "0010"  "0100"  "0100";
        case '8': return "0110"  "1001"  "0110"  "1001"  "1001"  "0110";
        case '9': return "0110"  "1001"  "1001"  "0111"  "0001"  "0110";
        case '.': return "0000"  "0000"  "0000"  "0000"  "0000"  "0100";
        case '-': return "0000"  "0000"  "1111"  "0000"  "0000"  "0000";
        case '+': return "0000"  "0100"  "1110"  "0100"  "0000"  "0000";
        case 'e': return "0000"  "0110"  "1001"  "1110"  "1000"  "0111";
        default: return nullptr;
    }
}

void draw_text(Image& img, int x, int y, const std::string& text, unsigned char r,
               unsigned char g, unsigned char b) {
    for (char c : text) {
        const char* bits = glyph(c);
        if (bits) {
            for (int gy = 0; gy < 6; ++gy) {
                for (int gx = 0; gx < 4; ++gx) {
                    if (bits[gy * 4 + gx] == '1') img.set(x + gx, y + gy, r, g, b);
                }
            }
        }
        x += 5;
    }
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

void draw_line(Image& img, int x0, int y0, int x1, int y1, unsigned char r,
               unsigned char g, unsigned char b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.set(x0, y0, r, g, b);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

struct Rgb {
    unsigned char r, g, b;
};

constexpr Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                            {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};

} // namespace

void write_png(const Image& image, const std::string& path) {
    if (image.width < 1 || image.height < 1) {
        throw ContractViolation("write_png: empty image");
    }
    // Raw stream: filter byte 0 + row data.
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(image.height) * (1 + 3 * image.width));
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        const std::size_t offset = 3 * static_cast<std::size_t>(y) * image.width;
        raw.insert(raw.end(), image.rgb.begin() + static_cast<long>(offset),
                   image.rgb.begin() + static_cast<long>(offset + 3 * image.width));
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  6) != Z_OK) {
        throw IoError("write_png: deflate failed");
    }
    compressed.resize(bound);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const unsigned char signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(signature), 8);

    std::vector<unsigned char> ihdr;
    write_be32(ihdr, static_cast<std::uint32_t>(image.width));
    write_be32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // truecolor
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    write_chunk(out, "IHDR", ihdr);
    write_chunk(out, "IDAT", compressed);
    write_chunk(out, "IEND", {});
    if (!out) throw IoError("failed writing PNG to '" + path + "'");
}

Image line_plot(const std::vector<Series>& series, int width, int height) {
    Image img(width, height);
    const int left = 52, right = 12, top = 12, bottom = 24;
    const int x0 = left, x1 = width - right, y0 = top, y1 = height - bottom;

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t longest = 1;
    for (const Series& s : series) {
        longest = std::max(longest, s.values.size());
        for (double v : s.values) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
    }

    // Frame.
    draw_line(img, x0, y0, x0, y1, 60, 60, 60);
    draw_line(img, x0, y1, x1, y1, 60, 60, 60);
    draw_text(img, 4, y0 - 3, format_value(hi), 60, 60, 60);
    draw_text(img, 4, y1 - 3, format_value(lo), 60, 60, 60);
    draw_text(img, x1 - 5 * static_cast<int>(format_value(double(longest - 1)).size()),
              y1 + 8, format_value(double(longest - 1)), 60, 60, 60);

    auto map_x = [&](std::size_t i) {
        return x0 + static_cast<int>((x1 - x0) * (longest > 1 ? double(i) / (longest - 1) : 0.5));
    };
    auto map_y = [&](double v) {
        return y1 - static_cast<int>((y1 - y0) * (v - lo) / (hi - lo));
    };

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Rgb c = kPalette[si % std::size(kPalette)];
        bool have_prev = false;
        int px = 0, py = 0;
        for (std::size_t i = 0; i < series[si].values.size(); ++i) {
            const double v = series[si].values[i];
            if (!std::isfinite(v)) {
                have_prev = false;
                continue;
            }
            const int x = map_x(i), y = map_y(v);
            if (have_prev) draw_line(img, px, py, x, y, c.r, c.g, c.b);
            px = x;
            py = y;
            have_prev = true;
        }
        // Legend swatch.
        const int lx = x0 + 8 + static_cast<int>(si) * 18;
        for (int dy = 0; dy < 8; ++dy) {
            for (int dx = 0; dx < 12; ++dx) img.set(lx + dx, y0 + 4 + dy, c.r, c.g, c.b);
        }
    }
    return img;
}

Image heatmap(const Eigen::MatrixXd& values, const Eigen::MatrixXi& mask, int cell_pixels) {
    if (values.rows() != mask.rows() || values.cols() != mask.cols()) {
        throw ContractViolation("heatmap: value/mask shape mismatch");
    }
    const int margin = 14;
    const int w = static_cast<int>(values.cols()) * cell_pixels + 2 * margin;
    const int h = static_cast<int>(values.rows()) * cell_pixels + 2 * margin + 10;
    Image img(w, h);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (mask(r, c) > 0) {
                lo = std::min(lo, values(r, c));
                hi = std::max(hi, values(r, c));
            }
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;

    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            unsigned char cr = 210, cg = 210, cb = 210; // empty cell
            if (mask(r, c) > 0) {
                const double t = (values(r, c) - lo) / (hi - lo);
                // blue -> yellow -> red
                if (t < 0.5) {
                    const double u = t / 0.5;
                    cr = static_cast<unsigned char>(40 + u * (250 - 40));
                    cg = static_cast<unsigned char>(80 + u * (220 - 80));
                    cb = static_cast<unsigned char>(200 - u * 160);
                } else {
                    const double u = (t - 0.5) / 0.5;
                    cr = static_cast<unsigned char>(250);
                    cg = static_cast<unsigned char>(220 - u * 180);
                    cb = static_cast<unsigned char>(40);
                }
            }
            // Row 0 (y = 0 in floor coordinates) is drawn at the bottom.
            const int py = margin +
                           static_cast<int>(values.rows() - 1 - r) * cell_pixels;
            const int px = margin + static_cast<int>(c) * cell_pixels;
            for (int dy = 0; dy < cell_pixels - 1; ++dy) {
                for (int dx = 0; dx < cell_pixels - 1; ++dx) {
                    img.set(px + dx, py + dy, cr, cg, cb);
                }
            }
        }
    }
    draw_text(img, margin, h - 10, format_value(lo), 60, 60, 60);
    const std::string hi_text = format_value(hi);
    draw_text(img, w - margin - 5 * static_cast<int>(hi_text.size()), h - 10, hi_text, 60,
              60, 60);
    return img;
}

} // namespace abrnet::plot
