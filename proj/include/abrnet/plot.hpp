#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abrnet/common.hpp"

namespace abrnet::plot {

/// Plain RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> rgb; // 3 * width * height, row-major

    Image(int w, int h, unsigned char fill = 255)
        : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h, fill) {}

    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
};

/// Minimal PNG emission (single IDAT, zlib-compressed, filter 0 rows).
void write_png(const Image& image, const std::string& path);

struct Series {
    std::string name;
    std::vector<double> values; // NaN entries are skipped
};

/// Line chart of one or more series over their index, with axes and numeric
/// range annotations.
Image line_plot(const std::vector<Series>& series, int width = 900, int height = 480);

/// Cell heatmap; cells with mask == 0 are drawn gray (empty).
Image heatmap(const Eigen::MatrixXd& values, const Eigen::MatrixXi& mask,
              int cell_pixels = 18);

} // namespace abrnet::plot
