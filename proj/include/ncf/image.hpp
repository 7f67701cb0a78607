#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/data.hpp"

namespace ncf {

/// RGB image with channels kept as doubles in [0,1]; pixel (x,y) row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;  // 3 * width * height

    double* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const double* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

namespace detail {

inline int ppm_token(std::istream& in) {
    // skips whitespace and '#' comments between header fields
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("ppm: truncated header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("ppm: malformed header field");
    return value;
}

}  // namespace detail

/// Binary P6 loader, maxval 255. Channel v maps to v/255.
inline Image load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("ppm: not a P6 file: " + path);
    Image img;
    img.width = detail::ppm_token(f);
    img.height = detail::ppm_token(f);
    const int maxval = detail::ppm_token(f);
    if (img.width <= 0 || img.height <= 0) throw std::runtime_error("ppm: bad dimensions");
    if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 supported");
    // the single whitespace byte after maxval was already consumed by ppm_token

    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
    std::vector<unsigned char> raw(n);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f.gcount()) != n) throw std::runtime_error("ppm: truncated pixel data");
    img.rgb.resize(n);
    for (std::size_t i = 0; i < n; ++i) img.rgb[i] = raw[i] / 255.0;
    return img;
}

/// Canonical P6 writer: "P6\n<w> <h>\n255\n" + bytes, channels rounded.
inline void save_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
    std::vector<unsigned char> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = img.rgb[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("write failed: " + path);
}

/// Flattens an image into a 3-D point cloud of its pixel colors (row-major).
inline SampleSet image_to_cloud(const Image& img) {
    SampleSet s;
    s.dim = 3;
    s.norm = Normalization::identity(3);
    s.points = img.rgb;
    return s;
}

/// Rebuilds an image from a color cloud that is pixel-aligned with `shape`.
inline Image cloud_to_image(const SampleSet& cloud, int width, int height) {
    if (cloud.dim != 3 || cloud.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("cloud_to_image: size mismatch");
    Image img;
    img.width = width;
    img.height = height;
    img.rgb = cloud.points;
    return img;
}

}  // namespace ncf
