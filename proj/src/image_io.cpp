#include "peva/image_io.hpp"

#include <cmath>
#include <fstream>

namespace peva {

void write_ppm(const std::string& path, const world::Frame& frame) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "P6\n" << frame.width << " " << frame.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
    if (!f) throw DataError("write failed: " + path);
}

world::Frame read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw DataError("not a P6 ppm: " + path);
    int w, h, maxv;
    f >> w >> h >> maxv;
    if (!f || w <= 0 || h <= 0 || maxv != 255) throw DataError("bad ppm header: " + path);
    f.get();  // single whitespace after header
    world::Frame frame;
    frame.width = w;
    frame.height = h;
    frame.rgb.resize(static_cast<size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(frame.rgb.data()),
           static_cast<std::streamsize>(frame.rgb.size()));
    if (!f) throw DataError("ppm truncated: " + path);
    return frame;
}

double psnr(const world::Frame& a, const world::Frame& b) {
    PEVA_CHECK(a.width == b.width && a.height == b.height, "psnr needs matching resolutions");
    double se = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) {
        double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
        se += d * d;
    }
    double mse = se / static_cast<double>(a.rgb.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double mean_abs_diff(const world::Frame& a, const world::Frame& b) {
    PEVA_CHECK(a.rgb.size() == b.rgb.size(), "size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i)
        acc += std::abs(static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]));
    return acc / static_cast<double>(a.rgb.size());
}

}  // namespace peva
