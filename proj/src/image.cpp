#include "wf/image.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace wf {

GrayImage to_gray(const ColorImage& c) {
    GrayImage g(c.width, c.height);
    for (size_t i = 0; i < c.data.size(); ++i) {
        const Vec3f& p = c.data[i];
        g.data[i] = (0.299f * p.x() + 0.587f * p.y() + 0.114f * p.z()) / 255.0f;
    }
    return g;
}

namespace {

void skip_ws_and_comments(std::istream& is) {
    for (;;) {
        int ch = is.peek();
        if (ch == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(ch)) {
            is.get();
        } else {
            break;
        }
    }
}

struct PnmHeader {
    std::string magic;
    int width, height, maxval;
};

PnmHeader read_pnm_header(std::istream& is) {
    PnmHeader h;
    is >> h.magic;
    skip_ws_and_comments(is);
    is >> h.width;
    skip_ws_and_comments(is);
    is >> h.height;
    skip_ws_and_comments(is);
    is >> h.maxval;
    is.get();  // single whitespace before raster
    return h;
}

}  // namespace

void save_depth_pgm(const DepthImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<uint8_t> row(size_t(img.width) * 2);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double mm = img.at(x, y) * 1000.0;
            uint16_t v = static_cast<uint16_t>(std::clamp(std::lround(mm), 0l, 65535l));
            row[2 * x] = static_cast<uint8_t>(v >> 8);  // PGM is big-endian
            row[2 * x + 1] = static_cast<uint8_t>(v & 0xff);
        }
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

DepthImage load_depth_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    PnmHeader h = read_pnm_header(is);
    if (h.magic != "P5" || h.maxval != 65535)
        throw std::runtime_error("expected 16-bit binary PGM: " + path);
    DepthImage img(h.width, h.height);
    std::vector<uint8_t> row(size_t(h.width) * 2);
    for (int y = 0; y < h.height; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), row.size());
        for (int x = 0; x < h.width; ++x) {
            uint16_t v = static_cast<uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
            img.at(x, y) = v / 1000.0f;
        }
    }
    if (!is) throw std::runtime_error("truncated PGM: " + path);
    return img;
}

void save_color_ppm(const ColorImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Vec3f& c = img.at(x, y);
            for (int k = 0; k < 3; ++k)
                row[3 * x + k] =
                    static_cast<uint8_t>(std::clamp(std::lround(c[k]), 0l, 255l));
        }
        os.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

ColorImage load_color_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    PnmHeader h = read_pnm_header(is);
    if (h.magic != "P6" || h.maxval != 255)
        throw std::runtime_error("expected binary PPM: " + path);
    ColorImage img(h.width, h.height);
    std::vector<uint8_t> row(size_t(h.width) * 3);
    for (int y = 0; y < h.height; ++y) {
        is.read(reinterpret_cast<char*>(row.data()), row.size());
        for (int x = 0; x < h.width; ++x)
            img.at(x, y) = Vec3f(row[3 * x], row[3 * x + 1], row[3 * x + 2]);
    }
    if (!is) throw std::runtime_error("truncated PPM: " + path);
    return img;
}

}  // namespace wf
