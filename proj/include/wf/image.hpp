#pragma once

#include <string>
#include <vector>

#include "wf/core.hpp"

namespace wf {

template <class T>
struct Image {
    int width = 0, height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, const T& fill = T{}) : width(w), height(h), data(size_t(w) * h, fill) {}

    T& at(int x, int y) { return data[size_t(y) * width + x]; }
    const T& at(int x, int y) const { return data[size_t(y) * width + x]; }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
    bool empty() const { return data.empty(); }
};

using DepthImage = Image<float>;   // meters, 0 = invalid
using GrayImage = Image<float>;    // [0,1]
using ColorImage = Image<Vec3f>;   // RGB in [0,255]

/// One RGB-D input frame.
struct Frame {
    DepthImage depth;
    ColorImage color;
    Intrinsics intrinsics;
};

// ITU-R 601 luma, result in [0,1]
GrayImage to_gray(const ColorImage& c);

// depth: 16-bit binary PGM, millimeters, 0 = invalid
void save_depth_pgm(const DepthImage& img, const std::string& path);
DepthImage load_depth_pgm(const std::string& path);

// color: binary PPM
void save_color_ppm(const ColorImage& img, const std::string& path);
ColorImage load_color_ppm(const std::string& path);

}  // namespace wf
