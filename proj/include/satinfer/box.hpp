#pragma once

#include <algorithm>
#include <compare>

namespace satinfer {

// Axis-aligned box in pixel coordinates, x to the right, y down.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    bool valid() const { return x_min < x_max && y_min < y_max; }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return valid() ? width() * height() : 0.0; }

    auto operator<=>(const Box&) const = default;
};

inline Box intersect(const Box& a, const Box& b) {
    return {std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min), std::min(a.x_max, b.x_max),
            std::min(a.y_max, b.y_max)};
}

// Integer pixel rectangle (origin + extent).
struct PixelRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    long long area() const { return static_cast<long long>(width) * height; }
    Box as_box() const {
        return {static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + width),
                static_cast<double>(y + height)};
    }
    bool operator==(const PixelRect&) const = default;
};

}  // namespace satinfer
