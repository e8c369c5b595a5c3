#pragma once

#include <array>
#include <vector>

#include "stitch/tensor.hpp"

namespace stitch {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

// Corner displacements (dx, dy) in pixels, ordered TL, TR, BL, BR.
struct FourPointOffsets {
    std::array<Vec2, 4> d{};

    bool all_finite() const {
        for (const auto& v : d)
            if (!std::isfinite(v.x) || !std::isfinite(v.y)) return false;
        return true;
    }
};

// 3x3 projective transform, normalized so m[2][2] == 1.
struct Homography {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static Homography identity() { return {}; }
    Homography inverse() const;
    Homography compose(const Homography& rhs) const;  // this * rhs
    double det() const;
};

struct CanvasSpec {
    int width = 0;   // W*
    int height = 0;  // H*
    Vec2 origin_shift{};  // added to source-frame coords to get canvas coords

    bool operator==(const CanvasSpec&) const = default;
};

// Image-domain corners for a w x h image: (0,0), (w,0), (0,h), (w,h),
// ordered TL, TR, BL, BR to match FourPointOffsets.
std::array<Vec2, 4> image_corners(int w, int h);

// Solves the 3x3 homography mapping each corner to corner + offset via the
// 8x8 DLT system (Gaussian elimination with partial pivoting). Throws
// NumericError when the displaced quad is degenerate.
Homography solve_dlt(const FourPointOffsets& offsets, int w, int h);

// Projective application; throws NumericError if a point maps to infinity.
std::vector<Vec2> warp_points(const Homography& h, const std::vector<Vec2>& pts);
Vec2 warp_point(const Homography& h, Vec2 p);

// Minimal stitching-domain canvas holding the reference footprint and the
// warped target footprint; extents rounded up to whole pixels.
CanvasSpec canvas_extent(const FourPointOffsets& offsets, int w, int h);

}  // namespace stitch
