#include "stitch/geometry.hpp"

#include <algorithm>
#include <limits>
#include <cmath>

namespace stitch {

std::array<Vec2, 4> image_corners(int w, int h) {
    const double W = static_cast<double>(w), H = static_cast<double>(h);
    return {Vec2{0, 0}, Vec2{W, 0}, Vec2{0, H}, Vec2{W, H}};
}

namespace {

// Solve A x = b for an 8x8 system in place; throws on singular/ill-conditioned
// systems (pivot ratio beyond 1e12).
std::array<double, 8> solve8(std::array<std::array<double, 9>, 8>& a) {
    double max_pivot = 0.0, min_pivot = std::numeric_limits<double>::infinity();
    for (int col = 0; col < 8; ++col) {
        int piv = col;
        for (int r = col + 1; r < 8; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        const double p = std::abs(a[col][col]);
        max_pivot = std::max(max_pivot, p);
        min_pivot = std::min(min_pivot, p);
        if (p == 0.0 || max_pivot / p > 1e12)
            throw NumericError("solve_dlt: degenerate corner configuration");
        for (int r = col + 1; r < 8; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 9; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::array<double, 8> x{};
    for (int r = 7; r >= 0; --r) {
        double s = a[r][8];
        for (int c = r + 1; c < 8; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

}  // namespace

Homography solve_dlt(const FourPointOffsets& offsets, int w, int h) {
    if (!offsets.all_finite()) throw std::invalid_argument("solve_dlt: non-finite offsets");
    if (w < 2 || h < 2) throw std::invalid_argument("solve_dlt: image too small");

    const auto src = image_corners(w, h);
    std::array<std::array<double, 9>, 8> a{};
    for (int k = 0; k < 4; ++k) {
        const double x = src[k].x, y = src[k].y;
        const double u = x + offsets.d[k].x, v = y + offsets.d[k].y;
        a[2 * k] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
        a[2 * k + 1] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
    }
    const auto s = solve8(a);
    Homography H;
    H.m = {{{s[0], s[1], s[2]}, {s[3], s[4], s[5]}, {s[6], s[7], 1.0}}};
    if (H.det() == 0.0) throw NumericError("solve_dlt: singular homography");
    return H;
}

double Homography::det() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Homography Homography::inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d))
        throw NumericError("Homography: singular matrix has no inverse");
    Homography r;
    r.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
    r.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
    r.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
    r.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
    r.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
    r.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
    r.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
    r.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
    r.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
    return r;
}

Homography Homography::compose(const Homography& rhs) const {
    Homography r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[i][k] * rhs.m[k][j];
            r.m[i][j] = s;
        }
    // keep the m22 == 1 normalization when possible
    if (r.m[2][2] != 0.0 && std::isfinite(r.m[2][2])) {
        const double z = r.m[2][2];
        for (auto& row : r.m)
            for (auto& v : row) v /= z;
    }
    return r;
}

Vec2 warp_point(const Homography& h, Vec2 p) {
    const double xw = h.m[0][0] * p.x + h.m[0][1] * p.y + h.m[0][2];
    const double yw = h.m[1][0] * p.x + h.m[1][1] * p.y + h.m[1][2];
    const double d = h.m[2][0] * p.x + h.m[2][1] * p.y + h.m[2][2];
    if (std::abs(d) <= 1e-12)
        throw NumericError("warp_point: point maps to the line at infinity");
    return {xw / d, yw / d};
}

std::vector<Vec2> warp_points(const Homography& h, const std::vector<Vec2>& pts) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const Vec2& p : pts) out.push_back(warp_point(h, p));
    return out;
}

CanvasSpec canvas_extent(const FourPointOffsets& offsets, int w, int h) {
    if (!offsets.all_finite())
        throw std::invalid_argument("canvas_extent: non-finite offsets");
    const auto ref = image_corners(w, h);
    double minx = 0, maxx = 0, miny = 0, maxy = 0;
    bool first = true;
    auto take = [&](Vec2 p) {
        if (first) {
            minx = maxx = p.x;
            miny = maxy = p.y;
            first = false;
        } else {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
    };
    for (int k = 0; k < 4; ++k) {
        take(ref[k]);
        take({ref[k].x + offsets.d[k].x, ref[k].y + offsets.d[k].y});
    }
    CanvasSpec spec;
    spec.width = static_cast<int>(std::ceil(maxx - minx));
    spec.height = static_cast<int>(std::ceil(maxy - miny));
    spec.origin_shift = {-minx, -miny};
    return spec;
}

}  // namespace stitch
