#pragma once

// Shared fixtures for the test suites. Everything here is deliberately naive
// and independent of the library kernels so it can serve as an oracle.

#include <algorithm>
#include <cmath>
#include <vector>

#include "stitch/geometry.hpp"
#include "stitch/rng.hpp"
#include "stitch/tensor.hpp"

namespace testutil {

inline stitch::Tensor4 random_tensor(int b, int c, int h, int w, stitch::Rng& rng,
                                     double lo = -1.0, double hi = 1.0) {
    stitch::Tensor4 t(b, c, h, w);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Band-limited image (sum of random sinusoids), values in [0,1]. Smooth
// enough that photometric alignment has a wide basin of attraction.
inline stitch::Tensor4 smooth_image(int w, int h, int c, std::uint64_t seed) {
    stitch::Rng rng(seed, 0x534D4F4F5448ULL);
    stitch::Tensor4 img(1, c, h, w);
    for (int ch = 0; ch < c; ++ch) {
        struct Wave { double a, fx, fy, p; };
        std::vector<Wave> waves(6);
        for (auto& wv : waves)
            wv = {rng.uniform(-1, 1), rng.uniform(0.01, 0.09), rng.uniform(0.01, 0.09),
                  rng.uniform(0.0, 6.283185307179586)};
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = 0.0;
                for (const auto& wv : waves) v += wv.a * std::sin(wv.fx * x + wv.fy * y + wv.p);
                img.at(0, ch, y, x) = std::clamp(0.5 + 0.22 * v, 0.0, 1.0);
            }
    }
    return img;
}

inline double naive_bilinear(const stitch::Tensor4& img, int c, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto tap = [&](int yy, int xx) -> double {
        if (xx < 0 || yy < 0 || xx >= img.shape.w || yy >= img.shape.h) return 0.0;
        return img.at(0, c, yy, xx);
    };
    return (1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
           fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
}

// Test-side synthetic pair: the reference is the central crop of `source`,
// the target is rendered so that warping it by solve_dlt(truth) reproduces
// the reference (same convention the library generator promises).
struct SynthPair {
    stitch::Tensor4 ref;
    stitch::Tensor4 target;
};

inline SynthPair render_pair(const stitch::Tensor4& source, int crop,
                             const stitch::FourPointOffsets& truth) {
    const int ox = (source.shape.w - crop) / 2;
    const int oy = (source.shape.h - crop) / 2;
    SynthPair p{stitch::Tensor4(1, source.shape.c, crop, crop),
                stitch::Tensor4(1, source.shape.c, crop, crop)};
    for (int c = 0; c < source.shape.c; ++c)
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x)
                p.ref.at(0, c, y, x) = source.at(0, c, oy + y, ox + x);
    const stitch::Homography h = stitch::solve_dlt(truth, crop, crop);
    for (int y = 0; y < crop; ++y)
        for (int x = 0; x < crop; ++x) {
            const stitch::Vec2 q =
                stitch::warp_point(h, {static_cast<double>(x), static_cast<double>(y)});
            for (int c = 0; c < source.shape.c; ++c)
                p.target.at(0, c, y, x) = naive_bilinear(source, c, ox + q.x, oy + q.y);
        }
    return p;
}

inline stitch::FourPointOffsets random_offsets(stitch::Rng& rng, double disturbance) {
    stitch::FourPointOffsets o;
    for (auto& v : o.d) {
        v.x = rng.uniform(-disturbance, disturbance);
        v.y = rng.uniform(-disturbance, disturbance);
    }
    return o;
}

inline bool bitwise_equal(const stitch::Tensor4& a, const stitch::Tensor4& b) {
    if (!(a.shape == b.shape)) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

inline double max_abs_diff(const stitch::Tensor4& a, const stitch::Tensor4& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace testutil
