#include "stitch/warpmask.hpp"

#include <algorithm>
#include <cmath>

namespace stitch {

namespace {

struct SampleTaps {
    int x0, y0;
    double fx, fy;
    bool any;  // does any tap fall inside the source?
};

inline SampleTaps taps_for(double sx, double sy, int w, int h) {
    SampleTaps t;
    t.x0 = static_cast<int>(std::floor(sx));
    t.y0 = static_cast<int>(std::floor(sy));
    t.fx = sx - t.x0;
    t.fy = sy - t.y0;
    t.any = (t.x0 >= -1 && t.x0 <= w - 1 && t.y0 >= -1 && t.y0 <= h - 1);
    return t;
}

}  // namespace

Tensor4 warp_image(const Tensor4& image, const Homography& h, const CanvasSpec& canvas) {
    if (!image.all_finite()) throw std::invalid_argument("warp_image: non-finite image");
    const Homography hinv = h.inverse();  // throws NumericError when singular
    const int B = image.shape.b, C = image.shape.c;
    const int H = image.shape.h, W = image.shape.w;
    Tensor4 out(B, C, canvas.height, canvas.width);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < canvas.height; ++y) {
        for (int x = 0; x < canvas.width; ++x) {
            const double cx = x - canvas.origin_shift.x;
            const double cy = y - canvas.origin_shift.y;
            const double xw = hinv.m[0][0] * cx + hinv.m[0][1] * cy + hinv.m[0][2];
            const double yw = hinv.m[1][0] * cx + hinv.m[1][1] * cy + hinv.m[1][2];
            const double d = hinv.m[2][0] * cx + hinv.m[2][1] * cy + hinv.m[2][2];
            if (std::abs(d) <= 1e-12) continue;  // behind the horizon: leave 0
            const SampleTaps t = taps_for(xw / d, yw / d, W, H);
            if (!t.any) continue;
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    auto tap = [&](int yy, int xx) -> double {
                        if (xx < 0 || xx >= W || yy < 0 || yy >= H) return 0.0;
                        return image.at(b, c, yy, xx);
                    };
                    out.at(b, c, y, x) =
                        (1 - t.fy) * ((1 - t.fx) * tap(t.y0, t.x0) + t.fx * tap(t.y0, t.x0 + 1)) +
                        t.fy * ((1 - t.fx) * tap(t.y0 + 1, t.x0) + t.fx * tap(t.y0 + 1, t.x0 + 1));
                }
        }
    }
    return out;
}

Tensor4 warp_image_backward_input(const Tensor4& gout, const Homography& h,
                                  const CanvasSpec& canvas, Shape4 in_shape) {
    const Homography hinv = h.inverse();
    Tensor4 gin(in_shape);
    const int W = in_shape.w, H = in_shape.h;
    // scatter: serial to keep accumulation deterministic
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            const double cx = x - canvas.origin_shift.x;
            const double cy = y - canvas.origin_shift.y;
            const double xw = hinv.m[0][0] * cx + hinv.m[0][1] * cy + hinv.m[0][2];
            const double yw = hinv.m[1][0] * cx + hinv.m[1][1] * cy + hinv.m[1][2];
            const double d = hinv.m[2][0] * cx + hinv.m[2][1] * cy + hinv.m[2][2];
            if (std::abs(d) <= 1e-12) continue;
            const SampleTaps t = taps_for(xw / d, yw / d, W, H);
            if (!t.any) continue;
            for (int b = 0; b < in_shape.b; ++b)
                for (int c = 0; c < in_shape.c; ++c) {
                    const double g = gout.at(b, c, y, x);
                    if (g == 0.0) continue;
                    auto put = [&](int yy, int xx, double wgt) {
                        if (xx < 0 || xx >= W || yy < 0 || yy >= H) return;
                        gin.at(b, c, yy, xx) += wgt * g;
                    };
                    put(t.y0, t.x0, (1 - t.fy) * (1 - t.fx));
                    put(t.y0, t.x0 + 1, (1 - t.fy) * t.fx);
                    put(t.y0 + 1, t.x0, t.fy * (1 - t.fx));
                    put(t.y0 + 1, t.x0 + 1, t.fy * t.fx);
                }
        }
    return gin;
}

Tensor4 content_mask(const Homography& h, const CanvasSpec& canvas, int img_w, int img_h) {
    Tensor4 ones(1, 1, img_h, img_w, 1.0);
    Tensor4 m = warp_image(ones, h, canvas);
    for (double& v : m.data) v = std::clamp(v, 0.0, 1.0);
    return m;
}

Tensor4 mask_gradient(const Tensor4& m) {
    if (m.shape.c != 1) throw std::invalid_argument("mask_gradient: single-channel mask expected");
    Tensor4 g(m.shape);
    for (int b = 0; b < m.shape.b; ++b)
        for (int y = 0; y < m.shape.h; ++y)
            for (int x = 0; x < m.shape.w; ++x) {
                const double v = m.at(b, 0, y, x);
                const double up = y > 0 ? m.at(b, 0, y - 1, x) : 0.0;
                const double left = x > 0 ? m.at(b, 0, y, x - 1) : 0.0;
                g.at(b, 0, y, x) = std::abs(v - up) + std::abs(v - left);
            }
    return g;
}

namespace {

// 3x3 all-one convolution with zero padding, unnormalized.
Tensor4 box3_sum(const Tensor4& m) {
    Tensor4 out(m.shape);
    const int H = m.shape.h, W = m.shape.w;
    for (int b = 0; b < m.shape.b; ++b)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= H) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= W) continue;
                        s += m.at(b, 0, yy, xx);
                    }
                }
                out.at(b, 0, y, x) = s;
            }
    return out;
}

}  // namespace

std::pair<Tensor4, Tensor4> seam_masks(const Tensor4& content_a, const Tensor4& content_b) {
    require_same_shape(content_a, content_b, "seam_masks");
    auto band_of = [](const Tensor4& opposite) {
        Tensor4 band = box3_sum(box3_sum(box3_sum(mask_gradient(opposite))));
        for (double& v : band.data) v = std::clamp(v, 0.0, 1.0);
        return band;
    };
    Tensor4 seam_a = band_of(content_b);
    Tensor4 seam_b = band_of(content_a);
    for (std::size_t i = 0; i < seam_a.data.size(); ++i) {
        seam_a.data[i] *= content_a.data[i];
        seam_b.data[i] *= content_b.data[i];
    }
    return {std::move(seam_a), std::move(seam_b)};
}

double overlap_rate(const Tensor4& content_a, const Tensor4& content_b) {
    require_same_shape(content_a, content_b, "overlap_rate");
    double inter = 0.0, area = 0.0;
    for (std::size_t i = 0; i < content_a.data.size(); ++i) {
        inter += content_a.data[i] * content_b.data[i];
        area += content_a.data[i];
    }
    if (area <= 0.0) throw NumericError("overlap_rate: reference mask has zero area");
    return inter / area;
}

MaskSet build_mask_set(const Homography& h_a, const Homography& h_b,
                       const CanvasSpec& canvas, int img_w, int img_h) {
    MaskSet ms;
    ms.content_a = content_mask(h_a, canvas, img_w, img_h);
    ms.content_b = content_mask(h_b, canvas, img_w, img_h);
    auto [sa, sb] = seam_masks(ms.content_a, ms.content_b);
    ms.seam_a = std::move(sa);
    ms.seam_b = std::move(sb);
    return ms;
}

}  // namespace stitch
