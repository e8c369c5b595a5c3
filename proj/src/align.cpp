#include "stitch/align.hpp"

#include <algorithm>
#include <cmath>

#include "stitch/kernels.hpp"

namespace stitch {

namespace {

// 8x8 LU with partial pivoting, reusable for multiple right-hand sides.
struct Lu8 {
    std::array<std::array<double, 8>, 8> a{};
    std::array<int, 8> perm{};

    explicit Lu8(const std::array<std::array<double, 8>, 8>& m) : a(m) {
        for (int i = 0; i < 8; ++i) perm[i] = i;
        for (int col = 0; col < 8; ++col) {
            int piv = col;
            for (int r = col + 1; r < 8; ++r)
                if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
            std::swap(a[piv], a[col]);
            std::swap(perm[piv], perm[col]);
            if (a[col][col] == 0.0)
                throw NumericError("align: singular DLT system");
            for (int r = col + 1; r < 8; ++r) {
                a[r][col] /= a[col][col];
                for (int c = col + 1; c < 8; ++c) a[r][c] -= a[r][col] * a[col][c];
            }
        }
    }

    std::array<double, 8> solve(const std::array<double, 8>& b) const {
        std::array<double, 8> x{};
        for (int i = 0; i < 8; ++i) x[i] = b[perm[i]];
        for (int i = 1; i < 8; ++i)
            for (int j = 0; j < i; ++j) x[i] -= a[i][j] * x[j];
        for (int i = 7; i >= 0; --i) {
            for (int j = i + 1; j < 8; ++j) x[i] -= a[i][j] * x[j];
            x[i] /= a[i][i];
        }
        return x;
    }
};

struct BilinearSample {
    double value = 0.0;
    double dx = 0.0, dy = 0.0;  // derivative with respect to the sample point
    double mask = 0.0;          // bilinear weight mass of in-range taps
    double mdx = 0.0, mdy = 0.0;
};

inline BilinearSample sample_with_grad(const Tensor4& img, double sx, double sy) {
    const int W = img.shape.w, H = img.shape.h;
    BilinearSample r;
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    if (x0 < -1 || x0 > W - 1 || y0 < -1 || y0 > H - 1) return r;
    const double fx = sx - x0, fy = sy - y0;
    auto tap = [&](int yy, int xx, double& v, double& m) {
        if (xx < 0 || xx >= W || yy < 0 || yy >= H) {
            v = 0.0;
            m = 0.0;
        } else {
            v = img.at(0, 0, yy, xx);
            m = 1.0;
        }
    };
    double v00, v01, v10, v11, m00, m01, m10, m11;
    tap(y0, x0, v00, m00);
    tap(y0, x0 + 1, v01, m01);
    tap(y0 + 1, x0, v10, m10);
    tap(y0 + 1, x0 + 1, v11, m11);
    r.value = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
    r.dx = (1 - fy) * (v01 - v00) + fy * (v11 - v10);
    r.dy = (1 - fx) * (v10 - v00) + fx * (v11 - v01);
    r.mask = (1 - fy) * ((1 - fx) * m00 + fx * m01) + fy * ((1 - fx) * m10 + fx * m11);
    r.mdx = (1 - fy) * (m01 - m00) + fy * (m11 - m10);
    r.mdy = (1 - fx) * (m10 - m00) + fx * (m11 - m01);
    return r;
}

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::array<std::array<double, 8>, 8> dlt_matrix(const std::array<Vec2, 4>& src,
                                                const FourPointOffsets& th) {
    std::array<std::array<double, 8>, 8> m{};
    for (int k = 0; k < 4; ++k) {
        const double x = src[k].x, y = src[k].y;
        const double u = x + th.d[k].x, v = y + th.d[k].y;
        m[2 * k] = {x, y, 1, 0, 0, 0, -u * x, -u * y};
        m[2 * k + 1] = {0, 0, 0, x, y, 1, -v * x, -v * y};
    }
    return m;
}

}  // namespace

Tensor4 to_luma(const Tensor4& rgb) {
    if (rgb.shape.c == 1) return rgb;
    if (rgb.shape.c != 3)
        throw std::invalid_argument("to_luma: expected 1 or 3 channels");
    Tensor4 out(rgb.shape.b, 1, rgb.shape.h, rgb.shape.w);
    for (int b = 0; b < rgb.shape.b; ++b)
        for (int y = 0; y < rgb.shape.h; ++y)
            for (int x = 0; x < rgb.shape.w; ++x)
                out.at(b, 0, y, x) = 0.299 * rgb.at(b, 0, y, x) +
                                     0.587 * rgb.at(b, 1, y, x) +
                                     0.114 * rgb.at(b, 2, y, x);
    return out;
}

AblationEval eval_ablation(const Tensor4& ref, const Tensor4& target,
                           const FourPointOffsets& th) {
    require_same_shape(ref, target, "eval_ablation");
    if (ref.shape.c != 1 || ref.shape.b != 1)
        throw std::invalid_argument("eval_ablation: expects (1,1,h,w) luma tensors");
    const int W = ref.shape.w, H = ref.shape.h;

    const Homography Hm = solve_dlt(th, W, H);
    const Homography G = Hm.inverse();

    AblationEval out;

    // pass 1: residual sum N and mask mass D
    double N = 0.0, D = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double dd = G.m[2][0] * x + G.m[2][1] * y + G.m[2][2];
            if (std::abs(dd) <= 1e-12) continue;
            const double sx = (G.m[0][0] * x + G.m[0][1] * y + G.m[0][2]) / dd;
            const double sy = (G.m[1][0] * x + G.m[1][1] * y + G.m[1][2]) / dd;
            const BilinearSample s = sample_with_grad(target, sx, sy);
            N += std::abs(s.mask * ref.at(0, 0, y, x) - s.value);
            D += s.mask;
        }
    out.overlap = D / static_cast<double>(W * H);
    if (D < 1.0) {
        out.degenerate = true;
        return out;
    }
    out.loss = N / D;

    // pass 2: accumulate dL/dG (3x3), using the now-known totals
    double J[3][3] = {};
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double dd = G.m[2][0] * x + G.m[2][1] * y + G.m[2][2];
            if (std::abs(dd) <= 1e-12) continue;
            const double sx = (G.m[0][0] * x + G.m[0][1] * y + G.m[0][2]) / dd;
            const double sy = (G.m[1][0] * x + G.m[1][1] * y + G.m[1][2]) / dd;
            const BilinearSample s = sample_with_grad(target, sx, sy);
            const double A = ref.at(0, 0, y, x);
            const double sg = sgn(s.mask * A - s.value);
            // dL = dN/D - (N/D^2) dD, per-pixel contributions through (sx,sy)
            const double wx = (sg * (A * s.mdx - s.dx)) / D - (N / (D * D)) * s.mdx;
            const double wy = (sg * (A * s.mdy - s.dy)) / D - (N / (D * D)) * s.mdy;
            if (wx == 0.0 && wy == 0.0) continue;
            const double p[3] = {static_cast<double>(x), static_cast<double>(y), 1.0};
            for (int j = 0; j < 3; ++j) {
                J[0][j] += wx * p[j] / dd;
                J[1][j] += wy * p[j] / dd;
                J[2][j] += -(wx * sx + wy * sy) * p[j] / dd;
            }
        }

    // chain to H: dG = -G dH G  =>  dL/dH = -(G^T J G^T)
    double K[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    acc += G.m[a][i] * J[a][b] * G.m[j][b];
            K[i][j] = -acc;
        }

    // chain to the 8 offsets through the DLT solve: M h = rhs
    const auto src = image_corners(W, H);
    const Lu8 lu(dlt_matrix(src, th));
    std::array<double, 8> h = {Hm.m[0][0], Hm.m[0][1], Hm.m[0][2], Hm.m[1][0],
                               Hm.m[1][1], Hm.m[1][2], Hm.m[2][0], Hm.m[2][1]};
    for (int k = 0; k < 4; ++k) {
        for (int comp = 0; comp < 2; ++comp) {
            // d(rhs)/dtheta - d(M)/dtheta * h for a unit change of u_k or v_k
            std::array<double, 8> t{};
            const int row = 2 * k + comp;
            t[row] = 1.0 + src[k].x * h[6] + src[k].y * h[7];
            const auto q = lu.solve(t);  // d h / d theta
            double g = 0.0;
            const int map[8][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 0},
                                   {1, 1}, {1, 2}, {2, 0}, {2, 1}};
            for (int e = 0; e < 8; ++e) g += K[map[e][0]][map[e][1]] * q[e];
            out.grad[2 * k + comp] = g;
        }
    }
    return out;
}

namespace {

FourPointOffsets clamp_offsets(FourPointOffsets th, double max_offset) {
    for (auto& v : th.d) {
        v.x = std::clamp(v.x, -max_offset, max_offset);
        v.y = std::clamp(v.y, -max_offset, max_offset);
    }
    return th;
}

Tensor4 downscale_half(const Tensor4& img) {
    Tensor4 out;
    kernels::resize_bilinear_forward(img, img.shape.h / 2, img.shape.w / 2, out);
    return out;
}

}  // namespace

FourPointOffsets estimate_offsets(const Tensor4& ref, const Tensor4& target,
                                  const PyramidConfig& cfg,
                                  std::vector<double>* loss_trace) {
    require_same_shape(ref, target, "estimate_offsets");
    if (ref.shape.h < 32 || ref.shape.w < 32)
        throw std::invalid_argument("estimate_offsets: images must be at least 32x32");
    if (!ref.all_finite() || !target.all_finite())
        throw std::invalid_argument("estimate_offsets: non-finite input");
    const int min_dim = std::min(ref.shape.h, ref.shape.w);
    if (cfg.levels < 1 ||
        cfg.levels > static_cast<int>(std::log2(static_cast<double>(min_dim))) - 2)
        throw std::invalid_argument("estimate_offsets: invalid pyramid level count");

    // luma pyramids, index 0 = finest
    std::vector<Tensor4> pyr_ref{to_luma(ref)}, pyr_tgt{to_luma(target)};
    for (int l = 1; l < cfg.levels; ++l) {
        pyr_ref.push_back(downscale_half(pyr_ref.back()));
        pyr_tgt.push_back(downscale_half(pyr_tgt.back()));
    }

    FourPointOffsets th{};  // at the current (coarsest-first) level scale
    for (int level = cfg.levels - 1; level >= 0; --level) {
        const Tensor4& R = pyr_ref[level];
        const Tensor4& T = pyr_tgt[level];
        const double max_off =
            (cfg.max_offset > 0.0 ? cfg.max_offset : 0.45 * ref.shape.w) /
            static_cast<double>(1 << level);

        double step = cfg.step_init;
        AblationEval cur = eval_ablation(R, T, th);
        int stall = 0;
        for (int it = 0; it < cfg.iterations_per_level && step >= cfg.min_step; ++it) {
            if (cur.degenerate) break;
            double gmax = 0.0;
            for (double g : cur.grad) gmax = std::max(gmax, std::abs(g));
            if (gmax == 0.0) break;
            const double alpha = step / gmax;

            FourPointOffsets cand = th;
            for (int k = 0; k < 4; ++k) {
                cand.d[k].x -= alpha * cur.grad[2 * k];
                cand.d[k].y -= alpha * cur.grad[2 * k + 1];
            }
            cand = clamp_offsets(cand, max_off);

            const AblationEval next = eval_ablation(R, T, cand);
            const bool ok = !next.degenerate && next.overlap >= cfg.min_overlap_rate &&
                            next.loss < cur.loss;
            if (ok) {
                const double rel = (cur.loss - next.loss) / std::max(cur.loss, 1e-300);
                th = cand;
                cur = next;
                if (loss_trace) loss_trace->push_back(cur.loss);
                stall = rel < cfg.plateau_rel_improvement ? stall + 1 : 0;
            } else {
                ++stall;
            }
            if (stall >= cfg.plateau_window) {
                step *= cfg.step_decay;
                stall = 0;
            } else if (!ok) {
                step *= 0.5;  // rejected step: back off immediately
            }
        }
        if (level > 0)
            for (auto& v : th.d) {
                v.x *= 2.0;
                v.y *= 2.0;
            }
    }
    return th;
}

AlignmentResult align_pair(const Tensor4& ref, const Tensor4& target,
                           const PyramidConfig& cfg) {
    AlignmentResult res;
    res.offsets = estimate_offsets(ref, target, cfg, &res.loss_trace);
    res.homography = solve_dlt(res.offsets, ref.shape.w, ref.shape.h);
    res.canvas = canvas_extent(res.offsets, ref.shape.w, ref.shape.h);
    res.warped_a = warp_image(ref, Homography::identity(), res.canvas);
    res.warped_b = warp_image(target, res.homography, res.canvas);
    res.masks = build_mask_set(Homography::identity(), res.homography, res.canvas,
                               ref.shape.w, ref.shape.h);
    const AblationEval fin = eval_ablation(to_luma(ref), to_luma(target), res.offsets);
    res.final_loss = fin.loss;
    res.degenerate = fin.degenerate;
    return res;
}

}  // namespace stitch
