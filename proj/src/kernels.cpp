#include "stitch/kernels.hpp"

#include <algorithm>
#include <limits>
#include <atomic>

namespace stitch::kernels {

namespace {
std::atomic<bool> g_parallel{true};

void check_conv_shapes(const Tensor4& in, const Tensor4& weight,
                       const Tensor4& bias, int k, const char* where) {
    if (weight.shape.h != k || weight.shape.w != k)
        throw std::invalid_argument(std::string(where) + ": kernel must be " +
                                    std::to_string(k) + "x" + std::to_string(k));
    if (weight.shape.c != in.shape.c)
        throw std::invalid_argument(std::string(where) + ": in_channels mismatch");
    if (bias.shape.c != weight.shape.b || bias.shape.numel() != static_cast<std::size_t>(weight.shape.b))
        throw std::invalid_argument(std::string(where) + ": bias size mismatch");
}
}  // namespace

bool use_parallel() { return g_parallel.load(); }
void set_parallel(bool on) { g_parallel.store(on); }

// ---------------------------------------------------------------------------
// conv3x3: the loop body is shared; only the omp pragma differs. Accumulation
// order inside one output element is identical in both versions.

#define CONV3X3_FORWARD_BODY(PRAGMA)                                            \
    check_conv_shapes(in, weight, bias, 3, "conv3x3");                          \
    const int B = in.shape.b, CI = in.shape.c, H = in.shape.h, W = in.shape.w;  \
    const int CO = weight.shape.b;                                              \
    out = Tensor4(B, CO, H, W);                                                 \
    PRAGMA                                                                      \
    for (int bo = 0; bo < B * CO; ++bo) {                                       \
        const int b = bo / CO, oc = bo % CO;                                    \
        for (int y = 0; y < H; ++y)                                             \
            for (int x = 0; x < W; ++x) {                                       \
                double acc = bias.data[oc];                                     \
                for (int ic = 0; ic < CI; ++ic)                                 \
                    for (int ky = 0; ky < 3; ++ky) {                            \
                        const int sy = y + ky - 1;                              \
                        if (sy < 0 || sy >= H) continue;                        \
                        for (int kx = 0; kx < 3; ++kx) {                        \
                            const int sx = x + kx - 1;                          \
                            if (sx < 0 || sx >= W) continue;                    \
                            acc += weight.at(oc, ic, ky, kx) * in.at(b, ic, sy, sx); \
                        }                                                       \
                    }                                                           \
                out.at(b, oc, y, x) = acc;                                      \
            }                                                                   \
    }

void serial::conv3x3_forward(const Tensor4& in, const Tensor4& weight,
                             const Tensor4& bias, Tensor4& out) {
    CONV3X3_FORWARD_BODY()
}

void par::conv3x3_forward(const Tensor4& in, const Tensor4& weight,
                          const Tensor4& bias, Tensor4& out) {
    CONV3X3_FORWARD_BODY(_Pragma("omp parallel for schedule(static)"))
}

// gin(b,ic,y,x) = sum_{oc,ky,kx} w(oc,ic,ky,kx) * gout(b,oc,y-(ky-1),x-(kx-1))
#define CONV3X3_BWD_INPUT_BODY(PRAGMA)                                          \
    const int B = gout.shape.b, CO = gout.shape.c;                              \
    const int H = gout.shape.h, W = gout.shape.w;                               \
    const int CI = weight.shape.c;                                              \
    gin = Tensor4(B, CI, H, W);                                                 \
    PRAGMA                                                                      \
    for (int bi = 0; bi < B * CI; ++bi) {                                       \
        const int b = bi / CI, ic = bi % CI;                                    \
        for (int y = 0; y < H; ++y)                                             \
            for (int x = 0; x < W; ++x) {                                       \
                double acc = 0.0;                                               \
                for (int oc = 0; oc < CO; ++oc)                                 \
                    for (int ky = 0; ky < 3; ++ky) {                            \
                        const int oy = y - (ky - 1);                            \
                        if (oy < 0 || oy >= H) continue;                        \
                        for (int kx = 0; kx < 3; ++kx) {                        \
                            const int ox = x - (kx - 1);                        \
                            if (ox < 0 || ox >= W) continue;                    \
                            acc += weight.at(oc, ic, ky, kx) * gout.at(b, oc, oy, ox); \
                        }                                                       \
                    }                                                           \
                gin.at(b, ic, y, x) = acc;                                      \
            }                                                                   \
    }

void serial::conv3x3_backward_input(const Tensor4& gout, const Tensor4& weight,
                                    Tensor4& gin) {
    CONV3X3_BWD_INPUT_BODY()
}

void par::conv3x3_backward_input(const Tensor4& gout, const Tensor4& weight,
                                 Tensor4& gin) {
    CONV3X3_BWD_INPUT_BODY(_Pragma("omp parallel for schedule(static)"))
}

// gweight(oc,ic,ky,kx) = sum_{b,y,x} in(b,ic,y+ky-1,x+kx-1) * gout(b,oc,y,x)
#define CONV3X3_BWD_PARAMS_BODY(PRAGMA)                                         \
    const int B = in.shape.b, CI = in.shape.c, H = in.shape.h, W = in.shape.w;  \
    const int CO = gout.shape.c;                                                \
    gweight = Tensor4(CO, CI, 3, 3);                                            \
    gbias = Tensor4(1, CO, 1, 1);                                               \
    PRAGMA                                                                      \
    for (int oi = 0; oi < CO * CI; ++oi) {                                      \
        const int oc = oi / CI, ic = oi % CI;                                   \
        for (int ky = 0; ky < 3; ++ky)                                          \
            for (int kx = 0; kx < 3; ++kx) {                                    \
                double acc = 0.0;                                               \
                for (int b = 0; b < B; ++b)                                     \
                    for (int y = 0; y < H; ++y) {                               \
                        const int sy = y + ky - 1;                              \
                        if (sy < 0 || sy >= H) continue;                        \
                        for (int x = 0; x < W; ++x) {                           \
                            const int sx = x + kx - 1;                          \
                            if (sx < 0 || sx >= W) continue;                    \
                            acc += in.at(b, ic, sy, sx) * gout.at(b, oc, y, x); \
                        }                                                       \
                    }                                                           \
                gweight.at(oc, ic, ky, kx) = acc;                               \
            }                                                                   \
    }                                                                           \
    for (int oc = 0; oc < CO; ++oc) {                                           \
        double acc = 0.0;                                                       \
        for (int b = 0; b < B; ++b)                                             \
            for (int y = 0; y < H; ++y)                                         \
                for (int x = 0; x < W; ++x) acc += gout.at(b, oc, y, x);        \
        gbias.data[oc] = acc;                                                   \
    }

void serial::conv3x3_backward_params(const Tensor4& in, const Tensor4& gout,
                                     Tensor4& gweight, Tensor4& gbias) {
    CONV3X3_BWD_PARAMS_BODY()
}

void par::conv3x3_backward_params(const Tensor4& in, const Tensor4& gout,
                                  Tensor4& gweight, Tensor4& gbias) {
    CONV3X3_BWD_PARAMS_BODY(_Pragma("omp parallel for schedule(static)"))
}

// ---------------------------------------------------------------------------
// deconv2x2 stride 2: out(b,oc,oy,ox) depends on exactly one input pixel.

#define DECONV_FORWARD_BODY(PRAGMA)                                             \
    check_conv_shapes(in, weight, bias, 2, "deconv2x2");                        \
    const int B = in.shape.b, CI = in.shape.c, H = in.shape.h, W = in.shape.w;  \
    const int CO = weight.shape.b;                                              \
    out = Tensor4(B, CO, 2 * H, 2 * W);                                         \
    PRAGMA                                                                      \
    for (int bo = 0; bo < B * CO; ++bo) {                                       \
        const int b = bo / CO, oc = bo % CO;                                    \
        for (int oy = 0; oy < 2 * H; ++oy)                                      \
            for (int ox = 0; ox < 2 * W; ++ox) {                                \
                double acc = bias.data[oc];                                     \
                const int ky = oy & 1, kx = ox & 1;                             \
                const int sy = oy >> 1, sx = ox >> 1;                           \
                for (int ic = 0; ic < CI; ++ic)                                 \
                    acc += weight.at(oc, ic, ky, kx) * in.at(b, ic, sy, sx);    \
                out.at(b, oc, oy, ox) = acc;                                    \
            }                                                                   \
    }

void serial::deconv2x2_forward(const Tensor4& in, const Tensor4& weight,
                               const Tensor4& bias, Tensor4& out) {
    DECONV_FORWARD_BODY()
}

void par::deconv2x2_forward(const Tensor4& in, const Tensor4& weight,
                            const Tensor4& bias, Tensor4& out) {
    DECONV_FORWARD_BODY(_Pragma("omp parallel for schedule(static)"))
}

#define DECONV_BWD_INPUT_BODY(PRAGMA)                                           \
    const int B = gout.shape.b, CO = gout.shape.c;                              \
    const int H = gout.shape.h / 2, W = gout.shape.w / 2;                       \
    const int CI = weight.shape.c;                                              \
    gin = Tensor4(B, CI, H, W);                                                 \
    PRAGMA                                                                      \
    for (int bi = 0; bi < B * CI; ++bi) {                                       \
        const int b = bi / CI, ic = bi % CI;                                    \
        for (int y = 0; y < H; ++y)                                             \
            for (int x = 0; x < W; ++x) {                                       \
                double acc = 0.0;                                               \
                for (int oc = 0; oc < CO; ++oc)                                 \
                    for (int ky = 0; ky < 2; ++ky)                              \
                        for (int kx = 0; kx < 2; ++kx)                          \
                            acc += weight.at(oc, ic, ky, kx) *                  \
                                   gout.at(b, oc, 2 * y + ky, 2 * x + kx);      \
                gin.at(b, ic, y, x) = acc;                                      \
            }                                                                   \
    }

void serial::deconv2x2_backward_input(const Tensor4& gout, const Tensor4& weight,
                                      Tensor4& gin) {
    DECONV_BWD_INPUT_BODY()
}

void par::deconv2x2_backward_input(const Tensor4& gout, const Tensor4& weight,
                                   Tensor4& gin) {
    DECONV_BWD_INPUT_BODY(_Pragma("omp parallel for schedule(static)"))
}

#define DECONV_BWD_PARAMS_BODY(PRAGMA)                                          \
    const int B = in.shape.b, CI = in.shape.c, H = in.shape.h, W = in.shape.w;  \
    const int CO = gout.shape.c;                                                \
    gweight = Tensor4(CO, CI, 2, 2);                                            \
    gbias = Tensor4(1, CO, 1, 1);                                               \
    PRAGMA                                                                      \
    for (int oi = 0; oi < CO * CI; ++oi) {                                      \
        const int oc = oi / CI, ic = oi % CI;                                   \
        for (int ky = 0; ky < 2; ++ky)                                          \
            for (int kx = 0; kx < 2; ++kx) {                                    \
                double acc = 0.0;                                               \
                for (int b = 0; b < B; ++b)                                     \
                    for (int y = 0; y < H; ++y)                                 \
                        for (int x = 0; x < W; ++x)                             \
                            acc += in.at(b, ic, y, x) *                         \
                                   gout.at(b, oc, 2 * y + ky, 2 * x + kx);      \
                gweight.at(oc, ic, ky, kx) = acc;                               \
            }                                                                   \
    }                                                                           \
    for (int oc = 0; oc < CO; ++oc) {                                           \
        double acc = 0.0;                                                       \
        for (int b = 0; b < B; ++b)                                             \
            for (int oy = 0; oy < 2 * H; ++oy)                                  \
                for (int ox = 0; ox < 2 * W; ++ox) acc += gout.at(b, oc, oy, ox); \
        gbias.data[oc] = acc;                                                   \
    }

void serial::deconv2x2_backward_params(const Tensor4& in, const Tensor4& gout,
                                       Tensor4& gweight, Tensor4& gbias) {
    DECONV_BWD_PARAMS_BODY()
}

void par::deconv2x2_backward_params(const Tensor4& in, const Tensor4& gout,
                                    Tensor4& gweight, Tensor4& gbias) {
    DECONV_BWD_PARAMS_BODY(_Pragma("omp parallel for schedule(static)"))
}

// ---------------------------------------------------------------------------
// dispatchers

void conv3x3_forward(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    use_parallel() ? par::conv3x3_forward(in, w, b, out) : serial::conv3x3_forward(in, w, b, out);
}
void conv3x3_backward_input(const Tensor4& gout, const Tensor4& w, Tensor4& gin) {
    use_parallel() ? par::conv3x3_backward_input(gout, w, gin) : serial::conv3x3_backward_input(gout, w, gin);
}
void conv3x3_backward_params(const Tensor4& in, const Tensor4& gout, Tensor4& gw, Tensor4& gb) {
    use_parallel() ? par::conv3x3_backward_params(in, gout, gw, gb) : serial::conv3x3_backward_params(in, gout, gw, gb);
}
void deconv2x2_forward(const Tensor4& in, const Tensor4& w, const Tensor4& b, Tensor4& out) {
    use_parallel() ? par::deconv2x2_forward(in, w, b, out) : serial::deconv2x2_forward(in, w, b, out);
}
void deconv2x2_backward_input(const Tensor4& gout, const Tensor4& w, Tensor4& gin) {
    use_parallel() ? par::deconv2x2_backward_input(gout, w, gin) : serial::deconv2x2_backward_input(gout, w, gin);
}
void deconv2x2_backward_params(const Tensor4& in, const Tensor4& gout, Tensor4& gw, Tensor4& gb) {
    use_parallel() ? par::deconv2x2_backward_params(in, gout, gw, gb) : serial::deconv2x2_backward_params(in, gout, gw, gb);
}

// ---------------------------------------------------------------------------

void maxpool2x2_forward(const Tensor4& in, Tensor4& out, std::vector<int>& argmax) {
    const int B = in.shape.b, C = in.shape.c;
    const int OH = in.shape.h / 2, OW = in.shape.w / 2;
    out = Tensor4(B, C, OH, OW);
    argmax.assign(out.data.size(), -1);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < OH; ++y)
                for (int x = 0; x < OW; ++x) {
                    double best = -std::numeric_limits<double>::infinity();
                    int best_idx = -1;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t si = in.idx(b, c, 2 * y + dy, 2 * x + dx);
                            if (in.data[si] > best) {
                                best = in.data[si];
                                best_idx = static_cast<int>(si);
                            }
                        }
                    const std::size_t oi = out.idx(b, c, y, x);
                    out.data[oi] = best;
                    argmax[oi] = best_idx;
                }
}

void maxpool2x2_backward(const Tensor4& gout, const std::vector<int>& argmax, Tensor4& gin) {
    for (std::size_t i = 0; i < gout.data.size(); ++i)
        gin.data[argmax[i]] += gout.data[i];
}

void resize_bilinear_forward(const Tensor4& in, int oh, int ow, Tensor4& out) {
    const int B = in.shape.b, C = in.shape.c, H = in.shape.h, W = in.shape.w;
    if (oh == H && ow == W) {
        out = in;
        out.grad.clear();
        return;
    }
    out = Tensor4(B, C, oh, ow);
    const double sy_scale = static_cast<double>(H) / oh;
    const double sx_scale = static_cast<double>(W) / ow;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < oh; ++y) {
                double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, H - 1.0);
                const int y0 = static_cast<int>(sy);
                const int y1 = std::min(y0 + 1, H - 1);
                const double fy = sy - y0;
                for (int x = 0; x < ow; ++x) {
                    double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, W - 1.0);
                    const int x0 = static_cast<int>(sx);
                    const int x1 = std::min(x0 + 1, W - 1);
                    const double fx = sx - x0;
                    out.at(b, c, y, x) =
                        (1 - fy) * ((1 - fx) * in.at(b, c, y0, x0) + fx * in.at(b, c, y0, x1)) +
                        fy * ((1 - fx) * in.at(b, c, y1, x0) + fx * in.at(b, c, y1, x1));
                }
            }
}

void resize_bilinear_backward(const Tensor4& gout, int ih, int iw, Tensor4& gin) {
    const int B = gout.shape.b, C = gout.shape.c, OH = gout.shape.h, OW = gout.shape.w;
    if (OH == ih && OW == iw) {
        for (std::size_t i = 0; i < gout.data.size(); ++i) gin.data[i] += gout.data[i];
        return;
    }
    const double sy_scale = static_cast<double>(ih) / OH;
    const double sx_scale = static_cast<double>(iw) / OW;
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < OH; ++y) {
                double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, ih - 1.0);
                const int y0 = static_cast<int>(sy);
                const int y1 = std::min(y0 + 1, ih - 1);
                const double fy = sy - y0;
                for (int x = 0; x < OW; ++x) {
                    double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, iw - 1.0);
                    const int x0 = static_cast<int>(sx);
                    const int x1 = std::min(x0 + 1, iw - 1);
                    const double fx = sx - x0;
                    const double g = gout.at(b, c, y, x);
                    gin.at(b, c, y0, x0) += (1 - fy) * (1 - fx) * g;
                    gin.at(b, c, y0, x1) += (1 - fy) * fx * g;
                    gin.at(b, c, y1, x0) += fy * (1 - fx) * g;
                    gin.at(b, c, y1, x1) += fy * fx * g;
                }
            }
}

void relu_forward(const Tensor4& in, Tensor4& out) {
    out = Tensor4(in.shape);
    for (std::size_t i = 0; i < in.data.size(); ++i)
        out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
}

void relu_backward(const Tensor4& in, const Tensor4& gout, Tensor4& gin) {
    for (std::size_t i = 0; i < in.data.size(); ++i)
        if (in.data[i] > 0.0) gin.data[i] += gout.data[i];
}

}  // namespace stitch::kernels
