// Acceptance gate: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Criteria are property-based plus scaled-down quantitative
// checks; see README for the rationale behind each threshold.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "helpers.hpp"
#include "stitch/align.hpp"
#include "stitch/datakit.hpp"
#include "stitch/evalkit.hpp"
#include "stitch/graph.hpp"
#include "stitch/losses.hpp"
#include "stitch/reconstruct.hpp"
#include "stitch/warpmask.hpp"

using namespace stitch;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const char* what, bool ok, const std::string& detail = "") {
    std::printf("%s criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", idx, what,
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- criterion 1 -----------------------------------------------------------

void criterion1() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    Rng rng(1001);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const FourPointOffsets o = testutil::random_offsets(rng, 32.0);
        Homography h;
        CanvasSpec canvas;
        try {
            h = solve_dlt(o, 128, 128);
            canvas = canvas_extent(o, 128, 128);
        } catch (const NumericError&) {
            continue;  // degenerate draw is allowed to be rejected
        }
        ++checked;
        const auto corners = image_corners(128, 128);
        double minx = 0, miny = 0, maxx = 128, maxy = 128;
        for (int k = 0; k < 4; ++k) {
            const Vec2 p = warp_point(h, corners[k]);
            const double ex = corners[k].x + o.d[k].x, ey = corners[k].y + o.d[k].y;
            if (std::abs(p.x - ex) >= 1e-6 || std::abs(p.y - ey) >= 1e-6) ok = false;
            minx = std::min(minx, ex);
            maxx = std::max(maxx, ex);
            miny = std::min(miny, ey);
            maxy = std::max(maxy, ey);
        }
        if (canvas.width != static_cast<int>(std::ceil(maxx - minx)) ||
            canvas.height != static_cast<int>(std::ceil(maxy - miny)) ||
            canvas.origin_shift.x != -minx || canvas.origin_shift.y != -miny)
            ok = false;
    }
    const double dt = seconds_since(t0);
    if (checked < 990) ok = false;
    if (dt >= 5.0) ok = false;
    detail = std::to_string(checked) + " draws, " + std::to_string(dt) + " s";
    report(1, "geometry oracle suite (DLT round trip + canvas extents)", ok, detail);
}

// --- criterion 2 -----------------------------------------------------------

void criterion2() {
    bool ok = true;
    Rng rng(1002);

    // integer translation pixel-exact
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor4 img = testutil::random_tensor(1, 1, 12, 12, rng, 0.0, 1.0);
        const int tx = rng.uniform_int(-4, 4), ty = rng.uniform_int(-4, 4);
        Homography t = Homography::identity();
        t.m[0][2] = tx;
        t.m[1][2] = ty;
        const CanvasSpec canvas{20, 20, {4.0, 4.0}};
        const Tensor4 out = warp_image(img, t, canvas);
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x) {
                const int sx = x - 4 - tx, sy = y - 4 - ty;
                const double want =
                    (sx >= 0 && sy >= 0 && sx < 12 && sy < 12) ? img.at(0, 0, sy, sx) : 0.0;
                if (out.at(0, 0, y, x) != want) ok = false;
            }
    }

    // half-pixel shift equals the hand-derived average of neighbors
    {
        const Tensor4 img = testutil::random_tensor(1, 1, 1, 16, rng, 0.0, 1.0);
        Homography t = Homography::identity();
        t.m[0][2] = 0.5;
        const Tensor4 out = warp_image(img, t, CanvasSpec{16, 1, {0.0, 0.0}});
        for (int x = 1; x < 16; ++x) {
            const double want = 0.5 * (img.at(0, 0, 0, x - 1) + img.at(0, 0, 0, x));
            if (std::abs(out.at(0, 0, 0, x) - want) >= 1e-12) ok = false;
        }
    }

    // linearity on 100 random cases
    for (int trial = 0; trial < 100; ++trial) {
        Homography h;
        try {
            h = solve_dlt(testutil::random_offsets(rng, 5.0), 16, 16);
        } catch (const NumericError&) {
            continue;
        }
        const CanvasSpec canvas{22, 22, {3.0, 3.0}};
        const Tensor4 a = testutil::random_tensor(1, 1, 16, 16, rng);
        const Tensor4 b = testutil::random_tensor(1, 1, 16, 16, rng);
        const double alpha = rng.uniform(-2.0, 2.0);
        Tensor4 combo(1, 1, 16, 16);
        for (std::size_t i = 0; i < combo.data.size(); ++i)
            combo.data[i] = a.data[i] + alpha * b.data[i];
        const Tensor4 wa = warp_image(a, h, canvas);
        const Tensor4 wb = warp_image(b, h, canvas);
        const Tensor4 wc = warp_image(combo, h, canvas);
        for (std::size_t i = 0; i < wc.data.size(); ++i)
            if (std::abs(wc.data[i] - (wa.data[i] + alpha * wb.data[i])) >= 1e-10) ok = false;
    }
    report(2, "warp exactness (integer, half-pixel, linearity)", ok);
}

// --- criterion 3 -----------------------------------------------------------

Tensor4 oracle_seam(const Tensor4& own, const Tensor4& opposite) {
    const int h = own.shape.h, w = own.shape.w;
    auto at = [&](const Tensor4& t, int y, int x) -> double {
        if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
        return t.at(0, 0, y, x);
    };
    Tensor4 grad(1, 1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            grad.at(0, 0, y, x) = std::abs(at(opposite, y, x) - at(opposite, y - 1, x)) +
                                  std::abs(at(opposite, y, x) - at(opposite, y, x - 1));
    Tensor4 cur = grad;
    for (int pass = 0; pass < 3; ++pass) {
        Tensor4 next(1, 1, h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) s += at(cur, y + dy, x + dx);
                next.at(0, 0, y, x) = s;
            }
        cur = next;
    }
    Tensor4 out(1, 1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(0, 0, y, x) =
                std::min(1.0, std::max(0.0, cur.at(0, 0, y, x))) * own.at(0, 0, y, x);
    return out;
}

void criterion3() {
    bool ok = true;
    Rng rng(1003);
    int done = 0;
    while (done < 50) {
        Homography ha, hb;
        try {
            ha = solve_dlt(testutil::random_offsets(rng, 6.0), 32, 32);
            hb = solve_dlt(testutil::random_offsets(rng, 6.0), 32, 32);
        } catch (const NumericError&) {
            continue;
        }
        const CanvasSpec canvas{44, 44, {6.0, 6.0}};
        const Tensor4 ca = content_mask(ha, canvas, 32, 32);
        const Tensor4 cb = content_mask(hb, canvas, 32, 32);
        const auto [sa, sb] = seam_masks(ca, cb);
        if (!testutil::bitwise_equal(sa, oracle_seam(ca, cb))) ok = false;
        if (!testutil::bitwise_equal(sb, oracle_seam(cb, ca))) ok = false;
        for (std::size_t i = 0; i < sa.data.size(); ++i)
            if (sa.data[i] > ca.data[i] || sb.data[i] > cb.data[i]) ok = false;
        ++done;
    }
    report(3, "seam mask oracle (bitwise, 50 pairs) and seam within content", ok);
}

// --- criterion 4 -----------------------------------------------------------

void criterion4() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    Rng rng(1004);
    const double eps = 1e-5;

    {  // every layer kind
        LayerSpec conv;
        conv.kind = OpKind::Conv3x3;
        conv.weight = testutil::random_tensor(4, 3, 3, 3, rng, -0.5, 0.5);
        conv.bias = testutil::random_tensor(1, 4, 1, 1, rng, -0.5, 0.5);
        if (grad_check(conv, testutil::random_tensor(1, 3, 6, 6, rng), eps) >= 1e-4) ok = false;

        LayerSpec deconv;
        deconv.kind = OpKind::Deconv2x2;
        deconv.weight = testutil::random_tensor(3, 2, 2, 2, rng, -0.5, 0.5);
        deconv.bias = testutil::random_tensor(1, 3, 1, 1, rng, -0.5, 0.5);
        if (grad_check(deconv, testutil::random_tensor(1, 2, 4, 4, rng), eps) >= 1e-4) ok = false;

        LayerSpec relu;
        relu.kind = OpKind::Relu;
        Tensor4 rin = testutil::random_tensor(1, 2, 5, 5, rng);
        for (double& v : rin.data)
            if (std::abs(v) < 0.05) v = 0.1;  // stay away from the kink
        if (grad_check(relu, rin, eps) >= 1e-4) ok = false;

        LayerSpec pool;
        pool.kind = OpKind::MaxPool2x2;
        Tensor4 pin(1, 1, 4, 4);
        for (std::size_t i = 0; i < pin.data.size(); ++i) pin.data[i] = 0.13 * double(i) - 0.9;
        if (grad_check(pool, pin, eps) >= 1e-4) ok = false;

        LayerSpec resize;
        resize.kind = OpKind::ResizeBilinear;
        resize.resize_h = 7;
        resize.resize_w = 3;
        if (grad_check(resize, testutil::random_tensor(1, 2, 5, 5, rng), eps) >= 1e-4) ok = false;
    }

    {  // warp_image input gradient
        const Homography h = solve_dlt(testutil::random_offsets(rng, 2.0), 6, 6);
        const CanvasSpec canvas{8, 8, {1.0, 1.0}};
        Tensor4 img = testutil::random_tensor(1, 1, 6, 6, rng);
        const Tensor4 gout = testutil::random_tensor(1, 1, 8, 8, rng);
        const Tensor4 gin = warp_image_backward_input(gout, h, canvas, img.shape);
        auto objective = [&]() {
            const Tensor4 out = warp_image(img, h, canvas);
            double s = 0.0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * gout.data[i];
            return s;
        };
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            const double keep = img.data[i];
            img.data[i] = keep + eps;
            const double fp = objective();
            img.data[i] = keep - eps;
            const double fm = objective();
            img.data[i] = keep;
            const double num = (fp - fm) / (2 * eps);
            if (std::abs(num - gin.data[i]) /
                    std::max({std::abs(num), std::abs(gin.data[i]), 1e-8}) >= 1e-4)
                ok = false;
        }
    }

    {  // 10 random full-model parameters through the training objective
        BranchConfig cfg;
        cfg.resblock_count = 1;
        cfg.lr_height = cfg.lr_width = 32;
        StitchModel m = build_model(cfg, 1004);
        const TrainingGraph tg = build_training_graph(m, LossWeights{});

        const Tensor4 src = testutil::smooth_image(160, 160, 3, 1004);
        Rng prng(1005);
        const auto pair = testutil::render_pair(src, 48, testutil::random_offsets(prng, 5.0));
        PyramidConfig pyr;
        pyr.iterations_per_level = 40;
        const AlignmentResult a = align_pair(pair.ref, pair.target, pyr);
        const TrainSample sample = prepare_sample(m, a);

        auto loss_value = [&]() {
            Activations acts;
            forward(tg.g, sample.inputs, acts);
            return acts.value[tg.l_r].data[0];
        };
        Activations acts;
        forward(tg.g, sample.inputs, acts);
        m.params->zero_grads();
        backward(tg.g, acts, tg.l_r);

        std::vector<int> trainable = m.lr_param_ids;
        trainable.insert(trainable.end(), m.hr_param_ids.begin(), m.hr_param_ids.end());
        for (int probe = 0; probe < 10; ++probe) {
            const int id = trainable[prng.uniform_int(0, static_cast<int>(trainable.size()) - 1)];
            Tensor4& w = m.params->value(id);
            const int i = prng.uniform_int(0, static_cast<int>(w.data.size()) - 1);
            const double keep = w.data[i], peps = 1e-4;
            w.data[i] = keep + peps;
            const double fp = loss_value();
            w.data[i] = keep - peps;
            const double fm = loss_value();
            w.data[i] = keep;
            const double num = (fp - fm) / (2 * peps);
            const double ana = m.params->grad(id).data[i];
            if (std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8}) >= 1e-3)
                ok = false;
        }
    }

    const double dt = seconds_since(t0);
    if (dt >= 60.0) ok = false;
    detail = std::to_string(dt) + " s";
    report(4, "gradient suite (layers, warp, full model)", ok, detail);
}

// --- criterion 5 -----------------------------------------------------------

void criterion5() {
    const auto t0 = Clock::now();
    bool ok = true;
    Rng rng(1006);
    double sum_rmse = 0.0, sum_identity_rmse = 0.0;
    int worse_than_identity = 0;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
        const Tensor4 src = testutil::smooth_image(220, 220, 1, 2000 + i);
        FourPointOffsets truth;
        do {
            truth = testutil::random_offsets(rng, 16.0);
        } while ([&] {
            try {
                solve_dlt(truth, 128, 128);
                return false;
            } catch (const NumericError&) {
                return true;
            }
        }());
        const auto pair = testutil::render_pair(src, 128, truth);

        PyramidConfig cfg;
        const FourPointOffsets est = estimate_offsets(pair.ref, pair.target, cfg);
        sum_rmse += four_pt_rmse(est, truth);
        sum_identity_rmse += four_pt_rmse(FourPointOffsets{}, truth);

        const double final_loss = eval_ablation(pair.ref, pair.target, est).loss;
        const double identity_loss =
            eval_ablation(pair.ref, pair.target, FourPointOffsets{}).loss;
        if (final_loss > identity_loss) ++worse_than_identity;
    }
    const double mean_rmse = sum_rmse / n;
    const double mean_identity = sum_identity_rmse / n;
    const double dt = seconds_since(t0);
    if (mean_rmse >= 0.25 * mean_identity) ok = false;
    if (worse_than_identity != 0) ok = false;
    if (dt >= 600.0) ok = false;
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean 4pt-RMSE %.4f vs identity %.4f (%.1f%%), %d regressions, %.0f s",
                  mean_rmse, mean_identity, 100.0 * mean_rmse / mean_identity,
                  worse_than_identity, dt);
    report(5, "alignment quality over 100 synthetic pairs", ok, buf);
}

// --- criterion 6 -----------------------------------------------------------

void criterion6() {
    bool ok = true;
    Rng rng(1007);
    const int n = 200;
    const int full = 128, crop = 32;
    std::vector<double> magnitudes, losses;
    int ablation_better = 0;
    for (int i = 0; i < n; ++i) {
        const Tensor4 src = testutil::smooth_image(260, 260, 1, 3000 + i);
        // translation-dominant disturbance large enough that the 32x32
        // center crops share no scene content
        const double tx = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(40.0, 60.0);
        const double ty = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(40.0, 60.0);
        FourPointOffsets truth;
        for (auto& v : truth.d)
            v = {tx + rng.uniform(-3.0, 3.0), ty + rng.uniform(-3.0, 3.0)};
        const auto pair = testutil::render_pair(src, full, truth);

        // padding strategy on the central crops
        Tensor4 ref_crop(1, 1, crop, crop), tgt_crop(1, 1, crop, crop);
        const int o = (full - crop) / 2;
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x) {
                ref_crop.at(0, 0, y, x) = pair.ref.at(0, 0, o + y, o + x);
                tgt_crop.at(0, 0, y, x) = pair.target.at(0, 0, o + y, o + x);
            }
        magnitudes.push_back(std::hypot(tx, ty));
        losses.push_back(padding_loss(ref_crop, tgt_crop));

        // ablation strategy on the full frames
        const Homography h = solve_dlt(truth, full, full);
        const auto at_truth = ablation_loss(pair.ref, pair.target, h);
        const auto at_identity = ablation_loss(pair.ref, pair.target, Homography::identity());
        if (!at_truth.degenerate && !at_identity.degenerate &&
            at_truth.value < at_identity.value)
            ++ablation_better;
    }

    // Pearson correlation between |offset| and the padding loss
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += magnitudes[i];
        my += losses[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxy += (magnitudes[i] - mx) * (losses[i] - my);
        sxx += (magnitudes[i] - mx) * (magnitudes[i] - mx);
        syy += (losses[i] - my) * (losses[i] - my);
    }
    const double r = sxy / std::sqrt(sxx * syy);

    if (std::abs(r) >= 0.2) ok = false;
    if (ablation_better < static_cast<int>(0.95 * n)) ok = false;
    char buf[120];
    std::snprintf(buf, sizeof buf, "padding |r| = %.3f, ablation better on %d/%d",
                  std::abs(r), ablation_better, n);
    report(6, "ablation beats padding in the large-baseline regime", ok, buf);
}

// --- criterion 7 -----------------------------------------------------------

void criterion7() {
    const auto t0 = Clock::now();
    bool ok = true;

    std::vector<AlignmentResult> data;
    Rng rng(1008);
    for (int i = 0; i < 20; ++i) {
        const Tensor4 src = testutil::smooth_image(200, 200, 3, 4000 + i);
        const auto pair = testutil::render_pair(src, 96, testutil::random_offsets(rng, 5.0));
        PyramidConfig pyr;
        pyr.iterations_per_level = 60;
        data.push_back(align_pair(pair.ref, pair.target, pyr));
    }

    BranchConfig cfg;
    cfg.channel_scale = 0.125;
    cfg.lr_height = cfg.lr_width = 64;
    cfg.resblock_count = 2;
    StitchModel m = build_model(cfg, 1008);
    // 20 pairs x 10 epochs = 200 iterations
    const auto rec = train(m, data, LossWeights{}, 10, 1008);

    std::string detail;
    if (rec.size() != 200) {
        ok = false;
        detail = "unexpected iteration count " + std::to_string(rec.size());
    } else {
        // compare epoch-mean losses: iteration-level values vary with sample order
        auto window_mean = [&](int lo, int hi) {
            double s = 0;
            for (int i = lo; i < hi; ++i) s += rec[i].l_r;
            return s / (hi - lo);
        };
        const double first = window_mean(0, 20);
        const double last = window_mean(180, 200);
        if (last >= 0.5 * first) ok = false;

        const double seam_first = [&] {
            double s = 0;
            for (int i = 0; i < 20; ++i) s += rec[i].seam_lr + rec[i].seam_hr;
            return s / 20;
        }();
        const double seam_last = [&] {
            double s = 0;
            for (int i = 180; i < 200; ++i) s += rec[i].seam_lr + rec[i].seam_hr;
            return s / 20;
        }();
        if (seam_last >= 0.5 * seam_first) ok = false;

        // smoothed trace (window 20) non-increasing after iteration 50
        bool monotone = true;
        auto smooth = [&](int i) { return window_mean(i - 10, i + 10); };
        for (int i = 60; i + 10 <= 200; i += 10)
            if (smooth(i) > smooth(i - 10) * 1.01) monotone = false;
        if (!monotone) ok = false;

        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "L_R %.5f -> %.5f (%.0f%%), seam %.5f -> %.5f, smoothed %s, %.0f s",
                      first, last, 100.0 * last / first, seam_first, seam_last,
                      monotone ? "non-increasing" : "INCREASING", seconds_since(t0));
        detail = buf;
    }
    if (seconds_since(t0) >= 900.0) ok = false;
    report(7, "reconstruction training at desk scale", ok, detail);
}

// --- criterion 8 -----------------------------------------------------------

void criterion8() {
    bool ok = true;
    std::string detail;

    // PSNR of sigma^2 = 0.01 noise must be 20 dB +/- 0.1
    const Tensor4 img = testutil::smooth_image(96, 96, 1, 1009);
    Tensor4 noisy = img;
    Rng rng(1010);
    const double amp = std::sqrt(3.0 * 0.01);  // uniform(-a,a) has variance a^2/3
    for (double& v : noisy.data) v += rng.uniform(-amp, amp);
    const double p = psnr_overlap(img, noisy, Homography::identity());
    if (std::abs(p - 20.0) > 0.1) ok = false;

    // SSIM self-similarity
    const Tensor4 rgb = testutil::smooth_image(48, 48, 3, 1011);
    if (ssim_overlap(rgb, rgb, Homography::identity()) != 1.0) ok = false;

    // boundary probes of the published thresholds
    if (classify_overlap(0.9000001) != OverlapLevel::HIGH) ok = false;
    if (classify_overlap(0.9) != OverlapLevel::MIDDLE) ok = false;
    if (classify_overlap(0.6) != OverlapLevel::MIDDLE) ok = false;
    if (classify_overlap(0.5999999) != OverlapLevel::LOW) ok = false;
    if (classify_parallax(29.9999) != ParallaxLevel::SMALL) ok = false;
    if (classify_parallax(30.0) != ParallaxLevel::LARGE) ok = false;

    char buf[64];
    std::snprintf(buf, sizeof buf, "noise PSNR %.3f dB", p);
    report(8, "metric sanity (PSNR, SSIM, thresholds)", ok, buf);
}

// --- criterion 9 -----------------------------------------------------------

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing:" + p.string() + ">";
    return std::string(std::istreambuf_iterator<char>(in), {});
}

bool trees_equal(const fs::path& a, const fs::path& b) {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) names.push_back(fs::relative(e.path(), a).string());
    std::sort(names.begin(), names.end());
    std::vector<std::string> other;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) other.push_back(fs::relative(e.path(), b).string());
    std::sort(other.begin(), other.end());
    if (names != other) return false;
    for (const auto& n : names)
        if (file_bytes(a / n) != file_bytes(b / n)) return false;
    return !names.empty();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STITCH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

void criterion9() {
    bool ok = true;
    std::string detail;
    const fs::path root = fs::temp_directory_path() / "acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);

    const fs::path srcpng = root / "src.png";
    save_image(testutil::smooth_image(200, 200, 3, 1012), srcpng.string());

    auto twice = [&](const std::string& sub, const std::string& args, const char* what) {
        const fs::path d1 = root / (std::string(what) + "_1");
        const fs::path d2 = root / (std::string(what) + "_2");
        if (run_cli(sub + " " + args + " --out " + d1.string()) != 0 ||
            run_cli(sub + " " + args + " --out " + d2.string()) != 0) {
            ok = false;
            detail += std::string(what) + " failed to run; ";
            return;
        }
        if (!trees_equal(d1, d2)) {
            ok = false;
            detail += std::string(what) + " differs; ";
        }
    };

    // 10 records so the eval subcommand can fill its three report buckets
    twice("gen-synth", "--source " + srcpng.string() + " --n 10 --disturbance 8 --crop 96 --seed 5",
          "gen_synth");

    const fs::path ds = root / "gen_synth_1";
    const std::string ref = (ds / "pair_0000_ref.png").string();
    const std::string tgt = (ds / "pair_0000_target.png").string();
    twice("align", "--ref " + ref + " --target " + tgt + " --iters 60", "align");
    twice("stitch",
          "--ref " + ref + " --target " + tgt + " --iters 40 --resblocks 1 --seed 4", "stitch");
    twice("dump-features",
          "--ref " + ref + " --target " + tgt + " --iters 40 --seed 4", "dump_features");
    twice("eval", "--manifest " + (ds / "manifest.json").string() +
                      " --metric rmse --iters 40",
          "eval");
    twice("train", "--manifest " + (ds / "manifest.json").string() +
                       " --epochs 1 --iters 30 --lr-size 32 --resblocks 1 --seed 6",
          "train");

    fs::remove_all(root);
    report(9, "CLI determinism (byte-identical re-runs, all subcommands)", ok, detail);
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
