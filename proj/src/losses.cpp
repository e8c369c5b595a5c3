#include "stitch/losses.hpp"

#include <cmath>

#include "stitch/kernels.hpp"
#include "stitch/rng.hpp"
#include "stitch/warpmask.hpp"

namespace stitch {

namespace {
// Stage output channels; stage k maps plan[k] -> plan[k+1].
constexpr int kStageChannels[FeatureExtractor::kStages] = {8, 16, 32, 32, 32};

Tensor4 he_conv3x3(int out_c, int in_c, Rng& rng) {
    Tensor4 w(out_c, in_c, 3, 3);
    const double std = std::sqrt(2.0 / (in_c * 9.0));
    for (double& v : w.data) v = std * rng.normal();
    return w;
}
}  // namespace

std::vector<int> FeatureExtractor::register_params(ParamStore& store, int in_channels,
                                                   std::uint64_t seed,
                                                   const std::string& prefix) {
    std::vector<int> ids;
    int c_in = in_channels;
    for (int s = 0; s < kStages; ++s) {
        Rng rng(seed, 0xFE000000ULL + static_cast<std::uint64_t>(s));
        const int c_out = kStageChannels[s];
        ids.push_back(store.add(prefix + ".w" + std::to_string(s),
                                he_conv3x3(c_out, c_in, rng), /*frozen=*/true));
        ids.push_back(store.add(prefix + ".b" + std::to_string(s),
                                Tensor4(1, c_out, 1, 1), /*frozen=*/true));
        c_in = c_out;
    }
    return ids;
}

int FeatureExtractor::emit(Graph& g, int x, const std::vector<int>& ids, Tap tap) {
    int cur = x;
    const int stages = static_cast<int>(tap);
    for (int s = 0; s < stages; ++s) {
        cur = g.conv3x3(cur, ids[2 * s], ids[2 * s + 1]);
        cur = g.relu(cur);
        cur = g.maxpool2x2(cur);
    }
    return cur;
}

FeatureExtractor::FeatureExtractor(Tap tap, int in_channels, std::uint64_t seed)
    : tap_(tap), store_(std::make_shared<ParamStore>()), graph_(store_) {
    param_ids_ = register_params(*store_, in_channels, seed, "fx");
    input_node_ = graph_.input("image");
    tap_node_ = emit(graph_, input_node_, param_ids_, tap_);
}

Tensor4 FeatureExtractor::features(const Tensor4& img) const {
    const int need = 1 << static_cast<int>(tap_);
    if (img.shape.h < need || img.shape.w < need)
        throw std::invalid_argument("FeatureExtractor: input smaller than 2^tap_depth");
    Activations acts;
    forward(graph_, {{"image", img}}, acts);
    return acts.value[tap_node_];
}

void FeatureExtractor::load_external_weights(const std::string& path) {
    store_->load(path);
}

// ---------------------------------------------------------------------------

double padding_loss(const Tensor4& ref_patch, const Tensor4& warped_target_patch) {
    require_same_shape(ref_patch, warped_target_patch, "padding_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < ref_patch.data.size(); ++i)
        s += std::abs(ref_patch.data[i] - warped_target_patch.data[i]);
    return s / static_cast<double>(ref_patch.data.size());
}

AblationLossResult ablation_loss(const Tensor4& ref, const Tensor4& target,
                                 const Homography& h) {
    require_same_shape(ref, target, "ablation_loss");
    CanvasSpec frame{ref.shape.w, ref.shape.h, {0.0, 0.0}};
    const Tensor4 warped_target = warp_image(target, h, frame);
    Tensor4 ones(ref.shape.b, 1, ref.shape.h, ref.shape.w, 1.0);
    const Tensor4 mask = warp_image(ones, h, frame);

    double msum = 0.0;
    for (double v : mask.data) msum += v;
    if (msum < 1.0) return {0.0, true};

    double s = 0.0;
    for (int b = 0; b < ref.shape.b; ++b)
        for (int c = 0; c < ref.shape.c; ++c)
            for (int y = 0; y < ref.shape.h; ++y)
                for (int x = 0; x < ref.shape.w; ++x)
                    s += std::abs(mask.at(b, 0, y, x) * ref.at(b, c, y, x) -
                                  warped_target.at(b, c, y, x));
    return {s / (ref.shape.c * msum), false};
}

double perceptual_distance(const Tensor4& a, const Tensor4& b,
                           const FeatureExtractor& fx) {
    require_same_shape(a, b, "perceptual_distance");
    const Tensor4 fa = fx.features(a);
    const Tensor4 fb = fx.features(b);
    double s = 0.0;
    for (std::size_t i = 0; i < fa.data.size(); ++i) {
        const double d = fa.data[i] - fb.data[i];
        s += d * d;
    }
    return s / static_cast<double>(fa.data.size());
}

double content_loss(const Tensor4& stitched, const Tensor4& warped_a,
                    const Tensor4& warped_b, const Tensor4& mask_a,
                    const Tensor4& mask_b, const FeatureExtractor& fx) {
    require_same_shape(stitched, warped_a, "content_loss");
    require_same_shape(stitched, warped_b, "content_loss");
    auto masked = [&](const Tensor4& m) {
        Tensor4 out(stitched.shape);
        for (int b = 0; b < out.shape.b; ++b)
            for (int c = 0; c < out.shape.c; ++c)
                for (int y = 0; y < out.shape.h; ++y)
                    for (int x = 0; x < out.shape.w; ++x)
                        out.at(b, c, y, x) = stitched.at(b, c, y, x) * m.at(b, 0, y, x);
        return out;
    };
    return perceptual_distance(masked(mask_a), warped_a, fx) +
           perceptual_distance(masked(mask_b), warped_b, fx);
}

double masked_mean_abs(const Tensor4& a, const Tensor4& b, const Tensor4& mask) {
    require_same_shape(a, b, "masked_mean_abs");
    if (mask.shape.c != 1 || mask.shape.h != a.shape.h || mask.shape.w != a.shape.w)
        throw std::invalid_argument("masked_mean_abs: mask shape mismatch");
    double msum = 0.0;
    for (double v : mask.data) msum += v;
    if (msum <= 0.0) return 0.0;
    double s = 0.0;
    for (int bb = 0; bb < a.shape.b; ++bb)
        for (int c = 0; c < a.shape.c; ++c)
            for (int y = 0; y < a.shape.h; ++y)
                for (int x = 0; x < a.shape.w; ++x)
                    s += std::abs(a.at(bb, c, y, x) - b.at(bb, c, y, x)) * mask.at(bb, 0, y, x);
    return s / (a.shape.c * msum);
}

double seam_loss(const Tensor4& stitched, const Tensor4& warped_a,
                 const Tensor4& warped_b, const Tensor4& seam_a,
                 const Tensor4& seam_b) {
    return masked_mean_abs(stitched, warped_a, seam_a) +
           masked_mean_abs(stitched, warped_b, seam_b);
}

double stage_total(double content, double seam, const LossWeights& w) {
    if (!std::isfinite(content) || !std::isfinite(seam))
        throw std::invalid_argument("stage_total: non-finite input");
    return w.lambda_c * content + w.lambda_s * seam;
}

double consistency_loss(const Tensor4& s_hr, const Tensor4& s_lr) {
    if (s_hr.shape.h < s_lr.shape.h || s_hr.shape.w < s_lr.shape.w)
        throw std::invalid_argument("consistency_loss: s_hr smaller than s_lr");
    Tensor4 down;
    kernels::resize_bilinear_forward(s_hr, s_lr.shape.h, s_lr.shape.w, down);
    double s = 0.0;
    for (std::size_t i = 0; i < down.data.size(); ++i)
        s += std::abs(down.data[i] - s_lr.data[i]);
    return s / static_cast<double>(down.data.size());
}

double reconstruction_objective(double l_lr, double l_hr, double l_cs,
                                const LossWeights& w) {
    if (!std::isfinite(l_lr) || !std::isfinite(l_hr) || !std::isfinite(l_cs))
        throw std::invalid_argument("reconstruction_objective: non-finite input");
    return w.omega_lr * l_lr + w.omega_hr * l_hr + w.omega_cs * l_cs;
}

}  // namespace stitch
