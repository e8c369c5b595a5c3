#include "stitch/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "stitch/image_io.hpp"
#include "stitch/kernels.hpp"
#include "stitch/rng.hpp"

namespace stitch {

void BranchConfig::validate() const {
    if (channel_scale <= 0.0 || channel_scale > 1.0)
        throw std::invalid_argument("BranchConfig: channel_scale must be in (0,1]");
    if (lr_height % 8 != 0 || lr_width % 8 != 0 || lr_height <= 0 || lr_width <= 0)
        throw std::invalid_argument("BranchConfig: LR working size must be divisible by 8");
    if (resblock_count < 1)
        throw std::invalid_argument("BranchConfig: resblock_count must be >= 1");
}

std::vector<int> BranchConfig::lr_filters() const {
    static const int base[15] = {64, 64, 128, 128, 256, 256, 512, 512,
                                 256, 256, 128, 128, 64, 64, 3};
    std::vector<int> f(15);
    for (int i = 0; i < 14; ++i)
        f[i] = std::max(1, static_cast<int>(std::llround(base[i] * channel_scale)));
    f[14] = 3;  // output stays RGB at any scale
    return f;
}

int BranchConfig::hr_filters() const {
    return std::max(1, static_cast<int>(std::llround(64 * channel_scale)));
}

namespace {

Tensor4 he_init(int oc, int ic, int k, Rng& rng) {
    Tensor4 w(oc, ic, k, k);
    const double std = std::sqrt(2.0 / (ic * k * k));
    for (double& v : w.data) v = std * rng.normal();
    return w;
}

struct ParamBuilder {
    ParamStore& store;
    std::uint64_t seed;
    std::uint64_t stream = 0;
    std::vector<int> ids;

    void conv(const std::string& name, int oc, int ic, int k) {
        Rng rng(seed, stream++);
        ids.push_back(store.add(name + ".w", he_init(oc, ic, k, rng)));
        ids.push_back(store.add(name + ".b", Tensor4(1, oc, 1, 1)));
    }
};

// LR encoder-decoder: 15 convs, 3 pools, 3 deconvs, concat skips at equal
// resolutions. ids layout: c0..c14 (w,b pairs), then d0..d2.
int emit_lr_branch(Graph& g, int x, const std::vector<int>& ids,
                   std::vector<int>* layers) {
    auto cw = [&](int i) { return ids[2 * i]; };
    auto cb = [&](int i) { return ids[2 * i + 1]; };
    auto dw = [&](int j) { return ids[30 + 2 * j]; };
    auto db = [&](int j) { return ids[30 + 2 * j + 1]; };
    auto rec = [&](int n) {
        if (layers) layers->push_back(n);
        return n;
    };
    auto conv_relu = [&](int in, int i) { return rec(g.relu(g.conv3x3(in, cw(i), cb(i)))); };

    const int a1 = conv_relu(x, 0);
    const int a2 = conv_relu(a1, 1);
    const int p1 = rec(g.maxpool2x2(a2));
    const int a3 = conv_relu(p1, 2);
    const int a4 = conv_relu(a3, 3);
    const int p2 = rec(g.maxpool2x2(a4));
    const int a5 = conv_relu(p2, 4);
    const int a6 = conv_relu(a5, 5);
    const int p3 = rec(g.maxpool2x2(a6));
    const int a7 = conv_relu(p3, 6);
    const int a8 = conv_relu(a7, 7);
    const int u1 = rec(g.deconv2x2(a8, dw(0), db(0)));
    const int a9 = conv_relu(g.concat({u1, a6}), 8);
    const int a10 = conv_relu(a9, 9);
    const int u2 = rec(g.deconv2x2(a10, dw(1), db(1)));
    const int a11 = conv_relu(g.concat({u2, a4}), 10);
    const int a12 = conv_relu(a11, 11);
    const int u3 = rec(g.deconv2x2(a12, dw(2), db(2)));
    const int a13 = conv_relu(g.concat({u3, a2}), 12);
    const int a14 = conv_relu(a13, 13);
    return rec(g.conv3x3(a14, cw(14), cb(14)));  // linear output conv
}

// HR branch: first conv, resblocks, penultimate conv, first-layer skip add,
// final 3-channel conv. ids layout: first, (res_i.c1, res_i.c2)..., pen, last.
int emit_hr_branch(Graph& g, int x, const std::vector<int>& ids, int resblocks) {
    int p = 0;
    auto next = [&]() {
        const int w = ids[p], b = ids[p + 1];
        p += 2;
        return std::pair{w, b};
    };
    auto [fw, fb] = next();
    const int f1 = g.relu(g.conv3x3(x, fw, fb));
    int cur = f1;
    for (int r = 0; r < resblocks; ++r) {
        auto [w1, b1] = next();
        auto [w2, b2] = next();
        const int t = g.conv3x3(g.relu(g.conv3x3(cur, w1, b1)), w2, b2);
        cur = g.relu(g.add(t, cur));
    }
    auto [pw, pb] = next();
    const int pen = g.relu(g.conv3x3(cur, pw, pb));
    auto [lw, lb] = next();
    return g.conv3x3(g.add(pen, f1), lw, lb);
}

}  // namespace

StitchModel build_model(const BranchConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    StitchModel m;
    m.cfg = cfg;

    const auto F = cfg.lr_filters();
    ParamBuilder pb{*m.params, seed};
    // encoder/decoder conv input channels
    const int cin[15] = {6,       F[0],    F[1],        F[2], F[3],        F[4],
                         F[5],    F[6],    F[8] + F[5], F[8], F[10] + F[3], F[10],
                         F[12] + F[1], F[12], F[13]};
    for (int i = 0; i < 15; ++i)
        pb.conv("lr.c" + std::to_string(i), F[i], cin[i], 3);
    const int din[3] = {F[7], F[9], F[11]};
    const int dout[3] = {F[8], F[10], F[12]};
    for (int j = 0; j < 3; ++j) {
        Rng rng(seed, pb.stream++);
        pb.ids.push_back(m.params->add("lr.d" + std::to_string(j) + ".w",
                                       he_init(dout[j], din[j], 2, rng)));
        pb.ids.push_back(m.params->add("lr.d" + std::to_string(j) + ".b",
                                       Tensor4(1, dout[j], 1, 1)));
    }
    m.lr_param_ids = pb.ids;

    const int C = cfg.hr_filters();
    ParamBuilder hb{*m.params, seed ^ 0x48525f5345454421ULL};
    hb.conv("hr.first", C, 9, 3);
    for (int r = 0; r < cfg.resblock_count; ++r) {
        hb.conv("hr.res" + std::to_string(r) + ".c1", C, C, 3);
        hb.conv("hr.res" + std::to_string(r) + ".c2", C, C, 3);
    }
    hb.conv("hr.pen", C, C, 3);
    hb.conv("hr.last", 3, C, 3);
    m.hr_param_ids = hb.ids;

    m.fx_param_ids = FeatureExtractor::register_params(*m.params, 3,
                                                       seed ^ 0x4658464646582121ULL, "fx");

    const int wa = m.lr_graph.input("warped_a");
    const int wb = m.lr_graph.input("warped_b");
    m.lr_out = emit_lr_branch(m.lr_graph, m.lr_graph.concat({wa, wb}),
                              m.lr_param_ids, &m.lr_layer_nodes);

    const int slr = m.hr_graph.input("s_lr");
    const int ha = m.hr_graph.input("warped_a");
    const int hbn = m.hr_graph.input("warped_b");
    const int up = m.hr_graph.resize_like(slr, ha);
    m.hr_out = emit_hr_branch(m.hr_graph, m.hr_graph.concat({up, ha, hbn}),
                              m.hr_param_ids, cfg.resblock_count);
    return m;
}

Tensor4 forward_lr(const StitchModel& m, const Tensor4& warped_a, const Tensor4& warped_b) {
    Activations acts;
    forward(m.lr_graph, {{"warped_a", warped_a}, {"warped_b", warped_b}}, acts);
    return acts.value[m.lr_out];
}

Tensor4 forward_hr(const StitchModel& m, const Tensor4& s_lr, const Tensor4& warped_a,
                   const Tensor4& warped_b) {
    Activations acts;
    forward(m.hr_graph,
            {{"s_lr", s_lr}, {"warped_a", warped_a}, {"warped_b", warped_b}}, acts);
    return acts.value[m.hr_out];
}

TrainingGraph build_training_graph(const StitchModel& m, const LossWeights& w) {
    TrainingGraph tg(m.params);
    Graph& g = tg.g;

    const int wa_lr = g.input("wa_lr"), wb_lr = g.input("wb_lr");
    const int wa_hr = g.input("wa_hr"), wb_hr = g.input("wb_hr");
    const int ma_lr = g.input("mask_a_lr"), mb_lr = g.input("mask_b_lr");
    const int sa_lr = g.input("seam_a_lr"), sb_lr = g.input("seam_b_lr");
    const int ma_hr = g.input("mask_a_hr"), mb_hr = g.input("mask_b_hr");
    const int sa_hr = g.input("seam_a_hr"), sb_hr = g.input("seam_b_hr");

    tg.s_lr = emit_lr_branch(g, g.concat({wa_lr, wb_lr}), m.lr_param_ids, nullptr);

    auto fx_deep = [&](int x) {
        return FeatureExtractor::emit(g, x, m.fx_param_ids, FeatureExtractor::Tap::Deep);
    };
    auto fx_shallow = [&](int x) {
        return FeatureExtractor::emit(g, x, m.fx_param_ids, FeatureExtractor::Tap::Shallow);
    };

    const int lr_content = g.weighted_sum(
        {g.mse(fx_deep(g.mul_mask(tg.s_lr, ma_lr)), fx_deep(wa_lr)),
         g.mse(fx_deep(g.mul_mask(tg.s_lr, mb_lr)), fx_deep(wb_lr))},
        {1.0, 1.0});
    tg.l_lr_seam = g.weighted_sum({g.masked_l1(tg.s_lr, wa_lr, sa_lr),
                                   g.masked_l1(tg.s_lr, wb_lr, sb_lr)},
                                  {1.0, 1.0});
    tg.l_lr = g.weighted_sum({lr_content, tg.l_lr_seam}, {w.lambda_c, w.lambda_s}, "l_lr");

    const int s_lr_for_hr = m.cfg.joint_lr_hr ? tg.s_lr : g.detach(tg.s_lr);
    const int up = g.resize_like(s_lr_for_hr, wa_hr);
    tg.s_hr = emit_hr_branch(g, g.concat({up, wa_hr, wb_hr}), m.hr_param_ids,
                             m.cfg.resblock_count);

    const int hr_content = g.weighted_sum(
        {g.mse(fx_shallow(g.mul_mask(tg.s_hr, ma_hr)), fx_shallow(wa_hr)),
         g.mse(fx_shallow(g.mul_mask(tg.s_hr, mb_hr)), fx_shallow(wb_hr))},
        {1.0, 1.0});
    tg.l_hr_seam = g.weighted_sum({g.masked_l1(tg.s_hr, wa_hr, sa_hr),
                                   g.masked_l1(tg.s_hr, wb_hr, sb_hr)},
                                  {1.0, 1.0});
    tg.l_hr = g.weighted_sum({hr_content, tg.l_hr_seam}, {w.lambda_c, w.lambda_s}, "l_hr");

    tg.l_cs = g.l1(g.resize_like(tg.s_hr, tg.s_lr), tg.s_lr, "l_cs");
    tg.l_r = g.weighted_sum({tg.l_lr, tg.l_hr, tg.l_cs},
                            {w.omega_lr, w.omega_hr, w.omega_cs}, "l_r");
    return tg;
}

namespace {

Tensor4 resize_clip01(const Tensor4& t, int h, int w) {
    Tensor4 out;
    kernels::resize_bilinear_forward(t, h, w, out);
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

}  // namespace

TrainSample prepare_sample(const StitchModel& m, const AlignmentResult& a) {
    if (a.masks.content_a.data.empty())
        throw std::invalid_argument("prepare_sample: alignment carries no masks");
    const int lh = m.cfg.lr_height, lw = m.cfg.lr_width;
    TrainSample s;
    Tensor4 tmp;
    kernels::resize_bilinear_forward(a.warped_a, lh, lw, tmp);
    s.inputs["wa_lr"] = tmp;
    kernels::resize_bilinear_forward(a.warped_b, lh, lw, tmp);
    s.inputs["wb_lr"] = tmp;
    s.inputs["wa_hr"] = a.warped_a;
    s.inputs["wb_hr"] = a.warped_b;
    s.inputs["mask_a_lr"] = resize_clip01(a.masks.content_a, lh, lw);
    s.inputs["mask_b_lr"] = resize_clip01(a.masks.content_b, lh, lw);
    s.inputs["seam_a_lr"] = resize_clip01(a.masks.seam_a, lh, lw);
    s.inputs["seam_b_lr"] = resize_clip01(a.masks.seam_b, lh, lw);
    s.inputs["mask_a_hr"] = a.masks.content_a;
    s.inputs["mask_b_hr"] = a.masks.content_b;
    s.inputs["seam_a_hr"] = a.masks.seam_a;
    s.inputs["seam_b_hr"] = a.masks.seam_b;
    return s;
}

std::vector<TrainRecord> train(StitchModel& m, const std::vector<AlignmentResult>& dataset,
                               const LossWeights& weights, int epochs, std::uint64_t seed,
                               const AdamConfig& adam) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    TrainingGraph tg = build_training_graph(m, weights);

    std::vector<TrainSample> samples;
    samples.reserve(dataset.size());
    for (const auto& a : dataset) samples.push_back(prepare_sample(m, a));

    AdamOptimizer opt(m.params);
    std::vector<TrainRecord> trace;
    const int n = static_cast<int>(samples.size());
    const long total = static_cast<long>(epochs) * n;
    const long warm = m.cfg.warm_start ? total / 5 : 0;

    int iteration = 0;
    for (int e = 0; e < epochs; ++e) {
        AdamConfig cfg = adam;
        cfg.lr = adam.lr * std::pow(0.96, static_cast<double>(e));

        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        Rng rng(seed, 0x5348554646ULL + static_cast<std::uint64_t>(e));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(0, i)]);

        for (int idx : order) {
            m.params->zero_grads();
            Activations acts;
            forward(tg.g, samples[idx].inputs, acts);
            TrainRecord rec;
            rec.iteration = iteration;
            rec.l_lr = acts.value[tg.l_lr].data[0];
            rec.l_hr = acts.value[tg.l_hr].data[0];
            rec.l_cs = acts.value[tg.l_cs].data[0];
            rec.l_r = acts.value[tg.l_r].data[0];
            rec.seam_lr = acts.value[tg.l_lr_seam].data[0];
            rec.seam_hr = acts.value[tg.l_hr_seam].data[0];
            if (!std::isfinite(rec.l_r))
                throw NumericError("train: objective diverged (non-finite L_R)");
            backward(tg.g, acts, iteration < warm ? tg.l_lr : tg.l_r);
            opt.step(cfg);
            trace.push_back(rec);
            ++iteration;
        }
    }
    return trace;
}

StitchOutput run_stitch(const StitchModel& m, const Tensor4& ref, const Tensor4& target,
                        const PyramidConfig& pyr_cfg) {
    StitchOutput out;
    out.alignment = align_pair(ref, target, pyr_cfg);
    Tensor4 wa_lr, wb_lr;
    kernels::resize_bilinear_forward(out.alignment.warped_a, m.cfg.lr_height,
                                     m.cfg.lr_width, wa_lr);
    kernels::resize_bilinear_forward(out.alignment.warped_b, m.cfg.lr_height,
                                     m.cfg.lr_width, wb_lr);
    out.s_lr = forward_lr(m, wa_lr, wb_lr);
    out.s_hr = forward_hr(m, out.s_lr, out.alignment.warped_a, out.alignment.warped_b);
    out.l_cs = consistency_loss(out.s_hr, out.s_lr);
    return out;
}

std::vector<std::string> dump_feature_maps(const StitchModel& m, const Tensor4& warped_a,
                                           const Tensor4& warped_b,
                                           const std::string& out_dir) {
    Tensor4 wa, wb;
    kernels::resize_bilinear_forward(warped_a, m.cfg.lr_height, m.cfg.lr_width, wa);
    kernels::resize_bilinear_forward(warped_b, m.cfg.lr_height, m.cfg.lr_width, wb);
    Activations acts;
    forward(m.lr_graph, {{"warped_a", wa}, {"warped_b", wb}}, acts);

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < m.lr_layer_nodes.size(); ++i) {
        const Tensor4& act = acts.value[m.lr_layer_nodes[i]];
        Tensor4 mean(1, 1, act.shape.h, act.shape.w);
        for (int y = 0; y < act.shape.h; ++y)
            for (int x = 0; x < act.shape.w; ++x) {
                double s = 0.0;
                for (int c = 0; c < act.shape.c; ++c) s += act.at(0, c, y, x);
                mean.at(0, 0, y, x) = s / act.shape.c;
            }
        const auto [lo, hi] = std::minmax_element(mean.data.begin(), mean.data.end());
        const double range = *hi - *lo;
        for (double& v : mean.data) v = range > 0.0 ? (v - *lo) / range : 0.0;

        char name[32];
        std::snprintf(name, sizeof(name), "layer_%02zu.png", i);
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        io::save_png(mean, path);
        files.push_back(path);
    }
    return files;
}

}  // namespace stitch
