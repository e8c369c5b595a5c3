#include "stitch/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "stitch/align.hpp"
#include "stitch/warpmask.hpp"

namespace stitch {

namespace {

struct OverlapFrame {
    Tensor4 masked_ref;   // H(E) .* ref
    Tensor4 warped_tgt;   // H(target)
    Tensor4 mask;         // H(E)
    double mask_sum = 0.0;
};

OverlapFrame overlap_frame(const Tensor4& ref, const Tensor4& target, const Homography& h) {
    require_same_shape(ref, target, "overlap metrics");
    CanvasSpec frame{ref.shape.w, ref.shape.h, {0.0, 0.0}};
    OverlapFrame f;
    Tensor4 ones(ref.shape.b, 1, ref.shape.h, ref.shape.w, 1.0);
    f.mask = warp_image(ones, h, frame);
    f.warped_tgt = warp_image(target, h, frame);
    f.masked_ref = ref;
    for (int b = 0; b < ref.shape.b; ++b)
        for (int c = 0; c < ref.shape.c; ++c)
            for (int y = 0; y < ref.shape.h; ++y)
                for (int x = 0; x < ref.shape.w; ++x)
                    f.masked_ref.at(b, c, y, x) *= f.mask.at(b, 0, y, x);
    for (double v : f.mask.data) f.mask_sum += v;
    return f;
}

}  // namespace

double psnr_overlap(const Tensor4& ref, const Tensor4& target, const Homography& h) {
    const OverlapFrame f = overlap_frame(ref, target, h);
    if (f.mask_sum < 1.0) throw NumericError("psnr_overlap: empty overlap mask");
    double se = 0.0;
    for (int b = 0; b < ref.shape.b; ++b)
        for (int c = 0; c < ref.shape.c; ++c)
            for (int y = 0; y < ref.shape.h; ++y)
                for (int x = 0; x < ref.shape.w; ++x) {
                    const double d = f.masked_ref.at(b, c, y, x) - f.warped_tgt.at(b, c, y, x);
                    se += f.mask.at(b, 0, y, x) * d * d;
                }
    const double mse = se / (ref.shape.c * f.mask_sum);
    if (mse <= 0.0) return 100.0;  // zero-error cap
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim_overlap(const Tensor4& ref, const Tensor4& target, const Homography& h) {
    const OverlapFrame f = overlap_frame(ref, target, h);
    const Tensor4 a = to_luma(f.masked_ref);
    const Tensor4 b = to_luma(f.warped_tgt);
    const int H = a.shape.h, W = a.shape.w;

    constexpr int kWin = 11, kHalf = 5;
    constexpr double kSigma = 1.5, kK1 = 0.01, kK2 = 0.03, kL = 1.0;
    const double c1 = (kK1 * kL) * (kK1 * kL);
    const double c2 = (kK2 * kL) * (kK2 * kL);

    double gw[kWin][kWin];
    double gsum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - kHalf, dx = j - kHalf;
            gw[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            gsum += gw[i][j];
        }
    for (auto& row : gw)
        for (double& v : row) v /= gsum;

    // a pixel is valid when the warped all-one mask is (numerically) full
    std::vector<char> valid(static_cast<std::size_t>(H) * W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            valid[static_cast<std::size_t>(y) * W + x] = f.mask.at(0, 0, y, x) > 0.999;

    double total = 0.0;
    long windows = 0;
    for (int y = kHalf; y < H - kHalf; ++y)
        for (int x = kHalf; x < W - kHalf; ++x) {
            bool inside = true;
            for (int i = -kHalf; i <= kHalf && inside; ++i)
                for (int j = -kHalf; j <= kHalf; ++j)
                    if (!valid[static_cast<std::size_t>(y + i) * W + (x + j)]) {
                        inside = false;
                        break;
                    }
            if (!inside) continue;
            double mx = 0, my = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    mx += gw[i][j] * a.at(0, 0, y + i - kHalf, x + j - kHalf);
                    my += gw[i][j] * b.at(0, 0, y + i - kHalf, x + j - kHalf);
                }
            double vx = 0, vy = 0, cov = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double da = a.at(0, 0, y + i - kHalf, x + j - kHalf) - mx;
                    const double db = b.at(0, 0, y + i - kHalf, x + j - kHalf) - my;
                    vx += gw[i][j] * da * da;
                    vy += gw[i][j] * db * db;
                    cov += gw[i][j] * da * db;
                }
            total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    if (windows == 0)
        throw NumericError("ssim_overlap: overlap too small for an 11x11 window");
    return total / static_cast<double>(windows);
}

double four_pt_rmse(const FourPointOffsets& estimated, const FourPointOffsets& truth) {
    if (!estimated.all_finite() || !truth.all_finite())
        throw std::invalid_argument("four_pt_rmse: non-finite offsets");
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double dx = estimated.d[k].x - truth.d[k].x;
        const double dy = estimated.d[k].y - truth.d[k].y;
        s += dx * dx + dy * dy;
    }
    return std::sqrt(s / 8.0);
}

OverlapLevel classify_overlap(double rate) {
    if (rate < 0.0 || rate > 1.0)
        throw std::invalid_argument("classify_overlap: rate outside [0,1]");
    if (rate > 0.9) return OverlapLevel::HIGH;
    if (rate >= 0.6) return OverlapLevel::MIDDLE;
    return OverlapLevel::LOW;
}

ParallaxLevel classify_parallax(double err) {
    if (err < 0.0) throw std::invalid_argument("classify_parallax: negative error");
    return err < 30.0 ? ParallaxLevel::SMALL : ParallaxLevel::LARGE;
}

const char* to_string(OverlapLevel l) {
    switch (l) {
        case OverlapLevel::HIGH: return "HIGH";
        case OverlapLevel::MIDDLE: return "MIDDLE";
        default: return "LOW";
    }
}
const char* to_string(ParallaxLevel l) {
    return l == ParallaxLevel::SMALL ? "SMALL" : "LARGE";
}

EvalReport build_report(std::vector<EvalSample> samples, bool higher_is_better) {
    if (samples.size() < 10)
        throw std::invalid_argument("build_report: need at least 10 samples");
    // best-performing samples first ("Top 0-30%" is the easiest tranche)
    std::stable_sort(samples.begin(), samples.end(),
                     [&](const EvalSample& a, const EvalSample& b) {
                         return higher_is_better ? a.metric > b.metric : a.metric < b.metric;
                     });
    const int n = static_cast<int>(samples.size());
    const int b1 = static_cast<int>(std::floor(0.3 * n));
    const int b2 = static_cast<int>(std::floor(0.6 * n));

    EvalReport r;
    r.higher_is_better = higher_is_better;
    r.sorted_samples = std::move(samples);
    auto bucket = [&](const std::string& label, int lo, int hi) {
        BucketStats s{label, hi - lo, 0.0};
        for (int i = lo; i < hi; ++i) s.mean += r.sorted_samples[i].metric;
        if (s.count > 0) s.mean /= s.count;
        r.buckets.push_back(s);
    };
    bucket("top_0_30", 0, b1);
    bucket("30_60", b1, b2);
    bucket("60_100", b2, n);
    for (const auto& s : r.sorted_samples) r.overall_mean += s.metric;
    r.overall_mean /= n;
    return r;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["higher_is_better"] = higher_is_better;
    j["overall_mean"] = overall_mean;
    j["buckets"] = nlohmann::json::array();
    for (const auto& b : buckets)
        j["buckets"].push_back({{"label", b.label}, {"count", b.count}, {"mean", b.mean}});
    j["samples"] = nlohmann::json::array();
    for (const auto& s : sorted_samples)
        j["samples"].push_back({{"id", s.id}, {"metric", s.metric}});
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.higher_is_better = j.at("higher_is_better");
    r.overall_mean = j.at("overall_mean");
    for (const auto& b : j.at("buckets"))
        r.buckets.push_back({b.at("label"), b.at("count"), b.at("mean")});
    for (const auto& s : j.at("samples"))
        r.sorted_samples.push_back({s.at("id"), s.at("metric")});
    return r;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "bucket      count  mean\n";
    for (const auto& b : buckets) {
        os << b.label;
        for (std::size_t i = b.label.size(); i < 12; ++i) os << ' ';
        os << b.count << "      " << b.mean << "\n";
    }
    os << "overall mean over " << sorted_samples.size() << " samples: " << overall_mean << "\n";
    return os.str();
}

}  // namespace stitch
