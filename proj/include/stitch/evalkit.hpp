#pragma once

#include <string>
#include <vector>

#include "stitch/geometry.hpp"
#include "stitch/tensor.hpp"

namespace stitch {

enum class OverlapLevel { HIGH, MIDDLE, LOW };
enum class ParallaxLevel { SMALL, LARGE };

// PSNR over the valid pixels of the overlap, peak 1.0; zero-MSE results are
// capped at 100 dB. Computed as PSNR(H(E) .* ref, H(target)) in the
// reference frame.
double psnr_overlap(const Tensor4& ref, const Tensor4& target, const Homography& h);

// Single-scale SSIM (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03,
// L=1) on luma, averaged over windows fully inside the overlap mask.
double ssim_overlap(const Tensor4& ref, const Tensor4& target, const Homography& h);

// Root-mean-square over the eight corner-offset scalars.
double four_pt_rmse(const FourPointOffsets& estimated, const FourPointOffsets& truth);

OverlapLevel classify_overlap(double rate);           // HIGH > 0.9, MIDDLE 0.6-0.9, LOW < 0.6
ParallaxLevel classify_parallax(double max_misalignment_px);  // SMALL < 30 px

const char* to_string(OverlapLevel l);
const char* to_string(ParallaxLevel l);

struct EvalSample {
    std::string id;
    double metric = 0.0;  // the quantity being bucketed and averaged
};

struct BucketStats {
    std::string label;
    int count = 0;
    double mean = 0.0;
};

// Percentile-bucketed report: samples sorted best-first by the metric under
// report, aggregated over the 0-30%, 30-60% and 60-100% tranches.
struct EvalReport {
    std::vector<EvalSample> sorted_samples;
    std::vector<BucketStats> buckets;  // three tranches
    double overall_mean = 0.0;
    bool higher_is_better = false;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
    std::string to_text() const;  // aligned-column plain text
};

EvalReport build_report(std::vector<EvalSample> samples, bool higher_is_better);

}  // namespace stitch
