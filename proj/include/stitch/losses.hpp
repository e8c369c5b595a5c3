#pragma once

#include <cstdint>
#include <memory>

#include "stitch/geometry.hpp"
#include "stitch/graph.hpp"
#include "stitch/tensor.hpp"

namespace stitch {

struct LossWeights {
    double lambda_s = 2.0;     // seam weight
    double lambda_c = 1e-6;    // content weight
    double omega_lr = 100.0;
    double omega_hr = 1.0;
    double omega_cs = 1.0;
};

// Frozen, seeded conv stack standing in for pretrained VGG taps: each stage
// is conv3x3 + relu + maxpool2x2. SHALLOW taps after 3 stages, DEEP after 5.
// Parameters never receive optimizer updates. An externally supplied
// checkpoint can replace the seeded weights.
class FeatureExtractor {
  public:
    enum class Tap { Shallow = 3, Deep = 5 };

    static constexpr int kStages = 5;

    FeatureExtractor(Tap tap, int in_channels, std::uint64_t seed);

    // Register the frozen stage parameters into an external store (for
    // embedding into a training graph). Returns w/b ids interleaved.
    static std::vector<int> register_params(ParamStore& store, int in_channels,
                                            std::uint64_t seed, const std::string& prefix);

    // Append the feature stack for node x to g; params must belong to
    // g->params(). Returns the tap node.
    static int emit(Graph& g, int x, const std::vector<int>& param_ids, Tap tap);

    Tensor4 features(const Tensor4& img) const;
    Tap tap() const { return tap_; }

    // Overwrite the seeded stage weights from a checkpoint file whose
    // registry matches this extractor's parameter layout.
    void load_external_weights(const std::string& path);

  private:
    Tap tap_;
    std::shared_ptr<ParamStore> store_;
    std::vector<int> param_ids_;
    Graph graph_;
    int input_node_ = -1;
    int tap_node_ = -1;
};

// Eq-style photometric objectives -------------------------------------------

// Mean absolute difference over two equally shaped patches (padding-based
// strategy: every pixel counts, invalid regions having been padded upstream).
double padding_loss(const Tensor4& ref_patch, const Tensor4& warped_target_patch);

struct AblationLossResult {
    double value = 0.0;
    bool degenerate = false;  // warped validity mask sums below one pixel
};

// Ablation-based objective in the reference frame: warp the target and an
// all-one mask by h, then take the valid-pixel mean of
// |mask .* ref - warped_target|.
AblationLossResult ablation_loss(const Tensor4& ref, const Tensor4& target,
                                 const Homography& h);

// Mean squared difference between the two feature maps at the extractor tap.
double perceptual_distance(const Tensor4& a, const Tensor4& b,
                           const FeatureExtractor& fx);

// L_P(S .* mask_a, warped_a) + L_P(S .* mask_b, warped_b)
double content_loss(const Tensor4& stitched, const Tensor4& warped_a,
                    const Tensor4& warped_b, const Tensor4& mask_a,
                    const Tensor4& mask_b, const FeatureExtractor& fx);

// Masked-mean L1 of the stitched image against each warped image over its
// seam band, summed over the two bands.
double seam_loss(const Tensor4& stitched, const Tensor4& warped_a,
                 const Tensor4& warped_b, const Tensor4& seam_a,
                 const Tensor4& seam_b);

double stage_total(double content, double seam, const LossWeights& w);

// Resize s_hr down to s_lr's spatial size, mean absolute difference.
double consistency_loss(const Tensor4& s_hr, const Tensor4& s_lr);

double reconstruction_objective(double l_lr, double l_hr, double l_cs,
                                const LossWeights& w);

// Shared helper: sum(|a-b| .* m) / (channels * sum(m)); 0 on empty mask.
double masked_mean_abs(const Tensor4& a, const Tensor4& b, const Tensor4& mask);

}  // namespace stitch
