#pragma once

#include "stitch/geometry.hpp"
#include "stitch/tensor.hpp"
#include "stitch/warpmask.hpp"

namespace stitch {

struct PyramidConfig {
    int levels = 3;
    int iterations_per_level = 200;
    double step_init = 1.0;        // px at the current pyramid level
    double step_decay = 0.5;       // applied on plateau
    double max_offset = 0.0;       // px trust region; 0 = 0.45 * image width
    double min_overlap_rate = 0.10;
    double plateau_rel_improvement = 1e-4;
    int plateau_window = 10;
    double min_step = 1e-3;
};

struct AlignmentResult {
    FourPointOffsets offsets;
    Homography homography;
    CanvasSpec canvas;
    Tensor4 warped_a;
    Tensor4 warped_b;
    MaskSet masks;
    double final_loss = 0.0;
    bool degenerate = false;
    std::vector<double> loss_trace;  // accepted per-iteration losses, all levels
};

// Loss, analytic gradient and overlap diagnostics of the ablation objective
// at a given offset vector, on single-channel images in the reference frame.
struct AblationEval {
    double loss = 0.0;
    std::array<double, 8> grad{};  // d loss / d (dx1,dy1,dx2,dy2,dx3,dy3,dx4,dy4)
    double overlap = 0.0;          // warped-mask area / image area
    bool degenerate = false;
};

AblationEval eval_ablation(const Tensor4& ref_luma, const Tensor4& target_luma,
                           const FourPointOffsets& offsets);

// Luma projection 0.299 R + 0.587 G + 0.114 B (identity on 1-channel input).
Tensor4 to_luma(const Tensor4& rgb);

// Coarse-to-fine direct minimization of the ablation loss over the 8 corner
// offsets. Deterministic; accepted steps never increase the level loss.
FourPointOffsets estimate_offsets(const Tensor4& ref, const Tensor4& target,
                                  const PyramidConfig& cfg,
                                  std::vector<double>* loss_trace = nullptr);

AlignmentResult align_pair(const Tensor4& ref, const Tensor4& target,
                           const PyramidConfig& cfg);

}  // namespace stitch
