#pragma once

#include <cstdint>

#include "stitch/align.hpp"
#include "stitch/graph.hpp"
#include "stitch/losses.hpp"

namespace stitch {

struct BranchConfig {
    double channel_scale = 0.125;  // 1.0 = full-size filter counts
    int lr_height = 64, lr_width = 64;
    int resblock_count = 4;  // 8 at full size

    // Backpropagate the HR branch into the LR branch through the upsampled
    // low-resolution stitch (joint graph). Off detaches that edge.
    bool joint_lr_hr = true;

    // Optional LR-only warm start for the first 20% of iterations.
    bool warm_start = false;

    void validate() const;
    std::vector<int> lr_filters() const;  // 15 entries, last pinned to 3
    int hr_filters() const;
};

// Two-branch reconstruction model over a single parameter store. The frozen
// perceptual stack shares its first three stages between the deep and
// shallow taps.
struct StitchModel {
    BranchConfig cfg;
    std::shared_ptr<ParamStore> params;

    Graph lr_graph;  // inputs: warped_a, warped_b (LR size) -> "s_lr"
    Graph hr_graph;  // inputs: s_lr, warped_a, warped_b (canvas) -> "s_hr"
    int lr_out = -1;
    int hr_out = -1;
    std::vector<int> lr_param_ids, hr_param_ids, fx_param_ids;
    std::vector<int> lr_layer_nodes;  // per-layer activations, for dumping

    StitchModel() : params(std::make_shared<ParamStore>()), lr_graph(params), hr_graph(params) {}
};

StitchModel build_model(const BranchConfig& cfg, std::uint64_t seed);

Tensor4 forward_lr(const StitchModel& m, const Tensor4& warped_a, const Tensor4& warped_b);
Tensor4 forward_hr(const StitchModel& m, const Tensor4& s_lr, const Tensor4& warped_a,
                   const Tensor4& warped_b);

// Full differentiable objective (both branches plus the consistency term)
// over the shared parameter store. Built once per training run.
struct TrainingGraph {
    Graph g;
    int s_lr = -1, s_hr = -1;
    int l_lr = -1, l_hr = -1, l_cs = -1, l_r = -1;
    int l_lr_seam = -1, l_hr_seam = -1;

    explicit TrainingGraph(std::shared_ptr<ParamStore> p) : g(std::move(p)) {}
};

TrainingGraph build_training_graph(const StitchModel& m, const LossWeights& w);

// Per-sample tensors the training graph consumes.
struct TrainSample {
    std::map<std::string, Tensor4> inputs;
};
TrainSample prepare_sample(const StitchModel& m, const AlignmentResult& a);

struct TrainRecord {
    int iteration = 0;
    double l_lr = 0, l_hr = 0, l_cs = 0, l_r = 0;
    double seam_lr = 0, seam_hr = 0;
};

// Joint unsupervised training; Adam with exponentially decaying learning
// rate (x0.96 per epoch). Deterministic given seed and data order.
std::vector<TrainRecord> train(StitchModel& m, const std::vector<AlignmentResult>& dataset,
                               const LossWeights& weights, int epochs, std::uint64_t seed,
                               const AdamConfig& adam = {});

struct StitchOutput {
    Tensor4 s_lr;
    Tensor4 s_hr;  // unclamped; clamp to [0,1] at export
    AlignmentResult alignment;
    double l_cs = 0.0;
};

StitchOutput run_stitch(const StitchModel& m, const Tensor4& ref, const Tensor4& target,
                        const PyramidConfig& pyr_cfg);

// Writes per-layer channel-mean LR-branch activations as grayscale PNGs
// (layer_00.png, layer_01.png, ... ordered by depth), normalized per layer.
std::vector<std::string> dump_feature_maps(const StitchModel& m, const Tensor4& warped_a,
                                           const Tensor4& warped_b, const std::string& out_dir);

}  // namespace stitch
