#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "stitch/tensor.hpp"

namespace stitch {

// Named parameter registry shared by one or more graphs. Gradients are
// accumulated here by Graph backward passes; frozen parameters are never
// updated by the optimizer.
class ParamStore {
  public:
    int add(const std::string& name, Tensor4 value, bool frozen = false);
    int count() const { return static_cast<int>(values_.size()); }

    Tensor4& value(int id) { return values_.at(id); }
    const Tensor4& value(int id) const { return values_.at(id); }
    Tensor4& grad(int id) { return grads_.at(id); }
    const Tensor4& grad(int id) const { return grads_.at(id); }
    const std::string& name(int id) const { return names_.at(id); }
    bool frozen(int id) const { return frozen_.at(id); }

    void zero_grads();

    // Checkpoint: "STCHCKPT", u32 version, u32 json length, topology JSON
    // (names + shapes + frozen flags), then raw little-endian float64
    // buffers in registry order.
    void save(const std::string& path) const;
    void load(const std::string& path);  // shapes must match this registry

  private:
    std::vector<Tensor4> values_;
    std::vector<Tensor4> grads_;
    std::vector<std::string> names_;
    std::vector<bool> frozen_;
};

enum class OpKind {
    Input,
    Conv3x3,
    Relu,
    MaxPool2x2,
    Deconv2x2,
    AddSkip,
    ConcatChannels,
    ResizeBilinear,  // fixed target size, or match a reference node
    MulBroadcast,    // x * mask, mask single-channel broadcast over channels
    Detach,          // identity value, blocks gradient
    ReduceSum,       // scalar
    L1Loss,          // mean |a-b|, scalar
    MaskedL1Loss,    // sum(|a-b| .* m) / (C * sum(m)), scalar
    MseLoss,         // mean (a-b)^2, scalar
    WeightedSum,     // scalar combination of scalar nodes
};

struct Node {
    OpKind kind;
    std::string name;         // optional; named nodes appear in forward_named
    std::vector<int> inputs;  // node indices
    int w_param = -1;
    int b_param = -1;
    int out_h = 0, out_w = 0;      // ResizeBilinear fixed target (0,0 = use ref input)
    std::vector<double> weights;   // WeightedSum coefficients
};

// Static, acyclic compute graph over a shared ParamStore. Nodes are appended
// in topological order; shapes are inferred at forward time so one graph
// serves any canvas size.
class Graph {
  public:
    explicit Graph(std::shared_ptr<ParamStore> params) : params_(std::move(params)) {}

    int input(const std::string& name);
    int conv3x3(int x, int w_param, int b_param, const std::string& name = "");
    int relu(int x, const std::string& name = "");
    int maxpool2x2(int x, const std::string& name = "");
    int deconv2x2(int x, int w_param, int b_param, const std::string& name = "");
    int add(int a, int b, const std::string& name = "");
    int concat(const std::vector<int>& xs, const std::string& name = "");
    int resize_to(int x, int h, int w, const std::string& name = "");
    int resize_like(int x, int ref, const std::string& name = "");
    int mul_mask(int x, int mask, const std::string& name = "");
    int detach(int x, const std::string& name = "");
    int reduce_sum(int x, const std::string& name = "");
    int l1(int a, int b, const std::string& name = "");
    int masked_l1(int a, int b, int mask, const std::string& name = "");
    int mse(int a, int b, const std::string& name = "");
    int weighted_sum(const std::vector<int>& xs, const std::vector<double>& ws,
                     const std::string& name = "");

    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_.at(i); }
    int find(const std::string& name) const;  // -1 if absent
    const std::shared_ptr<ParamStore>& params() const { return params_; }

  private:
    int push(Node n);
    std::shared_ptr<ParamStore> params_;
    std::vector<Node> nodes_;
};

// Per-run activation storage; one per concurrent forward/backward.
struct Activations {
    std::vector<Tensor4> value;
    std::vector<std::vector<int>> pool_argmax;
    std::vector<Tensor4> grad;  // filled by backward
    bool forward_done = false;
};

void forward(const Graph& g, const std::map<std::string, Tensor4>& inputs,
             Activations& acts);

// Convenience per the engine contract: returns every named node's output.
std::map<std::string, Tensor4> forward_named(const Graph& g,
                                             const std::map<std::string, Tensor4>& inputs,
                                             Activations& acts);

// Accumulates parameter gradients into the store; input/intermediate grads
// are left in acts.grad. loss_node must be scalar (1,1,1,1).
void backward(const Graph& g, Activations& acts, int loss_node);

// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamOptimizer {
  public:
    explicit AdamOptimizer(std::shared_ptr<ParamStore> params);
    void step(const AdamConfig& cfg);
    long step_count() const { return t_; }

  private:
    std::shared_ptr<ParamStore> params_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------

// Single-layer description for gradient checking.
struct LayerSpec {
    OpKind kind = OpKind::Relu;
    int in_channels = 0;
    int out_channels = 0;
    Tensor4 weight;  // conv/deconv
    Tensor4 bias;
    int resize_h = 0, resize_w = 0;
};

// Max over all parameters and inputs of
// |analytic - central difference| / max(|analytic|, |difference|, 1e-8).
double grad_check(const LayerSpec& layer, const Tensor4& input, double epsilon);

}  // namespace stitch
