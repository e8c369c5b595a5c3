#include "stitch/graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "stitch/kernels.hpp"

namespace stitch {

// ---------------------------------------------------------------------------
// ParamStore

int ParamStore::add(const std::string& name, Tensor4 value, bool frozen) {
    for (const auto& n : names_)
        if (n == name) throw std::invalid_argument("ParamStore: duplicate name " + name);
    grads_.emplace_back(value.shape);
    values_.push_back(std::move(value));
    names_.push_back(name);
    frozen_.push_back(frozen);
    return static_cast<int>(values_.size()) - 1;
}

void ParamStore::zero_grads() {
    for (auto& g : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
}

namespace {
constexpr char kCkptMagic[8] = {'S', 'T', 'C', 'H', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64_le(std::ostream& os, const std::vector<double>& v) {
    // assumes little-endian host (x86/arm64); asserted via a runtime probe
    static_assert(sizeof(double) == 8);
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * 8));
}
}  // namespace

void ParamStore::save(const std::string& path) const {
    nlohmann::json topo = nlohmann::json::array();
    for (int i = 0; i < count(); ++i) {
        const Shape4& s = values_[i].shape;
        topo.push_back({{"name", names_[i]},
                        {"shape", {s.b, s.c, s.h, s.w}},
                        {"frozen", static_cast<bool>(frozen_[i])}});
    }
    const std::string js = topo.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for write: " + path);
    os.write(kCkptMagic, 8);
    write_u32(os, kCkptVersion);
    write_u32(os, static_cast<std::uint32_t>(js.size()));
    os.write(js.data(), static_cast<std::streamsize>(js.size()));
    for (const auto& v : values_) write_f64_le(os, v.data);
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

void ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    if (read_u32(is) != kCkptVersion) throw DataError("checkpoint: unsupported version");
    const std::uint32_t jlen = read_u32(is);
    std::string js(jlen, '\0');
    is.read(js.data(), jlen);
    nlohmann::json topo = nlohmann::json::parse(js);
    if (static_cast<int>(topo.size()) != count())
        throw DataError("checkpoint: parameter count mismatch");
    for (int i = 0; i < count(); ++i) {
        const auto sh = topo[i]["shape"];
        Shape4 s{sh[0], sh[1], sh[2], sh[3]};
        if (!(s == values_[i].shape) || topo[i]["name"] != names_[i])
            throw DataError("checkpoint: topology mismatch at " + names_[i]);
        is.read(reinterpret_cast<char*>(values_[i].data.data()),
                static_cast<std::streamsize>(values_[i].data.size() * 8));
    }
    if (!is) throw DataError("checkpoint: truncated file " + path);
}

// ---------------------------------------------------------------------------
// Graph construction

int Graph::push(Node n) {
    for (int i : n.inputs)
        if (i < 0 || i >= size())
            throw std::invalid_argument("Graph: input edge out of range");
    nodes_.push_back(std::move(n));
    return size() - 1;
}

int Graph::input(const std::string& name) {
    if (name.empty()) throw std::invalid_argument("Graph: inputs must be named");
    return push({OpKind::Input, name, {}});
}
int Graph::conv3x3(int x, int w, int b, const std::string& name) {
    Node n{OpKind::Conv3x3, name, {x}};
    n.w_param = w;
    n.b_param = b;
    return push(std::move(n));
}
int Graph::relu(int x, const std::string& name) { return push({OpKind::Relu, name, {x}}); }
int Graph::maxpool2x2(int x, const std::string& name) { return push({OpKind::MaxPool2x2, name, {x}}); }
int Graph::deconv2x2(int x, int w, int b, const std::string& name) {
    Node n{OpKind::Deconv2x2, name, {x}};
    n.w_param = w;
    n.b_param = b;
    return push(std::move(n));
}
int Graph::add(int a, int b, const std::string& name) { return push({OpKind::AddSkip, name, {a, b}}); }
int Graph::concat(const std::vector<int>& xs, const std::string& name) {
    if (xs.empty()) throw std::invalid_argument("Graph: concat of nothing");
    return push({OpKind::ConcatChannels, name, xs});
}
int Graph::resize_to(int x, int h, int w, const std::string& name) {
    Node n{OpKind::ResizeBilinear, name, {x}};
    n.out_h = h;
    n.out_w = w;
    return push(std::move(n));
}
int Graph::resize_like(int x, int ref, const std::string& name) {
    return push({OpKind::ResizeBilinear, name, {x, ref}});
}
int Graph::mul_mask(int x, int mask, const std::string& name) {
    return push({OpKind::MulBroadcast, name, {x, mask}});
}
int Graph::detach(int x, const std::string& name) { return push({OpKind::Detach, name, {x}}); }
int Graph::reduce_sum(int x, const std::string& name) { return push({OpKind::ReduceSum, name, {x}}); }
int Graph::l1(int a, int b, const std::string& name) { return push({OpKind::L1Loss, name, {a, b}}); }
int Graph::masked_l1(int a, int b, int mask, const std::string& name) {
    return push({OpKind::MaskedL1Loss, name, {a, b, mask}});
}
int Graph::mse(int a, int b, const std::string& name) { return push({OpKind::MseLoss, name, {a, b}}); }
int Graph::weighted_sum(const std::vector<int>& xs, const std::vector<double>& ws,
                        const std::string& name) {
    if (xs.size() != ws.size())
        throw std::invalid_argument("Graph: weighted_sum arity mismatch");
    Node n{OpKind::WeightedSum, name, xs};
    n.weights = ws;
    return push(std::move(n));
}

int Graph::find(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
        if (nodes_[i].name == name) return i;
    return -1;
}

// ---------------------------------------------------------------------------
// forward

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void node_error(const Node& n, int idx, const std::string& what) {
    throw NumericError("node " + std::to_string(idx) +
                       (n.name.empty() ? "" : " (" + n.name + ")") + ": " + what);
}

}  // namespace

void forward(const Graph& g, const std::map<std::string, Tensor4>& inputs,
             Activations& acts) {
    const auto& store = *g.params();
    acts.value.assign(g.size(), Tensor4());
    acts.pool_argmax.assign(g.size(), {});
    acts.grad.clear();
    acts.forward_done = false;

    for (int i = 0; i < g.size(); ++i) {
        const Node& n = g.node(i);
        Tensor4& out = acts.value[i];
        auto in = [&](int k) -> const Tensor4& { return acts.value[n.inputs[k]]; };
        switch (n.kind) {
            case OpKind::Input: {
                auto it = inputs.find(n.name);
                if (it == inputs.end())
                    throw std::invalid_argument("forward: missing input '" + n.name + "'");
                out = it->second;
                out.grad.clear();
                break;
            }
            case OpKind::Conv3x3:
                kernels::conv3x3_forward(in(0), store.value(n.w_param),
                                         store.value(n.b_param), out);
                break;
            case OpKind::Relu:
                kernels::relu_forward(in(0), out);
                break;
            case OpKind::MaxPool2x2:
                kernels::maxpool2x2_forward(in(0), out, acts.pool_argmax[i]);
                break;
            case OpKind::Deconv2x2:
                kernels::deconv2x2_forward(in(0), store.value(n.w_param),
                                           store.value(n.b_param), out);
                break;
            case OpKind::AddSkip: {
                if (!(in(0).shape == in(1).shape)) node_error(n, i, "add shape mismatch");
                out = in(0);
                for (std::size_t k = 0; k < out.data.size(); ++k)
                    out.data[k] += in(1).data[k];
                break;
            }
            case OpKind::ConcatChannels: {
                const Tensor4& first = in(0);
                int total_c = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    const Tensor4& t = in(static_cast<int>(k));
                    if (t.shape.b != first.shape.b || t.shape.h != first.shape.h ||
                        t.shape.w != first.shape.w)
                        node_error(n, i, "concat spatial mismatch");
                    total_c += t.shape.c;
                }
                out = Tensor4(first.shape.b, total_c, first.shape.h, first.shape.w);
                int c0 = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    const Tensor4& t = in(static_cast<int>(k));
                    for (int b = 0; b < t.shape.b; ++b)
                        for (int c = 0; c < t.shape.c; ++c)
                            std::copy_n(&t.data[t.idx(b, c, 0, 0)],
                                        static_cast<std::size_t>(t.shape.h) * t.shape.w,
                                        &out.data[out.idx(b, c0 + c, 0, 0)]);
                    c0 += t.shape.c;
                }
                break;
            }
            case OpKind::ResizeBilinear: {
                int oh = n.out_h, ow = n.out_w;
                if (n.inputs.size() == 2) {
                    oh = in(1).shape.h;
                    ow = in(1).shape.w;
                }
                kernels::resize_bilinear_forward(in(0), oh, ow, out);
                break;
            }
            case OpKind::MulBroadcast: {
                const Tensor4& x = in(0);
                const Tensor4& m = in(1);
                if (m.shape.c != 1 || m.shape.h != x.shape.h || m.shape.w != x.shape.w ||
                    m.shape.b != x.shape.b)
                    node_error(n, i, "mask must be (b,1,h,w) matching input");
                out = Tensor4(x.shape);
                for (int b = 0; b < x.shape.b; ++b)
                    for (int c = 0; c < x.shape.c; ++c)
                        for (int y = 0; y < x.shape.h; ++y)
                            for (int xx = 0; xx < x.shape.w; ++xx)
                                out.at(b, c, y, xx) = x.at(b, c, y, xx) * m.at(b, 0, y, xx);
                break;
            }
            case OpKind::Detach:
                out = in(0);
                out.grad.clear();
                break;
            case OpKind::ReduceSum: {
                double s = 0.0;
                for (double v : in(0).data) s += v;
                out = Tensor4(1, 1, 1, 1, s);
                break;
            }
            case OpKind::L1Loss: {
                if (!(in(0).shape == in(1).shape)) node_error(n, i, "L1 shape mismatch");
                double s = 0.0;
                for (std::size_t k = 0; k < in(0).data.size(); ++k)
                    s += std::abs(in(0).data[k] - in(1).data[k]);
                out = Tensor4(1, 1, 1, 1, s / static_cast<double>(in(0).data.size()));
                break;
            }
            case OpKind::MaskedL1Loss: {
                const Tensor4& a = in(0);
                const Tensor4& b = in(1);
                const Tensor4& m = in(2);
                if (!(a.shape == b.shape)) node_error(n, i, "masked L1 shape mismatch");
                if (m.shape.c != 1 || m.shape.h != a.shape.h || m.shape.w != a.shape.w)
                    node_error(n, i, "masked L1 mask shape mismatch");
                double msum = 0.0;
                for (double v : m.data) msum += v;
                double s = 0.0;
                if (msum > 0.0) {
                    for (int bb = 0; bb < a.shape.b; ++bb)
                        for (int c = 0; c < a.shape.c; ++c)
                            for (int y = 0; y < a.shape.h; ++y)
                                for (int x = 0; x < a.shape.w; ++x)
                                    s += std::abs(a.at(bb, c, y, x) - b.at(bb, c, y, x)) *
                                         m.at(bb, 0, y, x);
                    s /= (a.shape.c * msum);
                }
                out = Tensor4(1, 1, 1, 1, s);
                break;
            }
            case OpKind::MseLoss: {
                if (!(in(0).shape == in(1).shape)) node_error(n, i, "MSE shape mismatch");
                double s = 0.0;
                for (std::size_t k = 0; k < in(0).data.size(); ++k) {
                    const double d = in(0).data[k] - in(1).data[k];
                    s += d * d;
                }
                out = Tensor4(1, 1, 1, 1, s / static_cast<double>(in(0).data.size()));
                break;
            }
            case OpKind::WeightedSum: {
                double s = 0.0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    if (in(static_cast<int>(k)).data.size() != 1)
                        node_error(n, i, "weighted_sum input not scalar");
                    s += n.weights[k] * in(static_cast<int>(k)).data[0];
                }
                out = Tensor4(1, 1, 1, 1, s);
                break;
            }
        }
        if (!out.all_finite()) node_error(n, i, "non-finite activation");
    }
    acts.forward_done = true;
}

std::map<std::string, Tensor4> forward_named(const Graph& g,
                                             const std::map<std::string, Tensor4>& inputs,
                                             Activations& acts) {
    forward(g, inputs, acts);
    std::map<std::string, Tensor4> out;
    for (int i = 0; i < g.size(); ++i)
        if (!g.node(i).name.empty()) out[g.node(i).name] = acts.value[i];
    return out;
}

// ---------------------------------------------------------------------------
// backward

void backward(const Graph& g, Activations& acts, int loss_node) {
    if (!acts.forward_done)
        throw std::logic_error("backward: forward has not been run");
    if (loss_node < 0 || loss_node >= g.size())
        throw std::invalid_argument("backward: bad loss node");
    if (acts.value[loss_node].data.size() != 1)
        throw std::invalid_argument("backward: loss node is not scalar");

    auto& store = *g.params();
    acts.grad.assign(g.size(), Tensor4());
    acts.grad[loss_node] = Tensor4(1, 1, 1, 1, 1.0);

    for (int i = loss_node; i >= 0; --i) {
        const Node& n = g.node(i);
        if (acts.grad[i].data.empty()) continue;  // not on a path to the loss
        const Tensor4& gout = acts.grad[i];
        auto in_val = [&](int k) -> const Tensor4& { return acts.value[n.inputs[k]]; };
        auto gin = [&](int k) -> Tensor4& {
            Tensor4& t = acts.grad[n.inputs[k]];
            if (t.data.empty()) t = Tensor4(acts.value[n.inputs[k]].shape);
            return t;
        };
        switch (n.kind) {
            case OpKind::Input:
            case OpKind::Detach:
                break;  // no propagation (Detach blocks by contract)
            case OpKind::Conv3x3: {
                Tensor4 gx;
                kernels::conv3x3_backward_input(gout, store.value(n.w_param), gx);
                Tensor4& acc = gin(0);
                for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += gx.data[k];
                Tensor4 gw, gb;
                kernels::conv3x3_backward_params(in_val(0), gout, gw, gb);
                auto& wgrad = store.grad(n.w_param);
                auto& bgrad = store.grad(n.b_param);
                for (std::size_t k = 0; k < gw.data.size(); ++k) wgrad.data[k] += gw.data[k];
                for (std::size_t k = 0; k < gb.data.size(); ++k) bgrad.data[k] += gb.data[k];
                break;
            }
            case OpKind::Deconv2x2: {
                Tensor4 gx;
                kernels::deconv2x2_backward_input(gout, store.value(n.w_param), gx);
                Tensor4& acc = gin(0);
                for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += gx.data[k];
                Tensor4 gw, gb;
                kernels::deconv2x2_backward_params(in_val(0), gout, gw, gb);
                auto& wgrad = store.grad(n.w_param);
                auto& bgrad = store.grad(n.b_param);
                for (std::size_t k = 0; k < gw.data.size(); ++k) wgrad.data[k] += gw.data[k];
                for (std::size_t k = 0; k < gb.data.size(); ++k) bgrad.data[k] += gb.data[k];
                break;
            }
            case OpKind::Relu:
                kernels::relu_backward(in_val(0), gout, gin(0));
                break;
            case OpKind::MaxPool2x2:
                kernels::maxpool2x2_backward(gout, acts.pool_argmax[i], gin(0));
                break;
            case OpKind::AddSkip: {
                Tensor4& g0 = gin(0);
                Tensor4& g1 = gin(1);
                for (std::size_t k = 0; k < gout.data.size(); ++k) {
                    g0.data[k] += gout.data[k];
                    g1.data[k] += gout.data[k];
                }
                break;
            }
            case OpKind::ConcatChannels: {
                int c0 = 0;
                for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                    Tensor4& gk = gin(static_cast<int>(k));
                    const Shape4& s = gk.shape;
                    for (int b = 0; b < s.b; ++b)
                        for (int c = 0; c < s.c; ++c)
                            for (int y = 0; y < s.h; ++y)
                                for (int x = 0; x < s.w; ++x)
                                    gk.at(b, c, y, x) += gout.at(b, c0 + c, y, x);
                    c0 += s.c;
                }
                break;
            }
            case OpKind::ResizeBilinear: {
                Tensor4& gx = gin(0);
                kernels::resize_bilinear_backward(gout, gx.shape.h, gx.shape.w, gx);
                break;
            }
            case OpKind::MulBroadcast: {
                const Tensor4& x = in_val(0);
                const Tensor4& m = in_val(1);
                Tensor4& gx = gin(0);
                Tensor4& gm = gin(1);
                for (int b = 0; b < x.shape.b; ++b)
                    for (int c = 0; c < x.shape.c; ++c)
                        for (int y = 0; y < x.shape.h; ++y)
                            for (int xx = 0; xx < x.shape.w; ++xx) {
                                const double go = gout.at(b, c, y, xx);
                                gx.at(b, c, y, xx) += go * m.at(b, 0, y, xx);
                                gm.at(b, 0, y, xx) += go * x.at(b, c, y, xx);
                            }
                break;
            }
            case OpKind::ReduceSum: {
                Tensor4& gx = gin(0);
                const double go = gout.data[0];
                for (double& v : gx.data) v += go;
                break;
            }
            case OpKind::L1Loss: {
                const Tensor4& a = in_val(0);
                const Tensor4& b = in_val(1);
                Tensor4& ga = gin(0);
                Tensor4& gb = gin(1);
                const double go = gout.data[0] / static_cast<double>(a.data.size());
                for (std::size_t k = 0; k < a.data.size(); ++k) {
                    const double s = sgn(a.data[k] - b.data[k]);
                    ga.data[k] += go * s;
                    gb.data[k] -= go * s;
                }
                break;
            }
            case OpKind::MaskedL1Loss: {
                const Tensor4& a = in_val(0);
                const Tensor4& b = in_val(1);
                const Tensor4& m = in_val(2);
                double msum = 0.0;
                for (double v : m.data) msum += v;
                if (msum <= 0.0) break;
                // d/dm of the normalizer is intentionally ignored: masks
                // enter training as frozen inputs.
                Tensor4& ga = gin(0);
                Tensor4& gb = gin(1);
                const double go = gout.data[0] / (a.shape.c * msum);
                for (int bb = 0; bb < a.shape.b; ++bb)
                    for (int c = 0; c < a.shape.c; ++c)
                        for (int y = 0; y < a.shape.h; ++y)
                            for (int x = 0; x < a.shape.w; ++x) {
                                const double s =
                                    sgn(a.at(bb, c, y, x) - b.at(bb, c, y, x)) * m.at(bb, 0, y, x);
                                ga.at(bb, c, y, x) += go * s;
                                gb.at(bb, c, y, x) -= go * s;
                            }
                break;
            }
            case OpKind::MseLoss: {
                const Tensor4& a = in_val(0);
                const Tensor4& b = in_val(1);
                Tensor4& ga = gin(0);
                Tensor4& gb = gin(1);
                const double go = 2.0 * gout.data[0] / static_cast<double>(a.data.size());
                for (std::size_t k = 0; k < a.data.size(); ++k) {
                    const double d = a.data[k] - b.data[k];
                    ga.data[k] += go * d;
                    gb.data[k] -= go * d;
                }
                break;
            }
            case OpKind::WeightedSum: {
                for (std::size_t k = 0; k < n.inputs.size(); ++k)
                    gin(static_cast<int>(k)).data[0] += gout.data[0] * n.weights[k];
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Adam

AdamOptimizer::AdamOptimizer(std::shared_ptr<ParamStore> params)
    : params_(std::move(params)) {
    m_.resize(params_->count());
    v_.resize(params_->count());
    for (int i = 0; i < params_->count(); ++i) {
        m_[i].assign(params_->value(i).data.size(), 0.0);
        v_[i].assign(params_->value(i).data.size(), 0.0);
    }
}

void AdamOptimizer::step(const AdamConfig& cfg) {
    if (cfg.lr <= 0.0) throw std::invalid_argument("adam: lr must be positive");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
    for (int i = 0; i < params_->count(); ++i) {
        if (params_->frozen(i)) continue;
        auto& p = params_->value(i).data;
        const auto& g = params_->grad(i).data;
        if (g.size() != p.size()) throw std::invalid_argument("adam: grad shape mismatch");
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// grad_check

namespace {

struct CheckRig {
    std::shared_ptr<ParamStore> store;
    Graph graph;
    int in_node = -1;
    int loss = -1;
    explicit CheckRig(std::shared_ptr<ParamStore> s) : store(s), graph(s) {}
};

CheckRig build_rig(const LayerSpec& layer) {
    CheckRig rig(std::make_shared<ParamStore>());
    Graph& g = rig.graph;
    rig.in_node = g.input("x");
    int y = -1;
    switch (layer.kind) {
        case OpKind::Conv3x3: {
            const int w = rig.store->add("w", layer.weight);
            const int b = rig.store->add("b", layer.bias);
            y = g.conv3x3(rig.in_node, w, b);
            break;
        }
        case OpKind::Deconv2x2: {
            const int w = rig.store->add("w", layer.weight);
            const int b = rig.store->add("b", layer.bias);
            y = g.deconv2x2(rig.in_node, w, b);
            break;
        }
        case OpKind::Relu:
            y = g.relu(rig.in_node);
            break;
        case OpKind::MaxPool2x2:
            y = g.maxpool2x2(rig.in_node);
            break;
        case OpKind::AddSkip:
            y = g.add(rig.in_node, rig.in_node);
            break;
        case OpKind::ConcatChannels:
            y = g.concat({rig.in_node, rig.in_node});
            break;
        case OpKind::ResizeBilinear:
            y = g.resize_to(rig.in_node, layer.resize_h, layer.resize_w);
            break;
        default:
            throw std::invalid_argument("grad_check: unsupported layer kind");
    }
    rig.loss = g.reduce_sum(y);
    return rig;
}

double rig_loss(CheckRig& rig, const Tensor4& x) {
    Activations acts;
    forward(rig.graph, {{"x", x}}, acts);
    return acts.value[rig.loss].data[0];
}

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

}  // namespace

double grad_check(const LayerSpec& layer, const Tensor4& input, double epsilon) {
    if (epsilon <= 0.0 || epsilon > 1e-2)
        throw std::invalid_argument("grad_check: epsilon must be in (0, 1e-2]");
    if (!input.all_finite())
        throw std::invalid_argument("grad_check: non-finite input");

    CheckRig rig = build_rig(layer);
    Activations acts;
    rig.store->zero_grads();
    forward(rig.graph, {{"x", input}}, acts);
    backward(rig.graph, acts, rig.loss);

    double worst = 0.0;
    // input gradient
    {
        const Tensor4& ga = acts.grad[rig.in_node];
        Tensor4 x = input;
        for (std::size_t k = 0; k < x.data.size(); ++k) {
            const double keep = x.data[k];
            x.data[k] = keep + epsilon;
            const double lp = rig_loss(rig, x);
            x.data[k] = keep - epsilon;
            const double lm = rig_loss(rig, x);
            x.data[k] = keep;
            worst = std::max(worst, rel_err(ga.data[k], (lp - lm) / (2 * epsilon)));
        }
    }
    // parameter gradients
    for (int p = 0; p < rig.store->count(); ++p) {
        const Tensor4 ga = rig.store->grad(p);
        auto& val = rig.store->value(p).data;
        for (std::size_t k = 0; k < val.size(); ++k) {
            const double keep = val[k];
            val[k] = keep + epsilon;
            const double lp = rig_loss(rig, input);
            val[k] = keep - epsilon;
            const double lm = rig_loss(rig, input);
            val[k] = keep;
            worst = std::max(worst, rel_err(ga.data[k], (lp - lm) / (2 * epsilon)));
        }
    }
    return worst;
}

}  // namespace stitch
