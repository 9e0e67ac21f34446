#ifndef GCPA_NET_NETWORK_HPP
#define GCPA_NET_NETWORK_HPP

#include <array>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "gcpa/backbone/backbone.hpp"
#include "gcpa/blocks/blocks.hpp"

namespace gcpa {

// Which decoder components are spliced in. Defaults build the full model;
// with everything off the decoder degrades to the concatenation baseline.
struct AblationFlags {
    bool use_fia = true;
    bool use_sr = true;
    bool use_ha = true;
    bool use_gcf = true;
    bool gcf_shared = false;
};

inline void validate_ablation(const AblationFlags& f) {
    if (f.gcf_shared && !f.use_gcf)
        throw std::invalid_argument("gcf_shared requires use_gcf");
    if (f.use_gcf && !f.use_fia)
        throw std::invalid_argument("use_gcf requires use_fia (global context feeds the "
                                    "aggregation module's third branch)");
}

struct LossConfig {
    std::array<double, 3> lambda{1.0, 1.0, 1.0};  // auxiliary weights, stage order
    double epsilon = 1e-7;                        // probability clamp bound
};

inline void validate_loss(const LossConfig& cfg) {
    for (double l : cfg.lambda)
        if (!(l >= 0)) throw std::invalid_argument("loss lambda must be >= 0");
    if (!(cfg.epsilon > 0 && cfg.epsilon < 0.5))
        throw std::invalid_argument("loss epsilon must be in (0, 0.5)");
}

struct NetworkConfig {
    BackboneConfig backbone;
    long d = 256;         // decoder width
    long reduction = 16;  // squeeze ratio of the channel-gate branches
    AblationFlags ablation;
};

template <typename T>
struct NetworkOutput {
    Var<T> dominant;          // [n,1,H,W] logits at input resolution
    std::vector<Var<T>> aux;  // 3 entries in train mode, empty otherwise
};

// Decoder stage used when the aggregation module is ablated away: compress
// the lateral features, upsample the decoder path, concatenate, fuse.
template <typename T>
struct ConcatDecode {
    ConvBnRelu<T> compress, fuse;

    ConcatDecode() = default;
    ConcatDecode(Rng& rng, long cin_l, long d)
        : compress(rng, cin_l, d, 1, 1, 0), fuse(rng, 2 * d, d, 3, 1, 1) {}

    Var<T> forward(const Var<T>& f_l, const Var<T>& f_h, bool training) {
        auto low = compress.forward(f_l, training);
        auto up = resize_bilinear(f_h, f_l.shape()[2], f_l.shape()[3]);
        return fuse.forward(concat_channels<T>({up, low}), training);
    }
    void params(const std::string& p, ParamList<T>& out) {
        compress.params(p + ".compress", out);
        fuse.params(p + ".fuse", out);
    }
    void buffers(const std::string& p, BufferList<T>& out) {
        compress.buffers(p + ".compress", out);
        fuse.buffers(p + ".fuse", out);
    }
};

// Full assembly: encoder -> head-attention path on the deepest stage -> three
// cascaded aggregate/refine stages fed laterally from stage3..stage1, each
// with its own global-context input -> 1-channel prediction heads.
template <typename T>
class GCPANet {
public:
    GCPANet(Rng& rng, const NetworkConfig& cfg) : cfg_(cfg) {
        validate_ablation(cfg.ablation);
        encoder_ = make_backbone<T>(rng, cfg.backbone);
        const auto& sc = encoder_->stage_channels();
        const AblationFlags& ab = cfg_.ablation;
        long d = cfg_.d;

        if (ab.use_ha)
            ha_ = HA<T>(rng, sc[3], d, cfg_.reduction);
        else
            top_compress_ = ConvBnRelu<T>(rng, sc[3], d, 1, 1, 0);
        if (ab.use_sr) top_sr_ = SR<T>(rng, d, d);

        for (int t = 1; t <= 3; ++t) {
            long cin_l = sc[3 - t];
            if (ab.use_fia)
                fia_[t - 1] = FIA<T>(rng, cin_l, d, ab.use_gcf);
            else
                cat_[t - 1] = ConcatDecode<T>(rng, cin_l, d);
            if (ab.use_sr) sr_[t - 1] = SR<T>(rng, d, d);
        }
        if (ab.use_gcf) gcf_ = GCF<T>(rng, sc[3], d, cfg_.reduction, ab.gcf_shared);

        head_dom_ = Conv2d<T>(rng, d, 1, 3, 1, 1, /*bias=*/true);
        for (int i = 0; i < 3; ++i) head_aux_[i] = Conv2d<T>(rng, d, 1, 3, 1, 1, /*bias=*/true);
    }

    NetworkOutput<T> forward(const Var<T>& x, bool training) {
        const AblationFlags& ab = cfg_.ablation;
        auto stages = encoder_->forward(x, training);
        long H = x.shape()[2], W = x.shape()[3];

        Var<T> f_h = ab.use_ha ? ha_.forward(stages[3], training)
                               : top_compress_.forward(stages[3], training);
        if (ab.use_sr) f_h = top_sr_.forward(f_h, training);

        std::array<Var<T>, 3> dec;
        for (int t = 1; t <= 3; ++t) {
            const Var<T>& f_l = stages[3 - t];
            Var<T> a;
            if (ab.use_fia) {
                Var<T> g;
                if (ab.use_gcf) g = gcf_.forward(stages[3], t, training);
                a = fia_[t - 1].forward(f_l, f_h, g, training);
            } else {
                a = cat_[t - 1].forward(f_l, f_h, training);
            }
            if (ab.use_sr) a = sr_[t - 1].forward(a, training);
            dec[t - 1] = a;
            f_h = a;
        }

        NetworkOutput<T> out;
        out.dominant = resize_bilinear(head_dom_.forward(dec[2]), H, W);
        if (training)
            for (int i = 0; i < 3; ++i)
                out.aux.push_back(resize_bilinear(head_aux_[i].forward(dec[i]), H, W));
        return out;
    }

    // Saliency probabilities in (0,1); auxiliary branches are never executed.
    Var<T> predict(const Var<T>& x) {
        NoGradGuard ng;
        return sigmoid(forward(x, false).dominant);
    }

    void params(ParamList<T>& out) {
        const AblationFlags& ab = cfg_.ablation;
        encoder_->params("backbone", out);
        if (ab.use_ha)
            ha_.params("top.ha", out);
        else
            top_compress_.params("top.compress", out);
        if (ab.use_sr) top_sr_.params("top.sr", out);
        for (int t = 1; t <= 3; ++t) {
            std::string sp = "stage" + std::to_string(t);
            if (ab.use_fia)
                fia_[t - 1].params(sp + ".fia", out);
            else
                cat_[t - 1].params(sp + ".cat", out);
            if (ab.use_sr) sr_[t - 1].params(sp + ".sr", out);
        }
        if (ab.use_gcf) gcf_.params("gcf", out);
        head_dom_.params("head.dom", out);
        for (int i = 0; i < 3; ++i) head_aux_[i].params("head.aux" + std::to_string(i + 1), out);
    }
    ParamList<T> params() {
        ParamList<T> out;
        params(out);
        return out;
    }

    void buffers(BufferList<T>& out) {
        const AblationFlags& ab = cfg_.ablation;
        encoder_->buffers("backbone", out);
        if (ab.use_ha)
            ha_.buffers("top.ha", out);
        else
            top_compress_.buffers("top.compress", out);
        if (ab.use_sr) top_sr_.buffers("top.sr", out);
        for (int t = 1; t <= 3; ++t) {
            std::string sp = "stage" + std::to_string(t);
            if (ab.use_fia)
                fia_[t - 1].buffers(sp + ".fia", out);
            else
                cat_[t - 1].buffers(sp + ".cat", out);
            if (ab.use_sr) sr_[t - 1].buffers(sp + ".sr", out);
        }
        if (ab.use_gcf) gcf_.buffers("gcf", out);
    }
    BufferList<T> buffers() {
        BufferList<T> out;
        buffers(out);
        return out;
    }

    const NetworkConfig& config() const { return cfg_; }
    Encoder<T>& encoder() { return *encoder_; }

private:
    NetworkConfig cfg_;
    std::unique_ptr<Encoder<T>> encoder_;
    HA<T> ha_;
    ConvBnRelu<T> top_compress_;
    SR<T> top_sr_;
    std::array<FIA<T>, 3> fia_;
    std::array<ConcatDecode<T>, 3> cat_;
    std::array<SR<T>, 3> sr_;
    GCF<T> gcf_;
    Conv2d<T> head_dom_;
    std::array<Conv2d<T>, 3> head_aux_;
};

// -------------------------------------------------------------------- loss

// Reference cross-entropy on probabilities: -mean(G log S + (1-G) log(1-S))
// with S clamped to [eps, 1-eps]. The mask must be strictly binary.
template <typename T>
double bce_loss(const Tensor<T>& s, const Tensor<T>& g, double eps = 1e-7) {
    if (s.shape() != g.shape())
        throw ShapeError("saliency map has shape " + s.shape_str() + ", mask has " + g.shape_str());
    if (!(eps > 0 && eps < 0.5)) throw std::invalid_argument("loss epsilon must be in (0, 0.5)");
    double acc = 0;
    for (long i = 0; i < s.numel(); ++i) {
        double gi = double(g[i]);
        if (gi != 0.0 && gi != 1.0)
            throw std::invalid_argument("mask is not binary at element " + std::to_string(i) +
                                        ": " + std::to_string(gi));
        double si = std::min(std::max(double(s[i]), eps), 1.0 - eps);
        acc += gi * std::log(si) + (1.0 - gi) * std::log(1.0 - si);
    }
    return -acc / double(s.numel());
}

inline double total_loss(double dom, const std::array<double, 3>& aux, const LossConfig& cfg) {
    validate_loss(cfg);
    double t = dom;
    for (int i = 0; i < 3; ++i) t += cfg.lambda[i] * aux[i];
    return t;
}

template <typename T>
struct LossBreakdown {
    Var<T> total;  // scalar, differentiable
    double dom = 0;
    std::array<double, 3> aux{0, 0, 0};
};

// Differentiable training loss computed from logits in log-sum form (the
// clamped-probability bce_loss above is the reference semantics).
template <typename T>
LossBreakdown<T> training_loss(const NetworkOutput<T>& out, const Tensor<T>& target,
                               const LossConfig& cfg) {
    validate_loss(cfg);
    if (out.aux.size() != 3)
        throw std::invalid_argument("training loss needs 3 auxiliary maps, got " +
                                    std::to_string(out.aux.size()));
    LossBreakdown<T> lb;
    Var<T> dom = bce_with_logits(out.dominant, target);
    lb.dom = double(dom.value()[0]);
    lb.total = dom;
    for (int i = 0; i < 3; ++i) {
        Var<T> a = bce_with_logits(out.aux[i], target);
        lb.aux[i] = double(a.value()[0]);
        if (cfg.lambda[i] != 0) lb.total = add(lb.total, scale(a, T(cfg.lambda[i])));
    }
    return lb;
}

}  // namespace gcpa

#endif
