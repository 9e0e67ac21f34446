#ifndef GCPA_BLOCKS_BLOCKS_HPP
#define GCPA_BLOCKS_BLOCKS_HPP

#include <string>
#include <vector>

#include "gcpa/core/nn.hpp"

namespace gcpa {

// Feature Interweaved Aggregation. Fuses a low-level map f_l, the high-level
// stream f_h (half resolution, d channels) and a global-context map f_g via
// three multiplicative gates, then merges with one 3x3 conv:
//   f~_l  = conv1(f_l)                        1x1 compress to d
//   f_hl  = relu(up2(conv2(f_h)) * f~_l)      semantic mask on detail
//   f_lh  = relu(conv3(f~_l) * up2(f_h))      detail mask on semantics
//   f_gl  = relu(up(conv4(f_g)) * f~_l)       global mask on detail
//   out   = conv5(cat(f_hl, f_lh, f_gl))
// conv2/3/4 are plain biased convs (mask generators); conv1/conv5 carry BN+ReLU.
// When built without the global branch, conv4 is absent and conv5 takes 2d.
// Branch activations exposed for tests (gating inspection).
template <typename T>
struct FIATrace {
    Tensor<T> f_hl, f_lh, f_gl;
};

template <typename T>
struct FIA {
    ConvBnRelu<T> conv1, conv5;
    Conv2d<T> conv2, conv3, conv4;
    bool with_global = true;

    FIA() = default;
    FIA(Rng& rng, long cin_l, long d, bool with_global_)
        : conv1(rng, cin_l, d, 1, 1, 0),
          conv5(rng, (with_global_ ? 3 : 2) * d, d, 3, 1, 1),
          conv2(rng, d, d, 3, 1, 1, true),
          conv3(rng, d, d, 3, 1, 1, true),
          with_global(with_global_) {
        if (with_global) conv4 = Conv2d<T>(rng, d, d, 3, 1, 1, true);
    }

    Var<T> forward(const Var<T>& f_l, const Var<T>& f_h, const Var<T>& f_g, bool training,
                   FIATrace<T>* trace = nullptr) {
        long H = f_l.shape()[2], W = f_l.shape()[3];
        if (f_h.shape()[2] * 2 != H || f_h.shape()[3] * 2 != W)
            throw ShapeError("fia: f_h " + shape_str(f_h.shape()) + " must be half of f_l " +
                             shape_str(f_l.shape()));
        auto fl = conv1.forward(f_l, training);
        auto w_h = resize_bilinear(conv2.forward(f_h), H, W);
        auto f_hl = relu(mul(w_h, fl));
        auto f_lh = relu(mul(conv3.forward(fl), resize_bilinear(f_h, H, W)));
        std::vector<Var<T>> parts{f_hl, f_lh};
        if (with_global) {
            if (!f_g.defined())
                throw ShapeError("fia: global branch enabled but f_g is missing");
            auto w_g = resize_bilinear(conv4.forward(f_g), H, W);
            parts.push_back(relu(mul(w_g, fl)));
        }
        if (trace) {
            trace->f_hl = f_hl.value();
            trace->f_lh = f_lh.value();
            if (with_global) trace->f_gl = parts[2].value();
        }
        return conv5.forward(concat_channels(parts), training);
    }

    void params(const std::string& p, ParamList<T>& out) {
        conv1.params(p + ".conv1", out);
        conv2.params(p + ".conv2", out);
        conv3.params(p + ".conv3", out);
        if (with_global) conv4.params(p + ".conv4", out);
        conv5.params(p + ".conv5", out);
    }
    void buffers(const std::string& p, BufferList<T>& out) {
        conv1.buffers(p + ".conv1", out);
        conv5.buffers(p + ".conv5", out);
    }
};

// Self Refinement. Squeezes the input to d channels, then derives a
// multiplicative mask and an additive bias from the squeezed map itself:
//   f~ = conv6(f_in);  out = relu(convW(f~) * f~ + convB(f~))
template <typename T>
struct SR {
    ConvBnRelu<T> conv6;
    Conv2d<T> convW, convB;

    SR() = default;
    SR(Rng& rng, long cin, long d)
        : conv6(rng, cin, d, 3, 1, 1),
          convW(rng, d, d, 3, 1, 1, true),
          convB(rng, d, d, 3, 1, 1, true) {}

    Var<T> forward(const Var<T>& x, bool training) {
        auto f = conv6.forward(x, training);
        return relu(add(mul(convW.forward(f), f), convB.forward(f)));
    }

    void params(const std::string& p, ParamList<T>& out) {
        conv6.params(p + ".conv6", out);
        convW.params(p + ".convW", out);
        convB.params(p + ".convB", out);
    }
    void buffers(const std::string& p, BufferList<T>& out) { conv6.buffers(p + ".conv6", out); }
};

// Head Attention. Compresses the encoder top to d channels, applies the same
// mask/bias refinement as SR, then scales channels by a squeeze-excitation
// vector computed from the compressed map:
//   F~ = conv_c(F);  F1 = relu(convW(F~) * F~ + convB(F~))
//   y  = sigmoid(fc2(relu(fc1(gap(F~)))));  out = F1 * y
template <typename T>
struct HA {
    ConvBnRelu<T> conv_c;
    Conv2d<T> convW, convB;
    Dense<T> fc1, fc2;

    HA() = default;
    HA(Rng& rng, long cin, long d, long reduction)
        : conv_c(rng, cin, d, 3, 1, 1),
          convW(rng, d, d, 3, 1, 1, true),
          convB(rng, d, d, 3, 1, 1, true),
          fc1(rng, d, d / reduction),
          fc2(rng, d / reduction, d) {}

    // pre_scale/gate expose F_1 and y for the broadcast-ratio tests.
    Var<T> forward(const Var<T>& x, bool training, Tensor<T>* pre_scale = nullptr,
                   Tensor<T>* gate = nullptr) {
        auto f = conv_c.forward(x, training);
        auto f1 = relu(add(mul(convW.forward(f), f), convB.forward(f)));
        auto y = sigmoid(fc2.forward(relu(fc1.forward(global_avg_pool(f)))));
        if (pre_scale) *pre_scale = f1.value();
        if (gate) *gate = y.value();
        return channel_scale(f1, y);
    }

    void params(const std::string& p, ParamList<T>& out) {
        conv_c.params(p + ".conv_c", out);
        convW.params(p + ".convW", out);
        convB.params(p + ".convB", out);
        fc1.params(p + ".fc1", out);
        fc2.params(p + ".fc2", out);
    }
    void buffers(const std::string& p, BufferList<T>& out) { conv_c.buffers(p + ".conv_c", out); }
};

// Global Context Flow. Per decoder stage t: re-weight a d-channel projection
// of the raw encoder top by a stage-specific channel gate computed from the
// globally pooled top features:
//   y_t = sigmoid(fc4_t(relu(fc3_t(gap(f_top)))));  out = conv10_t(f_top) * y_t
// fc4_t emits d values so the gate broadcasts against conv10's output (the
// gate is applied after the projection, so its width follows the projection).
// In shared mode one (fc3, fc4, conv10) triple serves all three stages.
template <typename T>
struct GCF {
    struct Stage {
        Dense<T> fc3, fc4;
        ConvBnRelu<T> conv10;
    };
    std::vector<Stage> stages;
    bool shared = false;

    GCF() = default;
    GCF(Rng& rng, long top_ch, long d, long reduction, bool shared_) : shared(shared_) {
        long n = shared ? 1 : 3;
        for (long i = 0; i < n; ++i)
            stages.push_back({Dense<T>(rng, top_ch, top_ch / reduction),
                              Dense<T>(rng, top_ch / reduction, d),
                              ConvBnRelu<T>(rng, top_ch, d, 3, 1, 1)});
    }

    Var<T> forward(const Var<T>& f_top, int stage, bool training, Tensor<T>* pre_scale = nullptr,
                   Tensor<T>* gate = nullptr) {
        if (stage < 1 || stage > 3)
            throw std::invalid_argument("gcf: stage must be 1..3, got " + std::to_string(stage));
        Stage& s = stages[shared ? 0 : stage - 1];
        auto y = sigmoid(s.fc4.forward(relu(s.fc3.forward(global_avg_pool(f_top)))));
        auto proj = s.conv10.forward(f_top, training);
        if (pre_scale) *pre_scale = proj.value();
        if (gate) *gate = y.value();
        return channel_scale(proj, y);
    }

    void params(const std::string& p, ParamList<T>& out) {
        for (size_t i = 0; i < stages.size(); ++i) {
            std::string sp = p + ".t" + std::to_string(i + 1);
            stages[i].fc3.params(sp + ".fc3", out);
            stages[i].fc4.params(sp + ".fc4", out);
            stages[i].conv10.params(sp + ".conv10", out);
        }
    }
    void buffers(const std::string& p, BufferList<T>& out) {
        for (size_t i = 0; i < stages.size(); ++i)
            stages[i].conv10.buffers(p + ".t" + std::to_string(i + 1) + ".conv10", out);
    }
};

}  // namespace gcpa

#endif
