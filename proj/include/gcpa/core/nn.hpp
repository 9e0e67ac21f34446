#ifndef GCPA_CORE_NN_HPP
#define GCPA_CORE_NN_HPP

#include <cmath>
#include <string>
#include <vector>

#include "gcpa/core/ops.hpp"
#include "gcpa/core/rng.hpp"

namespace gcpa {

// Named handle to a trainable tensor. `decay` marks membership in the
// weight-decay group (normalization scale/shift opt out).
template <typename T>
struct ParamRef {
    std::string name;
    Var<T> var;
    bool decay = true;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

// Named pointer to a persistent non-trainable tensor (running statistics).
template <typename T>
struct BufferRef {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
using BufferList = std::vector<BufferRef<T>>;

// ---------------------------------------------------------- initialization

// Convolution kernels: zero-mean normal scaled by fan-in (ledgered choice).
template <typename T>
Tensor<T> conv_init(Rng& rng, long cout, long cin, long kh, long kw) {
    Tensor<T> w({cout, cin, kh, kw});
    double std = std::sqrt(2.0 / double(cin * kh * kw));
    for (long i = 0; i < w.numel(); ++i) w[i] = T(rng.normal() * std);
    return w;
}

// Dense layers: fan-in-scaled uniform for both weight and bias.
template <typename T>
Tensor<T> dense_init(Rng& rng, long rows, long cols, long fan_in) {
    Tensor<T> w({rows, cols});
    double bound = 1.0 / std::sqrt(double(fan_in));
    for (long i = 0; i < w.numel(); ++i) w[i] = T(rng.uniform(-bound, bound));
    return w;
}

// ----------------------------------------------------------------- layers

template <typename T>
struct Conv2d {
    Var<T> w, b;
    long stride = 1, pad = 0;

    Conv2d() = default;
    Conv2d(Rng& rng, long cin, long cout, long k, long stride_, long pad_, bool bias)
        : stride(stride_), pad(pad_) {
        w = Var<T>::leaf(conv_init<T>(rng, cout, cin, k, k), true);
        if (bias) b = Var<T>::leaf(Tensor<T>({cout}), true);  // zero bias
    }

    Var<T> forward(const Var<T>& x) const { return conv2d(x, w, b, stride, pad); }

    void params(const std::string& p, ParamList<T>& out) {
        out.push_back({p + ".w", w, true});
        if (b.defined()) out.push_back({p + ".b", b, true});
    }
};

template <typename T>
struct BatchNorm2d {
    Var<T> gamma, beta;
    Tensor<T> running_mean, running_var;

    BatchNorm2d() = default;
    explicit BatchNorm2d(long c)
        : gamma(Var<T>::leaf(Tensor<T>::full({c}, T(1)), true)),
          beta(Var<T>::leaf(Tensor<T>({c}), true)),
          running_mean({c}),
          running_var(Tensor<T>::full({c}, T(1))) {}

    Var<T> forward(const Var<T>& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, training);
    }

    void params(const std::string& p, ParamList<T>& out) {
        out.push_back({p + ".gamma", gamma, false});
        out.push_back({p + ".beta", beta, false});
    }
    void buffers(const std::string& p, BufferList<T>& out) {
        out.push_back({p + ".running_mean", &running_mean});
        out.push_back({p + ".running_var", &running_var});
    }
};

// conv (no bias) -> batchnorm -> relu, the default block everywhere a layer
// is not an explicit mask/bias generator.
template <typename T>
struct ConvBnRelu {
    Conv2d<T> conv;
    BatchNorm2d<T> bn;

    ConvBnRelu() = default;
    ConvBnRelu(Rng& rng, long cin, long cout, long k, long stride, long pad)
        : conv(rng, cin, cout, k, stride, pad, /*bias=*/false), bn(cout) {}

    Var<T> forward(const Var<T>& x, bool training) {
        return relu(bn.forward(conv.forward(x), training));
    }

    void params(const std::string& p, ParamList<T>& out) {
        conv.params(p + ".conv", out);
        bn.params(p + ".bn", out);
    }
    void buffers(const std::string& p, BufferList<T>& out) { bn.buffers(p + ".bn", out); }
};

template <typename T>
struct Dense {
    Var<T> w, b;

    Dense() = default;
    Dense(Rng& rng, long in, long out) {
        w = Var<T>::leaf(dense_init<T>(rng, out, in, in), true);
        Tensor<T> bias({out});
        double bound = 1.0 / std::sqrt(double(in));
        for (long i = 0; i < out; ++i) bias[i] = T(rng.uniform(-bound, bound));
        b = Var<T>::leaf(std::move(bias), true);
    }

    Var<T> forward(const Var<T>& x) const { return linear(x, w, b); }

    void params(const std::string& p, ParamList<T>& out) {
        out.push_back({p + ".w", w, true});
        out.push_back({p + ".b", b, true});
    }
};

}  // namespace gcpa

#endif
