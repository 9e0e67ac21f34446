#ifndef GCPA_BACKBONE_BACKBONE_HPP
#define GCPA_BACKBONE_BACKBONE_HPP

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "gcpa/core/archive.hpp"
#include "gcpa/core/nn.hpp"

namespace gcpa {

struct BackboneConfig {
    std::string kind = "resnet50";  // "resnet50" | "tiny"
    std::string pretrained_weights_path;  // optional, resnet50 only
    // Declared channel plan the decoder is assembled against; all zeros
    // means "whatever the kind provides". A non-default declaration that
    // contradicts the kind is an assembly error.
    std::array<long, 4> stage_channels{0, 0, 0, 0};
};

inline constexpr std::array<long, 4> kResnet50StageChannels{256, 512, 1024, 2048};
inline constexpr std::array<long, 4> kTinyStageChannels{16, 32, 64, 128};

// Multi-level feature encoder. Both implementations return the four stage
// outputs shallowest to deepest; spatial size strictly decreases and channel
// count strictly increases along the list. The decoder is written against
// this interface only, so backbones are interchangeable wherever the
// configured stage_channels match.
template <typename T>
struct Encoder {
    virtual ~Encoder() = default;
    virtual std::array<Var<T>, 4> forward(const Var<T>& x, bool training) = 0;
    virtual void params(const std::string& prefix, ParamList<T>& out) = 0;
    virtual void buffers(const std::string& prefix, BufferList<T>& out) = 0;
    virtual const std::array<long, 4>& stage_channels() const = 0;
};

namespace detail {

// Inputs must be [n,3,h,w] with h and w divisible by the encoder's total
// stride (32 for resnet50, 16 for the tiny encoder) so every stage has an
// exact spatial size.
template <typename T>
void require_encoder_input(const Var<T>& x, long stride) {
    require_rank(x.value(), 4, "encoder input");
    const auto& s = x.shape();
    if (s[1] != 3)
        throw ShapeError("encoder input has " + std::to_string(s[1]) + " channels, expected 3");
    if (s[2] % stride != 0 || s[3] % stride != 0)
        throw ShapeError("encoder input " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " is not divisible by " + std::to_string(stride));
}

}  // namespace detail

// Four stride-2 conv/norm/relu blocks. Exists so every desk-scale test and
// the acceptance run stay CPU-cheap and free of pretrained weight files.
template <typename T>
class TinyEncoder : public Encoder<T> {
public:
    explicit TinyEncoder(Rng& rng) {
        long cin = 3;
        for (int i = 0; i < 4; ++i) {
            blocks_[i] = ConvBnRelu<T>(rng, cin, kTinyStageChannels[i], 3, 2, 1);
            cin = kTinyStageChannels[i];
        }
    }

    std::array<Var<T>, 4> forward(const Var<T>& x, bool training) override {
        detail::require_encoder_input(x, 16);
        std::array<Var<T>, 4> stages;
        Var<T> cur = x;
        for (int i = 0; i < 4; ++i) {
            cur = blocks_[i].forward(cur, training);
            stages[i] = cur;
        }
        return stages;
    }

    void params(const std::string& p, ParamList<T>& out) override {
        for (int i = 0; i < 4; ++i) blocks_[i].params(p + ".b" + std::to_string(i + 1), out);
    }
    void buffers(const std::string& p, BufferList<T>& out) override {
        for (int i = 0; i < 4; ++i) blocks_[i].buffers(p + ".b" + std::to_string(i + 1), out);
    }
    const std::array<long, 4>& stage_channels() const override { return kTinyStageChannels; }

private:
    std::array<ConvBnRelu<T>, 4> blocks_;
};

// 1x1 reduce -> 3x3 (carries the stride) -> 1x1 expand, with a projection
// shortcut whenever shape changes; relu after the residual add.
template <typename T>
struct Bottleneck {
    ConvBnRelu<T> cbr1, cbr2;
    Conv2d<T> conv3;
    BatchNorm2d<T> bn3;
    Conv2d<T> down_conv;
    BatchNorm2d<T> down_bn;
    bool has_down = false;

    Bottleneck() = default;
    Bottleneck(Rng& rng, long cin, long width, long stride)
        : cbr1(rng, cin, width, 1, 1, 0),
          cbr2(rng, width, width, 3, stride, 1),
          conv3(rng, width, width * 4, 1, 1, 0, /*bias=*/false),
          bn3(width * 4),
          has_down(stride != 1 || cin != width * 4) {
        if (has_down) {
            down_conv = Conv2d<T>(rng, cin, width * 4, 1, stride, 0, /*bias=*/false);
            down_bn = BatchNorm2d<T>(width * 4);
        }
    }

    Var<T> forward(const Var<T>& x, bool training) {
        Var<T> y = cbr2.forward(cbr1.forward(x, training), training);
        y = bn3.forward(conv3.forward(y), training);
        Var<T> skip = has_down ? down_bn.forward(down_conv.forward(x), training) : x;
        return relu(add(y, skip));
    }

    void params(const std::string& p, ParamList<T>& out) {
        cbr1.params(p + ".conv1", out);
        cbr2.params(p + ".conv2", out);
        conv3.params(p + ".conv3", out);
        bn3.params(p + ".bn3", out);
        if (has_down) {
            down_conv.params(p + ".down.conv", out);
            down_bn.params(p + ".down.bn", out);
        }
    }
    void buffers(const std::string& p, BufferList<T>& out) {
        cbr1.buffers(p + ".conv1", out);
        cbr2.buffers(p + ".conv2", out);
        bn3.buffers(p + ".bn3", out);
        if (has_down) down_bn.buffers(p + ".down.bn", out);
    }
};

template <typename T>
class ResNet50Encoder : public Encoder<T> {
public:
    explicit ResNet50Encoder(Rng& rng) : stem_(rng, 3, 64, 7, 2, 3) {
        make_layer(rng, layers_[0], 64, 64, 3, 1);
        make_layer(rng, layers_[1], 256, 128, 4, 2);
        make_layer(rng, layers_[2], 512, 256, 6, 2);
        make_layer(rng, layers_[3], 1024, 512, 3, 2);
    }

    std::array<Var<T>, 4> forward(const Var<T>& x, bool training) override {
        detail::require_encoder_input(x, 32);
        Var<T> cur = maxpool2d(stem_.forward(x, training), 3, 2, 1);
        std::array<Var<T>, 4> stages;
        for (int l = 0; l < 4; ++l) {
            for (auto& block : layers_[l]) cur = block.forward(cur, training);
            stages[l] = cur;
        }
        return stages;
    }

    void params(const std::string& p, ParamList<T>& out) override {
        stem_.params(p + ".stem", out);
        for (int l = 0; l < 4; ++l)
            for (size_t i = 0; i < layers_[l].size(); ++i)
                layers_[l][i].params(p + ".layer" + std::to_string(l + 1) + "." + std::to_string(i),
                                     out);
    }
    void buffers(const std::string& p, BufferList<T>& out) override {
        stem_.buffers(p + ".stem", out);
        for (int l = 0; l < 4; ++l)
            for (size_t i = 0; i < layers_[l].size(); ++i)
                layers_[l][i].buffers(
                    p + ".layer" + std::to_string(l + 1) + "." + std::to_string(i), out);
    }
    const std::array<long, 4>& stage_channels() const override { return kResnet50StageChannels; }

    // Populates every parameter and running statistic from a tensor archive
    // keyed by the "backbone."-prefixed names. All names and shapes are
    // validated against the manifest before anything is copied, so a failed
    // load leaves the encoder untouched. Returns the number of tensors
    // populated.
    size_t load_pretrained(const std::string& path) {
        TensorArchive ar = TensorArchive::load(path);
        ParamList<T> ps;
        params("backbone", ps);
        BufferList<T> bs;
        buffers("backbone", bs);

        auto check = [&](const std::string& name, const std::vector<long>& want) {
            if (!ar.contains(name))
                throw std::runtime_error("pretrained weights missing tensor '" + name + "'");
            if (ar.shape(name) != want)
                throw std::runtime_error("pretrained tensor '" + name + "' has shape " +
                                         shape_str(ar.shape(name)) + ", expected " +
                                         shape_str(want));
        };
        for (const auto& p : ps) check(p.name, p.var.shape());
        for (const auto& b : bs) check(b.name, b.tensor->shape());

        for (auto& p : ps) p.var.value() = ar.get<T>(p.name);
        for (auto& b : bs) *b.tensor = ar.get<T>(b.name);
        return ps.size() + bs.size();
    }

private:
    void make_layer(Rng& rng, std::vector<Bottleneck<T>>& layer, long cin, long width, int count,
                    long stride) {
        layer.emplace_back(rng, cin, width, stride);
        for (int i = 1; i < count; ++i) layer.emplace_back(rng, width * 4, width, 1);
    }

    ConvBnRelu<T> stem_;
    std::array<std::vector<Bottleneck<T>>, 4> layers_;
};

inline void validate_stage_channels(const BackboneConfig& cfg) {
    if (cfg.stage_channels == std::array<long, 4>{0, 0, 0, 0}) return;
    const auto& want = cfg.kind == "tiny" ? kTinyStageChannels : kResnet50StageChannels;
    if (cfg.stage_channels != want) {
        auto fmt = [](const std::array<long, 4>& a) {
            std::string s = "[";
            for (int i = 0; i < 4; ++i) s += (i ? "," : "") + std::to_string(a[i]);
            return s + "]";
        };
        throw std::invalid_argument("stage_channels " + fmt(cfg.stage_channels) +
                                    " inconsistent with backbone '" + cfg.kind + "' " + fmt(want));
    }
}

template <typename T>
std::unique_ptr<Encoder<T>> make_backbone(Rng& rng, const BackboneConfig& cfg) {
    validate_stage_channels(cfg);
    if (cfg.kind == "tiny") {
        if (!cfg.pretrained_weights_path.empty())
            throw std::runtime_error("tiny backbone has no pretrained weights");
        return std::make_unique<TinyEncoder<T>>(rng);
    }
    if (cfg.kind == "resnet50") {
        auto enc = std::make_unique<ResNet50Encoder<T>>(rng);
        if (!cfg.pretrained_weights_path.empty())
            enc->load_pretrained(cfg.pretrained_weights_path);
        return enc;
    }
    throw std::invalid_argument("unknown backbone kind '" + cfg.kind + "'");
}

}  // namespace gcpa

#endif
