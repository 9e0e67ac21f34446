#ifndef GCPA_DATA_DATASET_HPP
#define GCPA_DATA_DATASET_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gcpa/core/ops.hpp"
#include "gcpa/core/rng.hpp"

namespace gcpa {

struct DataConfig {
    long resize = 320;
    long crop = 288;
    // ImageNet channel statistics, matching the pretrained backbone
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> stdev{0.229f, 0.224f, 0.225f};
};

inline void validate_data(const DataConfig& cfg) {
    if (cfg.resize < 1 || cfg.crop < 1 || cfg.crop > cfg.resize)
        throw std::invalid_argument("data config needs 0 < crop <= resize");
}

struct Sample {
    std::string id;  // file stem, shared between image and mask
    std::string image_path;
    std::string mask_path;  // empty when the split carries no labels
};

struct DatasetIndex {
    std::string name;
    std::string split;  // "train" | "test"
    std::vector<Sample> samples;
    bool labeled = false;
    std::vector<std::string> orphan_masks;  // mask files without an image
};

// ------------------------------------------------------------------ loading

// Layout: <root>/<name>/images/*.{jpg,jpeg,png} and, for labeled splits,
// <root>/<name>/masks/<stem>.png. Samples are ordered lexicographically by
// image path so every run sees the same indexing.
inline DatasetIndex load_dataset(const std::string& root, const std::string& name,
                                 const std::string& split, bool with_masks) {
    namespace fs = std::filesystem;
    fs::path dir = fs::path(root) / name;
    fs::path images = dir / "images";
    fs::path masks = dir / "masks";
    if (!fs::is_directory(images))
        throw std::runtime_error("no images directory at " + images.string());

    DatasetIndex idx;
    idx.name = name;
    idx.split = split;
    idx.labeled = with_masks;

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(images)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".jpg" || ext == ".jpeg" || ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("empty dataset at " + dir.string());

    std::vector<std::string> orphans;
    for (const auto& f : files) {
        Sample s;
        s.id = f.stem().string();
        s.image_path = f.string();
        fs::path m = masks / (s.id + ".png");
        if (fs::exists(m))
            s.mask_path = m.string();
        else if (with_masks)
            orphans.push_back(s.id);
        idx.samples.push_back(std::move(s));
    }
    if (!orphans.empty()) {
        std::string list;
        for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o;
        throw std::runtime_error("images without masks in labeled split '" + name + "': " + list);
    }
    if (fs::is_directory(masks)) {
        for (const auto& e : fs::directory_iterator(masks)) {
            if (!e.is_regular_file()) continue;
            std::string stem = e.path().stem().string();
            bool matched = std::any_of(idx.samples.begin(), idx.samples.end(),
                                       [&](const Sample& s) { return s.id == stem; });
            if (!matched) idx.orphan_masks.push_back(e.path().filename().string());
        }
        std::sort(idx.orphan_masks.begin(), idx.orphan_masks.end());
    }
    return idx;
}

// ----------------------------------------------------------------- decoding

// [3,H,W] RGB in [0,1]. Grayscale and alpha inputs are coerced to 3 channels.
inline Tensor<float> decode_image_rgb(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);  // always 8-bit BGR
    if (m.empty()) throw std::runtime_error("cannot decode image " + path);
    long h = m.rows, w = m.cols;
    Tensor<float> t({3, h, w});
    float* r = t.data();
    float* g = r + h * w;
    float* b = g + h * w;
    for (long y = 0; y < h; ++y) {
        const unsigned char* row = m.ptr<unsigned char>(int(y));
        for (long x = 0; x < w; ++x) {
            b[y * w + x] = float(row[3 * x + 0]) / 255.f;
            g[y * w + x] = float(row[3 * x + 1]) / 255.f;
            r[y * w + x] = float(row[3 * x + 2]) / 255.f;
        }
    }
    return t;
}

// [1,H,W] in {0,1}: 8-bit values binarize at threshold 128.
inline Tensor<float> decode_mask(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw std::runtime_error("cannot decode mask " + path);
    long h = m.rows, w = m.cols;
    Tensor<float> t({1, h, w});
    for (long y = 0; y < h; ++y) {
        const unsigned char* row = m.ptr<unsigned char>(int(y));
        for (long x = 0; x < w; ++x) t[y * w + x] = row[x] >= 128 ? 1.f : 0.f;
    }
    return t;
}

// ----------------------------------------------------- geometry on [c,h,w]

// Same half-pixel interpolation as the network's feature resize.
inline Tensor<float> resize_chw_bilinear(const Tensor<float>& img, long oh, long ow) {
    require_rank(img, 3, "image");
    long c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (h == oh && w == ow) return img;
    auto ay = detail::lerp_axis(h, oh);
    auto ax = detail::lerp_axis(w, ow);
    Tensor<float> out({c, oh, ow});
    for (long ch = 0; ch < c; ++ch) {
        const float* src = img.data() + ch * h * w;
        float* dst = out.data() + ch * oh * ow;
        for (long y = 0; y < oh; ++y) {
            double wy = ay.w1[y];
            const float* r0 = src + ay.i0[y] * w;
            const float* r1 = src + ay.i1[y] * w;
            for (long x = 0; x < ow; ++x) {
                double wx = ax.w1[x];
                double top = (1 - wx) * r0[ax.i0[x]] + wx * r0[ax.i1[x]];
                double bot = (1 - wx) * r1[ax.i0[x]] + wx * r1[ax.i1[x]];
                dst[y * ow + x] = float((1 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

// Nearest-neighbor with half-pixel centers; keeps masks strictly binary.
inline Tensor<float> resize_chw_nearest(const Tensor<float>& img, long oh, long ow) {
    require_rank(img, 3, "mask");
    long c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (h == oh && w == ow) return img;
    std::vector<long> iy(oh), ix(ow);
    for (long y = 0; y < oh; ++y)
        iy[y] = std::clamp(long((double(y) + 0.5) * double(h) / double(oh)), 0L, h - 1);
    for (long x = 0; x < ow; ++x)
        ix[x] = std::clamp(long((double(x) + 0.5) * double(w) / double(ow)), 0L, w - 1);
    Tensor<float> out({c, oh, ow});
    for (long ch = 0; ch < c; ++ch) {
        const float* src = img.data() + ch * h * w;
        float* dst = out.data() + ch * oh * ow;
        for (long y = 0; y < oh; ++y)
            for (long x = 0; x < ow; ++x) dst[y * ow + x] = src[iy[y] * w + ix[x]];
    }
    return out;
}

inline void hflip_chw(Tensor<float>& img) {
    long c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    for (long ch = 0; ch < c; ++ch)
        for (long y = 0; y < h; ++y) {
            float* row = img.data() + (ch * h + y) * w;
            for (long x = 0; x < w / 2; ++x) std::swap(row[x], row[w - 1 - x]);
        }
}

inline Tensor<float> crop_chw(const Tensor<float>& img, long y0, long x0, long ch_, long cw) {
    long c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (y0 < 0 || x0 < 0 || y0 + ch_ > h || x0 + cw > w)
        throw std::invalid_argument("crop window out of bounds");
    Tensor<float> out({c, ch_, cw});
    for (long ch = 0; ch < c; ++ch)
        for (long y = 0; y < ch_; ++y) {
            const float* src = img.data() + (ch * h + y0 + y) * w + x0;
            std::copy(src, src + cw, out.data() + (ch * ch_ + y) * cw);
        }
    return out;
}

inline void normalize_chw(Tensor<float>& img, const DataConfig& cfg) {
    long c = img.shape()[0], hw = img.shape()[1] * img.shape()[2];
    for (long ch = 0; ch < c; ++ch) {
        float* p = img.data() + ch * hw;
        for (long i = 0; i < hw; ++i) p[i] = (p[i] - cfg.mean[size_t(ch)]) / cfg.stdev[size_t(ch)];
    }
}

// ----------------------------------------------------------------- pipeline

namespace detail {

inline void require_pair_sizes(const Tensor<float>& img, const Tensor<float>& mask,
                               const std::string& id) {
    if (img.shape()[1] != mask.shape()[1] || img.shape()[2] != mask.shape()[2])
        throw std::runtime_error("sample '" + id + "': mask size " +
                                 std::to_string(mask.shape()[2]) + "x" +
                                 std::to_string(mask.shape()[1]) + " differs from image " +
                                 std::to_string(img.shape()[2]) + "x" +
                                 std::to_string(img.shape()[1]));
}

}  // namespace detail

// Resize both to cfg.resize, flip together with p=0.5, crop the same window
// (offsets uniform over [0, resize-crop]), normalize the image. Draw order
// from rng is pinned: flip, then y offset, then x offset.
inline std::pair<Tensor<float>, Tensor<float>> augment_train(const Sample& s,
                                                             const DataConfig& cfg, Rng& rng) {
    validate_data(cfg);
    if (s.mask_path.empty())
        throw std::invalid_argument("sample '" + s.id + "' has no mask to train on");
    Tensor<float> img = decode_image_rgb(s.image_path);
    Tensor<float> mask = decode_mask(s.mask_path);
    detail::require_pair_sizes(img, mask, s.id);

    img = resize_chw_bilinear(img, cfg.resize, cfg.resize);
    mask = resize_chw_nearest(mask, cfg.resize, cfg.resize);

    bool flip = rng.bernoulli(0.5);
    long max_off = cfg.resize - cfg.crop;
    long y0 = rng.uniform_int(0, max_off);
    long x0 = rng.uniform_int(0, max_off);
    if (flip) {
        hflip_chw(img);
        hflip_chw(mask);
    }
    img = crop_chw(img, y0, x0, cfg.crop, cfg.crop);
    mask = crop_chw(mask, y0, x0, cfg.crop, cfg.crop);
    normalize_chw(img, cfg);
    return {std::move(img), std::move(mask)};
}

struct EvalInput {
    Tensor<float> image;  // [3,resize,resize], normalized
    long orig_h = 0, orig_w = 0;
};

inline EvalInput preprocess_eval(const Sample& s, const DataConfig& cfg) {
    validate_data(cfg);
    EvalInput in;
    Tensor<float> img = decode_image_rgb(s.image_path);
    in.orig_h = img.shape()[1];
    in.orig_w = img.shape()[2];
    in.image = resize_chw_bilinear(img, cfg.resize, cfg.resize);
    normalize_chw(in.image, cfg);
    return in;
}

// ----------------------------------------------------------------- batching

inline std::vector<long> epoch_order(long n, uint64_t seed, long epoch) {
    std::vector<long> order(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) order[size_t(i)] = i;
    Rng rng(Rng::derive(seed, 0x0e, uint64_t(epoch)));
    rng.shuffle(order);
    return order;
}

// Consecutive slices of the epoch permutation; the last short batch is kept.
inline std::vector<std::vector<long>> epoch_batches(long n, long batch_size, uint64_t seed,
                                                    long epoch) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<long> order = epoch_order(n, seed, epoch);
    std::vector<std::vector<long>> out;
    for (long i = 0; i < n; i += batch_size) {
        long end = std::min(i + batch_size, n);
        out.emplace_back(order.begin() + i, order.begin() + end);
    }
    return out;
}

struct TrainBatch {
    Tensor<float> images;  // [n,3,crop,crop]
    Tensor<float> masks;   // [n,1,crop,crop]
    std::vector<long> ids;
};

// Each sample draws from its own stream keyed by (seed, epoch, sample id),
// so a batch's content is independent of how samples are grouped — resuming
// mid-epoch reproduces the uninterrupted batches exactly.
inline TrainBatch make_train_batch(const DatasetIndex& idx, const std::vector<long>& ids,
                                   const DataConfig& cfg, uint64_t seed, long epoch) {
    if (ids.empty()) throw std::invalid_argument("empty batch");
    long n = long(ids.size()), c = cfg.crop;
    TrainBatch b;
    b.images = Tensor<float>({n, 3, c, c});
    b.masks = Tensor<float>({n, 1, c, c});
    b.ids = ids;
    for (long i = 0; i < n; ++i) {
        const Sample& s = idx.samples.at(size_t(ids[size_t(i)]));
        Rng rng(Rng::derive(seed, 0xa06, uint64_t(epoch), uint64_t(ids[size_t(i)])));
        auto [img, mask] = augment_train(s, cfg, rng);
        std::copy(img.data(), img.data() + img.numel(), b.images.data() + i * 3 * c * c);
        std::copy(mask.data(), mask.data() + mask.numel(), b.masks.data() + i * c * c);
    }
    return b;
}

// ------------------------------------------------------------------ output

// 8-bit grayscale PNG at the original image size, value = round(255*p).
inline void save_prediction_png(const std::string& path, const Tensor<float>& prob, long orig_h,
                                long orig_w) {
    require_rank(prob, 3, "prediction");
    if (prob.shape()[0] != 1)
        throw ShapeError("prediction has " + std::to_string(prob.shape()[0]) +
                         " channels, expected 1");
    Tensor<float> up = resize_chw_bilinear(prob, orig_h, orig_w);
    cv::Mat m(int(orig_h), int(orig_w), CV_8UC1);
    for (long y = 0; y < orig_h; ++y) {
        unsigned char* row = m.ptr<unsigned char>(int(y));
        for (long x = 0; x < orig_w; ++x) {
            float p = std::clamp(up[y * orig_w + x], 0.f, 1.f);
            row[x] = static_cast<unsigned char>(std::lround(255.f * p));
        }
    }
    if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write prediction " + path);
}

// ---------------------------------------------------------- synthetic data

namespace synth {

// Tiny procedural corpus: noisy gradient background with one bright box or
// ellipse as the salient object. Enough signal for the desk-scale overfit
// runs while needing no downloads.
inline void write_dataset(const std::string& dir, long count, long hw, uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");
    for (long i = 0; i < count; ++i) {
        Rng rng(Rng::derive(seed, 0x5d, uint64_t(i)));
        cv::Mat img(static_cast<int>(hw), static_cast<int>(hw), CV_8UC3);
        cv::Mat mask(static_cast<int>(hw), static_cast<int>(hw), CV_8UC1, cv::Scalar(0));

        double base = rng.uniform(40, 110);
        double tilt = rng.uniform(-30, 30);
        for (long y = 0; y < hw; ++y) {
            unsigned char* row = img.ptr<unsigned char>(int(y));
            for (long x = 0; x < hw; ++x) {
                double v = base + tilt * double(y) / double(hw) + rng.uniform(-12, 12);
                for (int ch = 0; ch < 3; ++ch)
                    row[3 * x + ch] =
                        static_cast<unsigned char>(std::clamp(v + rng.uniform(-6, 6), 0.0, 255.0));
            }
        }

        bool ellipse = rng.bernoulli(0.5);
        long half = std::max(hw / 8, 2L);
        long ax = rng.uniform_int(half, hw / 3);
        long ay = rng.uniform_int(half, hw / 3);
        long cx = rng.uniform_int(ax, hw - 1 - ax);
        long cy = rng.uniform_int(ay, hw - 1 - ay);
        std::array<double, 3> color{rng.uniform(170, 250), rng.uniform(170, 250),
                                    rng.uniform(170, 250)};
        for (long y = 0; y < hw; ++y) {
            unsigned char* irow = img.ptr<unsigned char>(int(y));
            unsigned char* mrow = mask.ptr<unsigned char>(int(y));
            for (long x = 0; x < hw; ++x) {
                bool inside;
                if (ellipse) {
                    double dx = double(x - cx) / double(ax), dy = double(y - cy) / double(ay);
                    inside = dx * dx + dy * dy <= 1.0;
                } else {
                    inside = std::abs(x - cx) <= ax && std::abs(y - cy) <= ay;
                }
                if (inside) {
                    mrow[x] = 255;
                    for (int ch = 0; ch < 3; ++ch)
                        irow[3 * x + ch] = static_cast<unsigned char>(
                            std::clamp(color[size_t(ch)] + rng.uniform(-8, 8), 0.0, 255.0));
                }
            }
        }

        char name[32];
        std::snprintf(name, sizeof(name), "s%04ld", i);
        cv::imwrite((fs::path(dir) / "images" / (std::string(name) + ".png")).string(), img);
        cv::imwrite((fs::path(dir) / "masks" / (std::string(name) + ".png")).string(), mask);
    }
}

}  // namespace synth

}  // namespace gcpa

#endif
