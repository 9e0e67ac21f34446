#ifndef GCPA_METRICS_METRICS_HPP
#define GCPA_METRICS_METRICS_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gcpa/data/dataset.hpp"
#include "json.hpp"

namespace gcpa {

inline constexpr int kThresholds = 255;  // 8-bit levels 1..255
inline constexpr double kBeta2 = 0.3;    // precision-weighted F
inline constexpr double kSmEps = 1e-12;

struct PRCurve {
    std::array<int, kThresholds> thresholds{};  // filled 1..255
    std::array<double, kThresholds> precision{};
    std::array<double, kThresholds> recall{};
};

struct PerImageMetrics {
    std::string id;
    double mae = 0;
    double s_measure = 0;
};

struct MetricsReport {
    std::string dataset;
    double max_f = 0;
    double s_measure = 0;
    double mae = 0;
    PRCurve pr;
    std::array<double, kThresholds> f_curve{};
    std::vector<PerImageMetrics> per_image;
};

// ------------------------------------------------------------- primitives

inline double f_measure(double p, double r, double beta2 = kBeta2) {
    double den = beta2 * p + r;
    return den == 0 ? 0.0 : (1 + beta2) * p * r / den;
}

namespace detail {

inline void require_map_pair(const Tensor<float>& pred, const Tensor<float>& gt,
                             const std::string& what) {
    require_rank(pred, 3, what + " prediction");
    if (pred.shape()[0] != 1)
        throw ShapeError(what + " prediction has " + std::to_string(pred.shape()[0]) +
                         " channels, expected 1");
    if (pred.shape() != gt.shape())
        throw ShapeError(what + ": prediction shape " + pred.shape_str() +
                         " does not match mask " + shape_str(gt.shape()));
}

inline void require_binary(const Tensor<float>& gt, const std::string& what) {
    for (long i = 0; i < gt.numel(); ++i)
        if (gt[i] != 0.f && gt[i] != 1.f)
            throw std::invalid_argument(what + " mask is not binary at element " +
                                        std::to_string(i));
}

}  // namespace detail

// 8-bit quantization used for thresholding: round(255*clamp(s,0,1)).
inline std::vector<unsigned char> quantize_u8(const Tensor<float>& s) {
    std::vector<unsigned char> out(size_t(s.numel()));
    for (long i = 0; i < s.numel(); ++i) {
        double v = std::clamp(double(s[i]), 0.0, 1.0);
        out[size_t(i)] = static_cast<unsigned char>(std::floor(255.0 * v + 0.5));
    }
    return out;
}

// Per-image positive/negative histograms turned into cumulative counts:
// tp[t-1], fp[t-1] are the counts when binarizing at quantized value >= t.
struct ThresholdCounts {
    std::array<long, kThresholds> tp{};
    std::array<long, kThresholds> fp{};
    long positives = 0;
};

inline ThresholdCounts threshold_counts(const Tensor<float>& pred, const Tensor<float>& gt) {
    detail::require_map_pair(pred, gt, "threshold_counts");
    detail::require_binary(gt, "threshold_counts");
    std::vector<unsigned char> u8 = quantize_u8(pred);
    std::array<long, 256> hist_pos{}, hist_neg{};
    ThresholdCounts c;
    for (long i = 0; i < gt.numel(); ++i) {
        if (gt[i] == 1.f) {
            ++hist_pos[u8[size_t(i)]];
            ++c.positives;
        } else {
            ++hist_neg[u8[size_t(i)]];
        }
    }
    long tp = 0, fp = 0;
    for (int t = 255; t >= 1; --t) {
        tp += hist_pos[size_t(t)];
        fp += hist_neg[size_t(t)];
        c.tp[size_t(t - 1)] = tp;
        c.fp[size_t(t - 1)] = fp;
    }
    return c;
}

// Dataset PR: per-image precision/recall averaged across images (recorded
// aggregation choice). Degenerate rules: precision 1 when nothing is
// predicted positive, recall 1 for an empty ground truth.
inline PRCurve pr_points(const std::vector<Tensor<float>>& preds,
                         const std::vector<Tensor<float>>& gts) {
    if (preds.empty()) throw std::invalid_argument("pr_points needs at least one pair");
    if (preds.size() != gts.size())
        throw std::invalid_argument("pr_points got " + std::to_string(preds.size()) +
                                    " predictions and " + std::to_string(gts.size()) + " masks");
    PRCurve pr;
    for (int t = 0; t < kThresholds; ++t) pr.thresholds[size_t(t)] = t + 1;
    for (size_t i = 0; i < preds.size(); ++i) {
        ThresholdCounts c = threshold_counts(preds[i], gts[i]);
        for (int t = 0; t < kThresholds; ++t) {
            long tp = c.tp[size_t(t)], fp = c.fp[size_t(t)];
            pr.precision[size_t(t)] += tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp);
            pr.recall[size_t(t)] += c.positives == 0 ? 1.0 : double(tp) / double(c.positives);
        }
    }
    for (int t = 0; t < kThresholds; ++t) {
        pr.precision[size_t(t)] /= double(preds.size());
        pr.recall[size_t(t)] /= double(preds.size());
    }
    return pr;
}

inline std::array<double, kThresholds> f_curve_of(const PRCurve& pr, double beta2 = kBeta2) {
    std::array<double, kThresholds> f{};
    for (int t = 0; t < kThresholds; ++t)
        f[size_t(t)] = f_measure(pr.precision[size_t(t)], pr.recall[size_t(t)], beta2);
    return f;
}

inline double mae(const Tensor<float>& pred, const Tensor<float>& gt) {
    detail::require_map_pair(pred, gt, "mae");
    double acc = 0;
    for (long i = 0; i < pred.numel(); ++i) acc += std::abs(double(pred[i]) - double(gt[i]));
    return acc / double(pred.numel());
}

// ------------------------------------------------------- structure measure
//
// Port of the original structure-measure reference code: object term over
// gt-masked foreground/background with sample moments, region term as an
// area-weighted 4-block similarity split at the ground-truth centroid.

namespace detail {

struct SmView {
    const float* p;
    long h, w;
    double at(long y, long x) const { return double(p[y * w + x]); }
};

inline std::pair<long, long> sm_centroid(const SmView& gt, double total) {
    double sum_x = 0, sum_y = 0;
    for (long y = 0; y < gt.h; ++y)
        for (long x = 0; x < gt.w; ++x) {
            double v = gt.at(y, x);
            sum_x += double(x + 1) * v;
            sum_y += double(y + 1) * v;
        }
    long cx = long(std::floor(sum_x / total + 0.5)) - 1;
    long cy = long(std::floor(sum_y / total + 0.5)) - 1;
    return {cx, cy};
}

inline double sm_ssim_block(const SmView& sm, const SmView& gt, long r0, long r1, long c0,
                            long c1) {
    long n = (r1 - r0) * (c1 - c0);
    if (n == 0) return 0.0;
    double xm = 0, ym = 0;
    for (long y = r0; y < r1; ++y)
        for (long x = c0; x < c1; ++x) {
            xm += sm.at(y, x);
            ym += gt.at(y, x);
        }
    xm /= double(n);
    ym /= double(n);
    double sx2 = 0, sy2 = 0, sxy = 0;
    for (long y = r0; y < r1; ++y)
        for (long x = c0; x < c1; ++x) {
            double dx = sm.at(y, x) - xm, dy = gt.at(y, x) - ym;
            sx2 += dx * dx;
            sy2 += dy * dy;
            sxy += dx * dy;
        }
    if (n > 1) {
        sx2 /= double(n - 1);
        sy2 /= double(n - 1);
    } else {
        sx2 = sy2 = 0.0;
    }
    sxy /= double(n - 1) + kSmEps;
    double alpha = 4.0 * xm * ym * sxy;
    double beta = (xm * xm + ym * ym) * (sx2 + sy2);
    if (alpha != 0) return alpha / (beta + kSmEps);
    return beta == 0 ? 1.0 : 0.0;
}

inline double sm_region(const SmView& sm, const SmView& gt, double total) {
    auto [cx, cy] = sm_centroid(gt, total);
    long cs = cx + 1, rs = cy + 1;
    double area = double(gt.h * gt.w), q = 0;
    const long blocks[4][4] = {{0, rs, 0, cs}, {0, rs, cs, gt.w}, {rs, gt.h, 0, cs},
                               {rs, gt.h, cs, gt.w}};
    for (const auto& b : blocks) {
        double weight = double((b[1] - b[0]) * (b[3] - b[2])) / area;
        if (weight > 0) q += weight * sm_ssim_block(sm, gt, b[0], b[1], b[2], b[3]);
    }
    return q;
}

inline double sm_object_term(const std::vector<double>& vals) {
    double x = 0;
    for (double v : vals) x += v;
    x /= double(vals.size());
    double sigma = 0;
    if (vals.size() > 1) {
        for (double v : vals) sigma += (v - x) * (v - x);
        sigma = std::sqrt(sigma / double(vals.size() - 1));
    }
    return 2.0 * x / (x * x + 1.0 + sigma + kSmEps);
}

inline double sm_object(const SmView& sm, const SmView& gt, double mu) {
    std::vector<double> fg, bg;
    for (long y = 0; y < gt.h; ++y)
        for (long x = 0; x < gt.w; ++x) {
            if (gt.at(y, x) == 1.0)
                fg.push_back(sm.at(y, x));
            else
                bg.push_back(1.0 - sm.at(y, x));
        }
    return mu * sm_object_term(fg) + (1 - mu) * sm_object_term(bg);
}

}  // namespace detail

inline double s_measure(const Tensor<float>& pred, const Tensor<float>& gt, double alpha = 0.5) {
    detail::require_map_pair(pred, gt, "s_measure");
    detail::require_binary(gt, "s_measure");
    long h = gt.shape()[1], w = gt.shape()[2];
    detail::SmView sm{pred.data(), h, w}, gv{gt.data(), h, w};
    double total = 0;
    for (long i = 0; i < gt.numel(); ++i) total += double(gt[i]);
    double mu = total / double(gt.numel());
    double s;
    if (mu == 0.0) {
        double m = 0;
        for (long i = 0; i < pred.numel(); ++i) m += double(pred[i]);
        s = 1.0 - m / double(pred.numel());
    } else if (mu == 1.0) {
        double m = 0;
        for (long i = 0; i < pred.numel(); ++i) m += double(pred[i]);
        s = m / double(pred.numel());
    } else {
        s = alpha * detail::sm_object(sm, gv, mu) + (1 - alpha) * detail::sm_region(sm, gv, total);
    }
    return std::clamp(s, 0.0, 1.0);
}

// ------------------------------------------------------------- evaluation

// Grayscale PNG -> [1,H,W] in [0,1], continuous.
inline Tensor<float> load_saliency_map(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw std::runtime_error("cannot decode saliency map " + path);
    Tensor<float> t({1, m.rows, m.cols});
    for (long y = 0; y < m.rows; ++y) {
        const unsigned char* row = m.ptr<unsigned char>(int(y));
        for (long x = 0; x < m.cols; ++x) t[y * m.cols + x] = float(row[x]) / 255.f;
    }
    return t;
}

// Ground truth: warn once per file when the 8-bit data is not strictly
// {0,255}, then threshold at 128 as documented.
inline Tensor<float> load_gt_mask(const std::string& path, bool* warned = nullptr) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw std::runtime_error("cannot decode ground truth " + path);
    Tensor<float> t({1, m.rows, m.cols});
    bool clean = true;
    for (long y = 0; y < m.rows; ++y) {
        const unsigned char* row = m.ptr<unsigned char>(int(y));
        for (long x = 0; x < m.cols; ++x) {
            clean &= row[x] == 0 || row[x] == 255;
            t[y * m.cols + x] = row[x] >= 128 ? 1.f : 0.f;
        }
    }
    if (!clean) {
        std::fprintf(stderr, "warning: non-binary ground truth %s thresholded at 128\n",
                     path.c_str());
        if (warned) *warned = true;
    }
    return t;
}

namespace detail {

inline std::map<std::string, std::string> stems_of(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("no such directory: " + dir);
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
            out[e.path().stem().string()] = e.path().string();
    }
    return out;
}

inline std::string join_stems(const std::vector<std::string>& v) {
    std::string s;
    for (size_t i = 0; i < v.size() && i < 5; ++i) s += (i ? ", " : "") + v[i];
    if (v.size() > 5) s += ", ...";
    return s;
}

}  // namespace detail

inline MetricsReport evaluate(const std::string& pred_dir, const std::string& gt_dir,
                              const std::string& dataset_name) {
    auto preds = detail::stems_of(pred_dir);
    auto gts = detail::stems_of(gt_dir);
    if (gts.empty()) throw std::runtime_error("no ground-truth maps in " + gt_dir);

    std::vector<std::string> missing_pred, missing_gt;
    for (const auto& [stem, _] : gts)
        if (!preds.count(stem)) missing_pred.push_back(stem);
    for (const auto& [stem, _] : preds)
        if (!gts.count(stem)) missing_gt.push_back(stem);
    if (!missing_pred.empty() || !missing_gt.empty()) {
        std::string msg = "prediction/ground-truth stems do not match:";
        if (!missing_pred.empty())
            msg += " no prediction for " + detail::join_stems(missing_pred);
        if (!missing_gt.empty()) {
            if (!missing_pred.empty()) msg += ";";
            msg += " no ground truth for " + detail::join_stems(missing_gt);
        }
        throw std::runtime_error(msg);
    }

    MetricsReport rep;
    rep.dataset = dataset_name;
    PRCurve sum;
    for (int t = 0; t < kThresholds; ++t) sum.thresholds[size_t(t)] = t + 1;
    double mae_acc = 0, s_acc = 0;
    for (const auto& [stem, gt_path] : gts) {
        Tensor<float> gt = load_gt_mask(gt_path);
        Tensor<float> pred = load_saliency_map(preds.at(stem));
        if (pred.shape() != gt.shape())
            pred = resize_chw_bilinear(pred, gt.shape()[1], gt.shape()[2]);
        ThresholdCounts c = threshold_counts(pred, gt);
        for (int t = 0; t < kThresholds; ++t) {
            long tp = c.tp[size_t(t)], fp = c.fp[size_t(t)];
            sum.precision[size_t(t)] += tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp);
            sum.recall[size_t(t)] += c.positives == 0 ? 1.0 : double(tp) / double(c.positives);
        }
        PerImageMetrics row;
        row.id = stem;
        row.mae = mae(pred, gt);
        row.s_measure = s_measure(pred, gt);
        mae_acc += row.mae;
        s_acc += row.s_measure;
        rep.per_image.push_back(std::move(row));
    }
    double n = double(gts.size());
    rep.pr = sum;
    for (int t = 0; t < kThresholds; ++t) {
        rep.pr.precision[size_t(t)] /= n;
        rep.pr.recall[size_t(t)] /= n;
    }
    rep.f_curve = f_curve_of(rep.pr);
    rep.max_f = *std::max_element(rep.f_curve.begin(), rep.f_curve.end());
    rep.mae = mae_acc / n;
    rep.s_measure = s_acc / n;
    return rep;
}

// --------------------------------------------------------------- reports

inline void write_report(const MetricsReport& rep, const std::string& json_path,
                         const std::string& csv_path = "") {
    nlohmann::json j;
    j["dataset"] = rep.dataset;
    j["max_f"] = rep.max_f;
    j["s_measure"] = rep.s_measure;
    j["mae"] = rep.mae;
    j["thresholds"] = rep.pr.thresholds;
    j["precision"] = rep.pr.precision;
    j["recall"] = rep.pr.recall;
    j["f_curve"] = rep.f_curve;
    j["per_image"] = nlohmann::json::array();
    for (const auto& row : rep.per_image)
        j["per_image"].push_back(
            {{"id", row.id}, {"mae", row.mae}, {"s_measure", row.s_measure}});
    std::ofstream f(json_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write report " + json_path);
    f << j.dump(2) << '\n';

    if (!csv_path.empty()) {
        std::ofstream c(csv_path, std::ios::trunc);
        if (!c) throw std::runtime_error("cannot write per-image csv " + csv_path);
        c.precision(10);
        c << "id,mae,s_measure\n";
        for (const auto& row : rep.per_image)
            c << row.id << ',' << row.mae << ',' << row.s_measure << '\n';
    }
}

inline MetricsReport read_report(const std::string& json_path) {
    std::ifstream f(json_path);
    if (!f) throw std::runtime_error("cannot open report " + json_path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt report " + json_path + ": " + e.what());
    }
    MetricsReport rep;
    try {
        rep.dataset = j.at("dataset").get<std::string>();
        rep.max_f = j.at("max_f").get<double>();
        rep.s_measure = j.at("s_measure").get<double>();
        rep.mae = j.at("mae").get<double>();
        auto pull = [&](const char* key, auto& arr) {
            const auto& a = j.at(key);
            if (a.size() != kThresholds)
                throw std::runtime_error(std::string(key) + " does not have 255 entries");
            for (int t = 0; t < kThresholds; ++t) arr[size_t(t)] = a[size_t(t)];
        };
        pull("thresholds", rep.pr.thresholds);
        pull("precision", rep.pr.precision);
        pull("recall", rep.pr.recall);
        pull("f_curve", rep.f_curve);
        for (const auto& row : j.value("per_image", nlohmann::json::array())) {
            PerImageMetrics p;
            p.id = row.at("id").get<std::string>();
            p.mae = row.at("mae").get<double>();
            p.s_measure = row.at("s_measure").get<double>();
            rep.per_image.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt report " + json_path + ": " + e.what());
    }
    return rep;
}

}  // namespace gcpa

#endif
