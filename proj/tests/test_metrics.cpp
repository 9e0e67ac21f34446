#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <unistd.h>

#include <opencv2/imgcodecs.hpp>

#include "gcpa/core/rng.hpp"
#include "gcpa/metrics/metrics.hpp"

using namespace gcpa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int k = 0;
        path = fs::temp_directory_path() /
               ("gcpa_metrics_" + std::to_string(::getpid()) + "_" + std::to_string(k++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// Deterministic arithmetic fixtures; the expected numbers below are frozen
// from an independent reference computation.
Tensor<float> grid_pred(long h, long w, long a, long b, long m, double den) {
    Tensor<float> t({1, h, w});
    for (long i = 0; i < h * w; ++i) t[i] = float(double((i * a + b) % m) / den);
    return t;
}

Tensor<float> grid_gt(long h, long w, long a, long b, long m, long thr) {
    Tensor<float> t({1, h, w});
    for (long i = 0; i < h * w; ++i) t[i] = ((i * a + b) % m) > thr ? 1.f : 0.f;
    return t;
}

Tensor<float> fixture_p_pred() { return grid_pred(4, 4, 37, 11, 256, 255); }
Tensor<float> fixture_p_gt() { return grid_gt(4, 4, 53, 7, 97, 48); }
Tensor<float> fixture_s1_pred() { return grid_pred(8, 8, 29, 3, 251, 250); }
Tensor<float> fixture_s1_gt() { return grid_gt(8, 8, 31, 5, 101, 50); }

Tensor<float> fixture_s2_pred() { return grid_pred(8, 8, 17, 9, 256, 255); }
Tensor<float> fixture_s2_gt() {
    Tensor<float> t({1, 8, 8});
    for (long i = 0; i < 64; ++i) {
        long x = i % 8, y = i / 8;
        t[i] = (x >= 2 && x <= 5 && y >= 2 && y <= 5) ? 1.f : 0.f;
    }
    return t;
}

Tensor<float> fixture_e1_pred() { return grid_pred(6, 6, 11, 5, 256, 255); }
Tensor<float> fixture_e1_gt() {
    Tensor<float> t({1, 6, 6});
    for (long i = 0; i < 36; ++i) t[i] = (i % 6) < 3 ? 1.f : 0.f;
    return t;
}
Tensor<float> fixture_e2_pred() { return grid_pred(6, 6, 7, 13, 256, 255); }
Tensor<float> fixture_e2_gt() {
    Tensor<float> t({1, 6, 6});
    for (long i = 0; i < 36; ++i) t[i] = ((i / 6) % 2 == 0) ? 1.f : 0.f;
    return t;
}

Tensor<float> constant_map(long h, long w, float v) {
    Tensor<float> t({1, h, w});
    for (long i = 0; i < t.numel(); ++i) t[i] = v;
    return t;
}

Tensor<float> random_pred(Rng& rng, long h, long w) {
    Tensor<float> t({1, h, w});
    for (long i = 0; i < t.numel(); ++i) t[i] = float(rng.uniform());
    return t;
}

Tensor<float> random_gt(Rng& rng, long h, long w, double p = 0.35) {
    Tensor<float> t({1, h, w});
    for (long i = 0; i < t.numel(); ++i) t[i] = rng.bernoulli(p) ? 1.f : 0.f;
    return t;
}

void write_gray_png(const fs::path& p, const Tensor<float>& t) {
    fs::create_directories(p.parent_path());
    int h = int(t.shape()[1]), w = int(t.shape()[2]);
    cv::Mat m(h, w, CV_8UC1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m.at<unsigned char>(y, x) = static_cast<unsigned char>(
                std::lround(255.0 * std::clamp(double(t[long(y) * w + x]), 0.0, 1.0)));
    REQUIRE(cv::imwrite(p.string(), m));
}

// In-test brute-force threshold oracle: direct per-threshold pixel counting
// with an independently written quantizer.
struct BruteCounts {
    std::array<long, 255> tp{}, fp{};
    long pos = 0;
};

BruteCounts brute_counts(const Tensor<float>& pred, const Tensor<float>& gt) {
    BruteCounts b;
    std::vector<int> u8(size_t(pred.numel()));
    for (long i = 0; i < pred.numel(); ++i) {
        double v = double(pred[i]);
        v = v < 0 ? 0 : (v > 1 ? 1 : v);
        u8[size_t(i)] = int(std::lround(255.0 * v));
        if (gt[i] == 1.f) ++b.pos;
    }
    for (int t = 1; t <= 255; ++t)
        for (long i = 0; i < pred.numel(); ++i) {
            if (u8[size_t(i)] < t) continue;
            if (gt[i] == 1.f)
                ++b.tp[size_t(t - 1)];
            else
                ++b.fp[size_t(t - 1)];
        }
    return b;
}

// Independent structure-measure port used only as a cross-check: same
// conventions, different code path (marginal-based centroid, value-vector
// statistics).
namespace smref {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double sample_var(const std::vector<double>& v, double m) {
    if (v.size() < 2) return 0.0;
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

double ssim(const std::vector<double>& x, const std::vector<double>& y) {
    double xm = mean_of(x), ym = mean_of(y);
    double vx = sample_var(x, xm), vy = sample_var(y, ym);
    double cov = 0;
    for (size_t i = 0; i < x.size(); ++i) cov += (x[i] - xm) * (y[i] - ym);
    cov /= double(x.size() - 1) + 1e-12;
    double alpha = 4 * xm * ym * cov;
    double beta = (xm * xm + ym * ym) * (vx + vy);
    if (alpha != 0) return alpha / (beta + 1e-12);
    return beta == 0 ? 1.0 : 0.0;
}

double object_term(const std::vector<double>& v) {
    double m = mean_of(v);
    double sd = std::sqrt(sample_var(v, m));
    return 2 * m / (m * m + 1 + sd + 1e-12);
}

double s_measure(const Tensor<float>& pred, const Tensor<float>& gt) {
    long h = gt.shape()[1], w = gt.shape()[2];
    double total = 0;
    for (long i = 0; i < gt.numel(); ++i) total += double(gt[i]);
    double mu = total / double(gt.numel());
    auto mean_pred = [&] {
        double m = 0;
        for (long i = 0; i < pred.numel(); ++i) m += double(pred[i]);
        return m / double(pred.numel());
    };
    if (mu == 0.0) return std::clamp(1.0 - mean_pred(), 0.0, 1.0);
    if (mu == 1.0) return std::clamp(mean_pred(), 0.0, 1.0);

    // object: gt-masked foreground on pred, background on its complement
    std::vector<double> fg, bg;
    for (long i = 0; i < gt.numel(); ++i)
        (gt[i] == 1.f ? fg : bg).push_back(gt[i] == 1.f ? double(pred[i])
                                                        : 1.0 - double(pred[i]));
    double so = mu * object_term(fg) + (1 - mu) * object_term(bg);

    // region: centroid from 1-based marginals, four area-weighted blocks
    std::vector<double> colsum(size_t(w), 0.0), rowsum(size_t(h), 0.0);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            colsum[size_t(x)] += double(gt[y * w + x]);
            rowsum[size_t(y)] += double(gt[y * w + x]);
        }
    double sx = 0, sy = 0;
    for (long x = 0; x < w; ++x) sx += double(x + 1) * colsum[size_t(x)];
    for (long y = 0; y < h; ++y) sy += double(y + 1) * rowsum[size_t(y)];
    long cx = long(std::floor(sx / total + 0.5)) - 1;
    long cy = long(std::floor(sy / total + 0.5)) - 1;
    long cs = cx + 1, rs = cy + 1;
    double sr = 0;
    const long lims[4][4] = {{0, rs, 0, cs}, {0, rs, cs, w}, {rs, h, 0, cs}, {rs, h, cs, w}};
    for (const auto& b : lims) {
        std::vector<double> px, gx;
        for (long y = b[0]; y < b[1]; ++y)
            for (long x = b[2]; x < b[3]; ++x) {
                px.push_back(double(pred[y * w + x]));
                gx.push_back(double(gt[y * w + x]));
            }
        if (px.empty()) continue;
        sr += double(px.size()) / double(h * w) * ssim(px, gx);
    }
    return std::clamp(0.5 * so + 0.5 * sr, 0.0, 1.0);
}

}  // namespace smref

}  // namespace

TEST_CASE("pr curve matches frozen reference points") {
    PRCurve pr = pr_points({fixture_p_pred()}, {fixture_p_gt()});
    CHECK(pr.thresholds.front() == 1);
    CHECK(pr.thresholds.back() == 255);

    auto at = [&](int tau) {
        return std::pair<double, double>{pr.precision[size_t(tau - 1)],
                                         pr.recall[size_t(tau - 1)]};
    };
    auto [p1, r1] = at(1);
    CHECK(p1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r1 == doctest::Approx(1.0).epsilon(1e-12));
    auto [p64, r64] = at(64);
    CHECK(p64 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r64 == doctest::Approx(0.625).epsilon(1e-12));
    auto [p128, r128] = at(128);
    CHECK(p128 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r128 == doctest::Approx(0.25).epsilon(1e-12));
    auto [p200, r200] = at(200);  // some negatives survive, no positives do
    CHECK(p200 == 0.0);
    CHECK(r200 == 0.0);
    auto [p255, r255] = at(255);  // nothing predicted positive at all
    CHECK(p255 == 1.0);
    CHECK(r255 == 0.0);

    auto f = f_curve_of(pr);
    double max_f = *std::max_element(f.begin(), f.end());
    CHECK(max_f == doctest::Approx(0.597701149425).epsilon(1e-9));
    CHECK(mae(fixture_p_pred(), fixture_p_gt()) == doctest::Approx(0.544607843137).epsilon(1e-6));
}

TEST_CASE("f measure formula and bounds") {
    CHECK(f_measure(0.8, 0.5) == doctest::Approx(0.702702702703).epsilon(1e-9));
    CHECK(f_measure(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f_measure(0.0, 0.0) == 0.0);
    CHECK(f_measure(0.0, 1.0) == 0.0);
    CHECK(f_measure(1.0, 0.0) == 0.0);
    // custom beta2 falls back to the harmonic-style blend
    CHECK(f_measure(0.8, 0.5, 1.0) == doctest::Approx(2 * 0.8 * 0.5 / 1.3).epsilon(1e-12));
}

TEST_CASE("threshold counts equal a brute-force count on random maps") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        long h = 5 + long(rng.uniform_int(0, 6)), w = 4 + long(rng.uniform_int(0, 7));
        Tensor<float> pred = random_pred(rng, h, w);
        Tensor<float> gt = trial == 0 ? constant_map(h, w, 0.f) : random_gt(rng, h, w);
        ThresholdCounts got = threshold_counts(pred, gt);
        BruteCounts want = brute_counts(pred, gt);
        CHECK(got.positives == want.pos);
        bool same = true;
        for (int t = 0; t < 255; ++t)
            same = same && got.tp[size_t(t)] == want.tp[size_t(t)] &&
                   got.fp[size_t(t)] == want.fp[size_t(t)];
        CHECK(same);
    }
}

TEST_CASE("pr curve invariants: bounds, monotone recall, perfect prediction") {
    Rng rng(55);
    std::vector<Tensor<float>> preds, gts;
    for (int i = 0; i < 4; ++i) {
        preds.push_back(random_pred(rng, 9, 7));
        gts.push_back(random_gt(rng, 9, 7));
    }
    PRCurve pr = pr_points(preds, gts);
    for (int t = 0; t < 255; ++t) {
        CHECK(pr.precision[size_t(t)] >= 0.0);
        CHECK(pr.precision[size_t(t)] <= 1.0);
        CHECK(pr.recall[size_t(t)] >= 0.0);
        CHECK(pr.recall[size_t(t)] <= 1.0);
        if (t > 0) CHECK(pr.recall[size_t(t)] <= pr.recall[size_t(t - 1)] + 1e-15);
    }

    SUBCASE("prediction equal to the mask is perfect at every threshold") {
        Tensor<float> gt = random_gt(rng, 8, 8, 0.5);
        PRCurve perfect = pr_points({gt}, {gt});
        for (int t = 0; t < 255; ++t) {
            CHECK(perfect.precision[size_t(t)] == 1.0);
            CHECK(perfect.recall[size_t(t)] == 1.0);
        }
        auto f = f_curve_of(perfect);
        CHECK(*std::max_element(f.begin(), f.end()) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mae(gt, gt) == 0.0);
    }

    SUBCASE("all-zero prediction never recalls anything") {
        Tensor<float> gt = random_gt(rng, 8, 8, 0.5);
        Tensor<float> zero = constant_map(8, 8, 0.f);
        PRCurve none = pr_points({zero}, {gt});
        for (int t = 0; t < 255; ++t) {
            CHECK(none.recall[size_t(t)] == 0.0);
            CHECK(none.precision[size_t(t)] == 1.0);  // vacuous precision
        }
    }

    SUBCASE("empty ground truth pins recall to one") {
        Tensor<float> pred = random_pred(rng, 8, 8);
        PRCurve pr0 = pr_points({pred}, {constant_map(8, 8, 0.f)});
        for (int t = 0; t < 255; ++t) CHECK(pr0.recall[size_t(t)] == 1.0);
    }
}

TEST_CASE("halving an even-valued map shifts thresholds consistently") {
    // Restricted to maps whose 8-bit values are all even so v/2 stays exact.
    Rng rng(91);
    Tensor<float> pred({1, 8, 8}), half({1, 8, 8});
    for (long i = 0; i < 64; ++i) {
        int v = 2 * int(rng.uniform_int(0, 127));
        pred[i] = float(v) / 255.f;
        half[i] = 0.5f * pred[i];
    }
    Tensor<float> gt = random_gt(rng, 8, 8, 0.5);
    ThresholdCounts a = threshold_counts(pred, gt);
    ThresholdCounts b = threshold_counts(half, gt);
    for (int t = 1; t <= 127; ++t) {
        CHECK(b.tp[size_t(t - 1)] == a.tp[size_t(2 * t - 1)]);
        CHECK(b.fp[size_t(t - 1)] == a.fp[size_t(2 * t - 1)]);
    }
    for (int t = 128; t <= 255; ++t) {
        CHECK(b.tp[size_t(t - 1)] == 0);
        CHECK(b.fp[size_t(t - 1)] == 0);
    }
}

TEST_CASE("mae matches frozen values and closed forms") {
    Tensor<float> gt = fixture_s2_gt();
    CHECK(mae(gt, gt) == 0.0);

    Tensor<float> inverted({1, 8, 8});
    for (long i = 0; i < 64; ++i) inverted[i] = 1.f - gt[i];
    CHECK(mae(inverted, gt) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor<float> c = constant_map(8, 8, 0.3f);
    CHECK(mae(c, constant_map(8, 8, 0.f)) == doctest::Approx(0.3).epsilon(1e-6));

    // |p-g| + |(1-p)-g| = 1 for binary g and p in [0,1]
    Rng rng(7);
    Tensor<float> pred = random_pred(rng, 8, 8);
    Tensor<float> comp({1, 8, 8});
    for (long i = 0; i < 64; ++i) comp[i] = 1.f - pred[i];
    CHECK(mae(pred, gt) + mae(comp, gt) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("structure measure matches frozen reference values") {
    CHECK(s_measure(fixture_s1_pred(), fixture_s1_gt()) ==
          doctest::Approx(0.296958398422).epsilon(1e-6));
    CHECK(s_measure(fixture_s2_pred(), fixture_s2_gt()) ==
          doctest::Approx(0.408446919016).epsilon(1e-6));

    SUBCASE("degenerate masks reduce to mean prediction") {
        Tensor<float> pred = fixture_s1_pred();  // mean frozen at 0.4814375
        CHECK(s_measure(pred, constant_map(8, 8, 0.f)) ==
              doctest::Approx(1.0 - 0.4814375).epsilon(1e-6));
        CHECK(s_measure(pred, constant_map(8, 8, 1.f)) ==
              doctest::Approx(0.4814375).epsilon(1e-6));
    }

    SUBCASE("perfect prediction scores one") {
        CHECK(s_measure(fixture_s2_gt(), fixture_s2_gt()) ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("structure measure agrees with an independent port on random maps") {
    Rng rng(424242);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor<float> pred = random_pred(rng, 8, 8);
        Tensor<float> gt = random_gt(rng, 8, 8, 0.1 + 0.8 * rng.uniform());
        double a = s_measure(pred, gt);
        double b = smref::s_measure(pred, gt);
        CHECK(a == doctest::Approx(b).epsilon(1e-6));
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
    // degenerate inputs route through the same rule in both ports
    Tensor<float> pred = random_pred(rng, 6, 9);
    CHECK(s_measure(pred, constant_map(6, 9, 0.f)) ==
          doctest::Approx(smref::s_measure(pred, constant_map(6, 9, 0.f))).epsilon(1e-12));
    CHECK(s_measure(pred, constant_map(6, 9, 1.f)) ==
          doctest::Approx(smref::s_measure(pred, constant_map(6, 9, 1.f))).epsilon(1e-12));
}

TEST_CASE("metric inputs are validated") {
    Tensor<float> p({1, 4, 4}), g({1, 4, 5});
    CHECK_THROWS_WITH_AS(mae(p, g), doctest::Contains("does not match"), ShapeError);
    CHECK_THROWS_WITH_AS(s_measure(p, g), doctest::Contains("does not match"), ShapeError);

    Tensor<float> multi({3, 4, 4});
    CHECK_THROWS_WITH_AS(threshold_counts(multi, multi), doctest::Contains("channels"),
                         ShapeError);

    Tensor<float> soft = constant_map(4, 4, 0.5f);
    CHECK_THROWS_WITH_AS(s_measure(soft, soft), doctest::Contains("not binary"),
                         std::invalid_argument);
    CHECK_THROWS_AS(pr_points({}, {}), std::invalid_argument);
    CHECK_THROWS_WITH_AS(pr_points({p}, {p, p}), doctest::Contains("1 predictions"),
                         std::invalid_argument);
}

TEST_CASE("evaluate aggregates a directory pair to frozen scores") {
    TempDir dir;
    fs::path pd = dir.path / "preds", gd = dir.path / "gt";
    write_gray_png(pd / "e1.png", fixture_e1_pred());
    write_gray_png(pd / "e2.png", fixture_e2_pred());
    write_gray_png(gd / "e1.png", fixture_e1_gt());
    write_gray_png(gd / "e2.png", fixture_e2_gt());

    MetricsReport rep = evaluate(pd.string(), gd.string(), "fixture-e");
    CHECK(rep.dataset == "fixture-e");
    CHECK(rep.per_image.size() == 2);
    CHECK(rep.per_image[0].id == "e1");
    CHECK(rep.per_image[1].id == "e2");
    CHECK(rep.max_f == doctest::Approx(0.579207920792).epsilon(1e-9));
    CHECK(rep.mae == doctest::Approx(0.545642701525).epsilon(1e-6));
    CHECK(rep.s_measure == doctest::Approx(0.306097359842).epsilon(1e-6));
    CHECK(rep.pr.precision[63] == doctest::Approx(0.472222222222).epsilon(1e-9));
    CHECK(rep.pr.recall[63] == doctest::Approx(0.666666666667).epsilon(1e-9));
    double avg = (rep.per_image[0].mae + rep.per_image[1].mae) / 2;
    CHECK(rep.mae == doctest::Approx(avg).epsilon(1e-12));

    SUBCASE("ground truth evaluated against itself is perfect") {
        MetricsReport self = evaluate(gd.string(), gd.string(), "self");
        CHECK(self.max_f == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(self.mae == 0.0);
        CHECK(self.s_measure == doctest::Approx(1.0).epsilon(1e-9));
    }

    SUBCASE("predictions at a different size are resized to the mask") {
        fs::path pd2 = dir.path / "half";
        write_gray_png(pd2 / "e1.png", constant_map(3, 3, 128.f / 255.f));
        write_gray_png(pd2 / "e2.png", constant_map(3, 3, 128.f / 255.f));
        MetricsReport r2 = evaluate(pd2.string(), gd.string(), "half");
        // constant stays constant under bilinear resize, so mae has a closed form
        CHECK(r2.per_image[0].mae == doctest::Approx(0.5).epsilon(2e-2));
        CHECK(std::isfinite(r2.s_measure));
    }

    SUBCASE("unmatched stems are an error in both directions") {
        fs::remove(pd / "e2.png");
        CHECK_THROWS_WITH_AS(evaluate(pd.string(), gd.string(), "x"),
                             doctest::Contains("no prediction for e2"), std::runtime_error);
        write_gray_png(pd / "e2.png", fixture_e2_pred());
        write_gray_png(pd / "extra.png", fixture_e2_pred());
        CHECK_THROWS_WITH_AS(evaluate(pd.string(), gd.string(), "x"),
                             doctest::Contains("no ground truth for extra"), std::runtime_error);
    }

    SUBCASE("empty or missing ground truth directory is an error") {
        fs::path empty = dir.path / "empty";
        fs::create_directories(empty);
        CHECK_THROWS_WITH_AS(evaluate(pd.string(), empty.string(), "x"),
                             doctest::Contains("no ground-truth maps"), std::runtime_error);
        CHECK_THROWS_WITH_AS(evaluate(pd.string(), (dir.path / "nope").string(), "x"),
                             doctest::Contains("no such directory"), std::runtime_error);
    }
}

TEST_CASE("non-binary ground truth warns and thresholds at 128") {
    TempDir dir;
    Tensor<float> gray({1, 2, 2});
    gray[0] = 77.f / 255.f;
    gray[1] = 200.f / 255.f;
    gray[2] = 0.f;
    gray[3] = 1.f;
    write_gray_png(dir.path / "g.png", gray);
    bool warned = false;
    Tensor<float> gt = load_gt_mask((dir.path / "g.png").string(), &warned);
    CHECK(warned);
    CHECK(gt[0] == 0.f);
    CHECK(gt[1] == 1.f);
    CHECK(gt[2] == 0.f);
    CHECK(gt[3] == 1.f);

    Tensor<float> clean({1, 2, 2});
    clean[0] = clean[1] = 1.f;
    clean[2] = clean[3] = 0.f;
    write_gray_png(dir.path / "c.png", clean);
    warned = false;
    load_gt_mask((dir.path / "c.png").string(), &warned);
    CHECK_FALSE(warned);
}

TEST_CASE("saliency maps load as continuous values") {
    TempDir dir;
    Tensor<float> pred = fixture_e1_pred();
    write_gray_png(dir.path / "p.png", pred);
    Tensor<float> back = load_saliency_map((dir.path / "p.png").string());
    REQUIRE(back.shape() == pred.shape());
    for (long i = 0; i < pred.numel(); ++i) CHECK(back[i] == pred[i]);  // u8/255 grid round-trips
    CHECK_THROWS_WITH_AS(load_saliency_map((dir.path / "missing.png").string()),
                         doctest::Contains("cannot decode"), std::runtime_error);
}

TEST_CASE("report json and csv round trip") {
    TempDir dir;
    fs::path pd = dir.path / "preds", gd = dir.path / "gt";
    write_gray_png(pd / "e1.png", fixture_e1_pred());
    write_gray_png(gd / "e1.png", fixture_e1_gt());
    MetricsReport rep = evaluate(pd.string(), gd.string(), "tiny");

    fs::path jp = dir.path / "report.json", cp = dir.path / "per_image.csv";
    write_report(rep, jp.string(), cp.string());
    MetricsReport back = read_report(jp.string());
    CHECK(back.dataset == rep.dataset);
    CHECK(back.max_f == rep.max_f);
    CHECK(back.s_measure == rep.s_measure);
    CHECK(back.mae == rep.mae);
    CHECK(back.pr.thresholds == rep.pr.thresholds);
    CHECK(back.pr.precision == rep.pr.precision);
    CHECK(back.pr.recall == rep.pr.recall);
    CHECK(back.f_curve == rep.f_curve);
    REQUIRE(back.per_image.size() == 1);
    CHECK(back.per_image[0].id == "e1");
    CHECK(back.per_image[0].mae == rep.per_image[0].mae);

    std::ifstream csv(cp);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "id,mae,s_measure");
    std::string row;
    std::getline(csv, row);
    CHECK(row.rfind("e1,", 0) == 0);

    SUBCASE("corrupt reports are rejected") {
        std::ofstream(dir.path / "garbage.json") << "not json {";
        CHECK_THROWS_WITH_AS(read_report((dir.path / "garbage.json").string()),
                             doctest::Contains("corrupt report"), std::runtime_error);
        nlohmann::json j;
        std::ifstream(jp) >> j;
        j["precision"] = {0.1, 0.2};
        std::ofstream(dir.path / "short.json") << j.dump();
        CHECK_THROWS_WITH_AS(read_report((dir.path / "short.json").string()),
                             doctest::Contains("255"), std::runtime_error);
        CHECK_THROWS_WITH_AS(read_report((dir.path / "absent.json").string()),
                             doctest::Contains("cannot open"), std::runtime_error);
    }
}
