#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <opencv2/imgcodecs.hpp>

#include "gcpa/cli/commands.hpp"

using namespace gcpa;
using namespace gcpa::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int k = 0;
        path = fs::temp_directory_path() /
               ("gcpa_cli_" + std::to_string(::getpid()) + "_" + std::to_string(k++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

struct CerrCapture {
    std::ostringstream ss;
    std::streambuf* old;
    CerrCapture() : old(std::cerr.rdbuf(ss.rdbuf())) {}
    ~CerrCapture() { std::cerr.rdbuf(old); }
    std::string str() const { return ss.str(); }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

long count_lines(const std::string& path) {
    std::ifstream f(path);
    long n = 0;
    std::string line;
    while (std::getline(f, line)) ++n;
    return n;
}

// Desk-scale run configuration over a freshly written synthetic corpus.
RunConfig desk_config(const fs::path& base, long samples = 6, long hw = 32) {
    RunConfig rc;
    rc.model.backbone.kind = "tiny";
    rc.model.d = 16;
    rc.model.reduction = 4;
    rc.train.epochs = 2;
    rc.train.batch_size = 3;
    rc.train.max_lr_backbone = 1e-2;
    rc.train.max_lr_head = 1e-2;
    rc.train.warmup_fraction = 0.25;
    rc.train.seed = 7;
    rc.data.resize = 32;
    rc.data.crop = 32;
    rc.data_root = (base / "data").string();
    rc.train_dataset = "synth";
    rc.output_dir = (base / "out").string();
    synth::write_dataset((base / "data" / "synth").string(), samples, hw, 5);
    return rc;
}

std::string write_config(const RunConfig& rc, const fs::path& where) {
    save_run_config(rc, where.string());
    return where.string();
}

}  // namespace

TEST_CASE("run config round trips through json") {
    ::unsetenv("GCPA_DATA_ROOT");
    TempDir dir;
    RunConfig rc;
    rc.model.backbone.kind = "tiny";
    rc.model.d = 24;
    rc.model.ablation.gcf_shared = true;
    rc.train.epochs = 5;
    rc.train.loss.lambda = {0.5, 0.25, 0.125};
    rc.checkpoint_every = 3;
    rc.data_root = "/some/root";
    rc.eval_datasets = {"ecssd", "dut-omron"};
    rc.eval_beta2 = 0.4;
    rc.output_dir = "runs/x";

    std::string path = write_config(rc, dir.path / "cfg.json");
    RunConfig back = load_run_config(path);
    CHECK(back == rc);
    CHECK(back.model.d == 24);
    CHECK(back.train.loss.lambda[2] == 0.125);
    CHECK(back.eval_datasets.size() == 2);
    CHECK(back.checkpoint_every == 3);

    SUBCASE("environment variable overrides the data root") {
        ::setenv("GCPA_DATA_ROOT", "/env/root", 1);
        RunConfig env = load_run_config(path);
        ::unsetenv("GCPA_DATA_ROOT");
        CHECK(env.data_root == "/env/root");
        CHECK_FALSE(env == rc);
    }

    SUBCASE("defaults materialize for an almost-empty config") {
        std::ofstream(dir.path / "min.json") << "{\"model\": {\"backbone\": \"tiny\"}}";
        RunConfig min = load_run_config((dir.path / "min.json").string());
        CHECK(min.model.d == 256);
        CHECK(min.train.epochs == 30);
        CHECK(min.data.resize == 320);
    }
}

TEST_CASE("run config validation gives actionable errors") {
    ::unsetenv("GCPA_DATA_ROOT");
    TempDir dir;
    auto expect_error = [&](const std::string& body, const char* needle) {
        std::ofstream(dir.path / "bad.json") << body;
        CHECK_THROWS_WITH_AS(load_run_config((dir.path / "bad.json").string()),
                             doctest::Contains(needle), std::exception);
    };
    expect_error("{\"model\": {\"backbone\": \"vgg\"}}", "'tiny' or 'resnet50'");
    expect_error("{\"model\": {\"spine\": 1}}", "unknown key 'spine'");
    expect_error("{\"train\": {\"lambda\": [1, 1]}}", "exactly 3");
    expect_error("{\"train\": {\"epochs\": 0}}", "epochs");
    expect_error("{\"data\": {\"resize\": 16, \"crop\": 32}}", "crop");
    expect_error("{\"model\": {\"ablation\": {\"use_fia\": false, \"use_gcf\": true}}}",
                 "use_gcf requires use_fia");
    expect_error("not json {", "not valid JSON");
    CHECK_THROWS_WITH_AS(load_run_config((dir.path / "absent.json").string()),
                         doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("cmd_train writes checkpoint, log and config snapshot") {
    ::unsetenv("GCPA_DATA_ROOT");
    TempDir dir;
    RunConfig rc = desk_config(dir.path);
    TrainArgs a;
    a.config_path = write_config(rc, dir.path / "cfg.json");

    std::ostringstream out;
    REQUIRE(cmd_train(a, out) == kOk);
    CHECK(out.str().find("trained 4 steps") != std::string::npos);

    fs::path od = dir.path / "out";
    CHECK(fs::is_regular_file(od / "config.json"));
    CHECK(load_run_config((od / "config.json").string()) == rc);
    CHECK(count_lines((od / "train_log.csv").string()) == 5);  // header + 4 steps

    Checkpoint ck = load_checkpoint((od / "checkpoint.gcpa").string());
    CHECK(ck.step == 4);
    CHECK(ck.config.at("network").at("backbone") == "tiny");

    SUBCASE("seed override lands in the snapshot") {
        a.seed = 99;
        a.output_dir = (dir.path / "out99").string();
        REQUIRE(cmd_train(a, out) == kOk);
        RunConfig snap = load_run_config((dir.path / "out99" / "config.json").string());
        CHECK(snap.train.seed == 99);
    }

    SUBCASE("missing dataset exits 2 with a clear message") {
        rc.data_root = (dir.path / "nowhere").string();
        TrainArgs bad;
        bad.config_path = write_config(rc, dir.path / "bad.json");
        CerrCapture cap;
        CHECK(cmd_train(bad, out) == kUsage);
        CHECK(cap.str().find("dataset not found") != std::string::npos);
    }

    SUBCASE("resume without a checkpoint exits 2") {
        a.resume = (dir.path / "ghost.gcpa").string();
        CHECK(cmd_train(a, out) == kUsage);
    }

    SUBCASE("bad config exits 2") {
        TrainArgs bad;
        bad.config_path = (dir.path / "absent.json").string();
        CerrCapture cap;
        CHECK(cmd_train(bad, out) == kUsage);
        CHECK(cap.str().find("config error") != std::string::npos);
    }
}

TEST_CASE("cmd_train resume continues to the same result as one uninterrupted run") {
    ::unsetenv("GCPA_DATA_ROOT");
    TempDir dir;
    RunConfig rc = desk_config(dir.path);
    rc.train.epochs = 4;  // 8-step schedule

    // one uninterrupted run through the CLI
    rc.output_dir = (dir.path / "full").string();
    TrainArgs full;
    full.config_path = write_config(rc, dir.path / "full.json");
    std::ostringstream out;
    REQUIRE(cmd_train(full, out) == kOk);

    // pause the same schedule at step 4 (as an interrupted run would) ...
    DatasetIndex idx = load_dataset(rc.data_root, rc.train_dataset, "train", true);
    Rng rng(uint64_t(rc.train.seed));
    GCPANet<float> model(rng, rc.model);
    Trainer<float> trainer(model, rc.train);
    RunOptions pause;
    pause.checkpoint_path = (dir.path / "part.gcpa").string();
    pause.max_steps = 4;
    trainer.run(idx, rc.data, pause);
    REQUIRE(trainer.step_count() == 4);

    // ... and let the CLI take it the rest of the way
    rc.output_dir = (dir.path / "resumed").string();
    TrainArgs rest;
    rest.config_path = write_config(rc, dir.path / "resumed.json");
    rest.resume = (dir.path / "part.gcpa").string();
    REQUIRE(cmd_train(rest, out) == kOk);

    Checkpoint a = load_checkpoint((dir.path / "full" / "checkpoint.gcpa").string());
    Checkpoint b = load_checkpoint((dir.path / "resumed" / "checkpoint.gcpa").string());
    CHECK(a.step == 8);
    CHECK(b.step == 8);
    // identical schedule and seed make the two checkpoint files byte-identical
    CHECK(slurp((dir.path / "full" / "checkpoint.gcpa").string()) ==
          slurp((dir.path / "resumed" / "checkpoint.gcpa").string()));
}

TEST_CASE("cmd_infer writes one map per image at original size") {
    ::unsetenv("GCPA_DATA_ROOT");
    TempDir dir;
    RunConfig rc = desk_config(dir.path);
    TrainArgs a;
    a.config_path = write_config(rc, dir.path / "cfg.json");
    std::ostringstream out;
    REQUIRE(cmd_train(a, out) == kOk);
    std::string ckpt = (dir.path / "out" / "checkpoint.gcpa").string();

    fs::path in = dir.path / "in";
    fs::create_directories(in);
    cv::imwrite((in / "wide.png").string(), cv::Mat(20, 30, CV_8UC3, cv::Scalar(90, 120, 200)));
    cv::imwrite((in / "square.png").string(), cv::Mat(32, 32, CV_8UC3, cv::Scalar(40, 60, 80)));
    cv::imwrite((in / "tiny.jpg").string(), cv::Mat(7, 9, CV_8UC3, cv::Scalar(10, 220, 10)));
    std::ofstream(in / "notes.txt") << "not an image";

    fs::path maps = dir.path / "maps";
    SUBCASE("clean directory exits 0 with matching stems") {
        CerrCapture cap;
        REQUIRE(cmd_infer(ckpt, in.string(), maps.string(), 32, out) == kOk);
        CHECK(cap.str().find("skipping non-image") != std::string::npos);
        CHECK_FALSE(fs::exists(maps / "notes.png"));

        cv::Mat wide = cv::imread((maps / "wide.png").string(), cv::IMREAD_UNCHANGED);
        REQUIRE_FALSE(wide.empty());
        CHECK(wide.channels() == 1);
        CHECK(wide.rows == 20);
        CHECK(wide.cols == 30);
        cv::Mat small = cv::imread((maps / "tiny.png").string(), cv::IMREAD_UNCHANGED);
        REQUIRE_FALSE(small.empty());
        CHECK(small.rows == 7);
        CHECK(small.cols == 9);

        // square input matches the network size, so the written bytes are
        // exactly round(255 * sigmoid(logit)) of a direct forward pass
        Checkpoint ck = load_checkpoint(ckpt);
        NetworkConfig nc = cli::detail::network_config_from_checkpoint(ck.config);
        Rng rng(0);
        GCPANet<float> model(rng, nc);
        cli::detail::load_model_weights(model, ck);
        DataConfig dc;
        dc.resize = 32;
        dc.crop = 32;
        Sample s{"square", (in / "square.png").string(), ""};
        EvalInput ei = preprocess_eval(s, dc);
        Tensor<float> batch({1, 3, 32, 32});
        std::copy(ei.image.data(), ei.image.data() + ei.image.numel(), batch.data());
        Var<float> probs = model.predict(Var<float>::leaf(std::move(batch), false));
        cv::Mat got = cv::imread((maps / "square.png").string(), cv::IMREAD_UNCHANGED);
        REQUIRE_FALSE(got.empty());
        bool all_match = true;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                double p = std::clamp(double(probs.value()[long(y) * 32 + x]), 0.0, 1.0);
                all_match = all_match &&
                            got.at<unsigned char>(y, x) == (unsigned char)std::lround(255 * p);
            }
        CHECK(all_match);
    }

    SUBCASE("undecodable image is a partial failure") {
        std::ofstream(in / "corrupt.png", std::ios::binary) << "\x89PNGgarbage";
        CerrCapture cap;
        CHECK(cmd_infer(ckpt, in.string(), maps.string(), 32, out) == kPartial);
        CHECK(cap.str().find("corrupt.png") != std::string::npos);
        CHECK(fs::exists(maps / "wide.png"));  // others still produced
        CHECK_FALSE(fs::exists(maps / "corrupt.png"));
    }

    SUBCASE("usage errors exit 2") {
        CerrCapture cap;
        CHECK(cmd_infer((dir.path / "ghost.gcpa").string(), in.string(), maps.string(), 32,
                        out) == kUsage);
        CHECK(cmd_infer(ckpt, in.string(), maps.string(), 30, out) == kUsage);  // not /16
        fs::path empty = dir.path / "empty";
        fs::create_directories(empty);
        CHECK(cmd_infer(ckpt, empty.string(), maps.string(), 32, out) == kUsage);
        CHECK(cmd_infer(ckpt, (dir.path / "nodir").string(), maps.string(), 32, out) == kUsage);
    }
}

namespace {

// Fixture pair shared with the metrics suite; frozen aggregates.
void write_eval_fixture(const fs::path& pd, const fs::path& gd) {
    auto write = [](const fs::path& p, long h, long w, auto f) {
        fs::create_directories(p.parent_path());
        cv::Mat m(int(h), int(w), CV_8UC1);
        for (long i = 0; i < h * w; ++i)
            m.at<unsigned char>(int(i / w), int(i % w)) = (unsigned char)f(i);
        REQUIRE(cv::imwrite(p.string(), m));
    };
    write(pd / "e1.png", 6, 6, [](long i) { return (i * 11 + 5) % 256; });
    write(pd / "e2.png", 6, 6, [](long i) { return (i * 7 + 13) % 256; });
    write(gd / "e1.png", 6, 6, [](long i) { return (i % 6) < 3 ? 255 : 0; });
    write(gd / "e2.png", 6, 6, [](long i) { return ((i / 6) % 2 == 0) ? 255 : 0; });
}

}  // namespace

TEST_CASE("cmd_eval writes a report and prints the summary row") {
    TempDir dir;
    fs::path pd = dir.path / "preds", gd = dir.path / "synthset" / "masks";
    write_eval_fixture(pd, gd);

    fs::path report = dir.path / "r" / "report.json";
    std::ostringstream out;
    REQUIRE(cmd_eval(pd.string(), gd.string(), report.string(), "fixture-e", out) == kOk);
    CHECK(fs::is_regular_file(report));
    CHECK(fs::is_regular_file(dir.path / "r" / "report.csv"));
    CHECK(out.str().find("F_beta") != std::string::npos);
    CHECK(out.str().find("fixture-e") != std::string::npos);
    CHECK(out.str().find("0.579") != std::string::npos);
    CHECK(out.str().find("0.306") != std::string::npos);
    CHECK(out.str().find("0.546") != std::string::npos);

    MetricsReport rep = read_report(report.string());
    CHECK(rep.max_f == doctest::Approx(0.579207920792).epsilon(1e-9));

    SUBCASE("default name comes from the dataset directory") {
        std::ostringstream o2;
        REQUIRE(cmd_eval(pd.string(), gd.string(), (dir.path / "r2.json").string(), "", o2) ==
                kOk);
        CHECK(o2.str().find("synthset") != std::string::npos);
    }

    SUBCASE("perfect predictions print ones and a zero") {
        std::ostringstream o2;
        REQUIRE(cmd_eval(gd.string(), gd.string(), (dir.path / "r3.json").string(), "self",
                         o2) == kOk);
        CHECK(o2.str().find("1.000  1.000  0.000") != std::string::npos);
    }

    SUBCASE("unmatched stems and empty gt exit 2") {
        fs::remove(pd / "e2.png");
        std::ostringstream o2;
        CerrCapture cap;
        CHECK(cmd_eval(pd.string(), gd.string(), (dir.path / "r4.json").string(), "", o2) ==
              kUsage);
        fs::path empty = dir.path / "empty";
        fs::create_directories(empty);
        CHECK(cmd_eval(pd.string(), empty.string(), (dir.path / "r5.json").string(), "", o2) ==
              kUsage);
    }
}

TEST_CASE("cmd_plot renders curves and csv sidecars from reports") {
    TempDir dir;
    fs::path pd = dir.path / "preds", gd = dir.path / "gt";
    write_eval_fixture(pd, gd);
    std::ostringstream out;
    REQUIRE(cmd_eval(pd.string(), gd.string(), (dir.path / "a.json").string(), "alpha", out) ==
            kOk);
    REQUIRE(cmd_eval(gd.string(), gd.string(), (dir.path / "b.json").string(), "bravo", out) ==
            kOk);

    fs::path plots = dir.path / "plots";
    REQUIRE(cmd_plot({(dir.path / "a.json").string(), (dir.path / "b.json").string()},
                     plots.string(), out) == kOk);
    for (const char* f : {"pr_curves.png", "f_curves.png", "pr_curves.csv", "f_curves.csv"}) {
        CHECK(fs::is_regular_file(plots / f));
        CHECK(fs::file_size(plots / f) > 0);
    }
    CHECK(count_lines((plots / "pr_curves.csv").string()) == 256);  // header + 255 thresholds
    CHECK(count_lines((plots / "f_curves.csv").string()) == 256);
    std::ifstream pc((plots / "pr_curves.csv").string());
    std::string header;
    std::getline(pc, header);
    CHECK(header == "threshold,alpha_precision,alpha_recall,bravo_precision,bravo_recall");
    std::ifstream fc((plots / "f_curves.csv").string());
    std::getline(fc, header);
    CHECK(header == "threshold,alpha,bravo");

    SUBCASE("rerun overwrites deterministically") {
        std::string before = slurp((plots / "pr_curves.csv").string());
        REQUIRE(cmd_plot({(dir.path / "a.json").string(), (dir.path / "b.json").string()},
                         plots.string(), out) == kOk);
        CHECK(slurp((plots / "pr_curves.csv").string()) == before);
    }

    SUBCASE("corrupt report exits 2") {
        std::ofstream(dir.path / "bad.json") << "{]";
        CerrCapture cap;
        CHECK(cmd_plot({(dir.path / "bad.json").string()}, plots.string(), out) == kUsage);
        CHECK(cmd_plot({}, plots.string(), out) == kUsage);
    }
}

TEST_CASE("cmd_ablate trains every variant and tabulates mae") {
    ::unsetenv("GCPA_DATA_ROOT");
    TempDir dir;
    RunConfig rc = desk_config(dir.path, 4, 32);
    rc.model.d = 8;
    rc.train.epochs = 1;
    rc.train.batch_size = 4;
    AblateArgs a;
    a.config_path = write_config(rc, dir.path / "cfg.json");

    std::ostringstream out;
    CerrCapture cap;
    REQUIRE(cmd_ablate(a, out) == kOk);

    fs::path od = dir.path / "out";
    CHECK(fs::is_regular_file(od / "config.json"));
    CHECK(fs::is_regular_file(od / "ablation.md"));
    std::string csv = slurp((od / "ablation.csv").string());
    CHECK(count_lines((od / "ablation.csv").string()) == 7);  // header + 6 variants
    for (const char* name :
         {"variant,mae", "baseline,", "+fia,", "+fia+sr,", "+fia+sr+ha,", "full,", "gcf-shared,"})
        CHECK(csv.find(name) != std::string::npos);

    std::string table = out.str();
    CHECK(table.find("baseline") != std::string::npos);
    CHECK(table.find("gcf variant") != std::string::npos);
    CHECK(table.find("gcf-shared") != std::string::npos);

    // every mae is a sane probability-scale number
    std::istringstream rows(csv);
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        double v = std::stod(line.substr(line.find(',') + 1));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    SUBCASE("desk-scale cap refuses oversized schedules") {
        rc.train.epochs = 3000;
        rc.train.batch_size = 1;  // 12000 steps, over the cap
        AblateArgs big;
        big.config_path = write_config(rc, dir.path / "big.json");
        CerrCapture cap2;
        CHECK(cmd_ablate(big, out) == kUsage);
        CHECK(cap2.str().find("--full-scale") != std::string::npos);
    }
}
