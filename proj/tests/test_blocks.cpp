#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gcpa/blocks/blocks.hpp"
#include "testutil.hpp"

using namespace gcpa;
using namespace gcpa::testutil;

// Frozen outputs from scripts/oracle_blocks.py (float64 reference built from
// torch primitives with the same hand-set weights).

TEST_CASE("sr matches the frozen micro-case") {
    Rng rng(1);
    SR<double> sr(rng, 1, 1);
    fillseq(sr.conv6.conv.w.value(), 0.05, 0.02);
    sr.conv6.bn.gamma.value()[0] = 1.2;
    sr.conv6.bn.beta.value()[0] = 0.1;
    sr.conv6.bn.running_mean[0] = 0.0;
    sr.conv6.bn.running_var[0] = 0.8;
    fillseq(sr.convW.w.value(), 0.1, 0.02);
    sr.convW.b.value()[0] = 0.05;
    fillseq(sr.convB.w.value(), -0.05, 0.03);
    sr.convB.b.value()[0] = -0.02;

    Tensor<double> x({1, 1, 2, 2});
    fillseq(x, 0.5, 0.25);
    auto out = sr.forward(Var<double>(x), false);
    check_tensor(out.value(),
                 {1.00518696644766, 0.797189451077545, 0.415337134770389, 0.24148233383335}, 1e-12,
                 "sr");
}

TEST_CASE("ha matches the frozen micro-case") {
    Rng rng(2);
    HA<double> ha(rng, 2, 2, 2);
    fillseq(ha.conv_c.conv.w.value(), -0.1, 0.012);
    ha.conv_c.bn.gamma.value() = Tensor<double>({2}, {1.1, 0.9});
    ha.conv_c.bn.beta.value() = Tensor<double>({2}, {0.02, -0.03});
    ha.conv_c.bn.running_mean = Tensor<double>({2}, {0.1, -0.2});
    ha.conv_c.bn.running_var = Tensor<double>({2}, {0.9, 1.1});
    fillseq(ha.convW.w.value(), 0.08, -0.004);
    ha.convW.b.value() = Tensor<double>({2}, {0.01, -0.01});
    fillseq(ha.convB.w.value(), -0.06, 0.005);
    ha.convB.b.value() = Tensor<double>({2}, {0.03, 0.0});
    ha.fc1.w.value() = Tensor<double>({1, 2}, {0.4, -0.3});
    ha.fc1.b.value() = Tensor<double>({1}, {0.05});
    ha.fc2.w.value() = Tensor<double>({2, 1}, {0.7, -0.5});
    ha.fc2.b.value() = Tensor<double>({2}, {0.1, -0.2});

    Tensor<double> x({1, 2, 2, 2});
    fillseq(x, 0.1, 0.1);
    auto out = ha.forward(Var<double>(x), false);
    check_tensor(out.value(),
                 {0.0456985544354863, 0.0337535290535567, 0.00880173608231976, 0.0,
                  0.0876464499521475, 0.0888267363193226, 0.0896538042184937, 0.0893005857504897},
                 1e-12, "ha");
}

TEST_CASE("gcf matches the frozen micro-case") {
    Rng rng(3);
    GCF<double> gcf(rng, 2, 2, 2, false);
    for (int t = 0; t < 3; ++t) {
        auto& s = gcf.stages[t];
        s.fc3.w.value() = Tensor<double>({1, 2}, {0.5, 0.25});
        s.fc3.b.value() = Tensor<double>({1}, {-0.1});
        s.fc4.w.value() = Tensor<double>({2, 1}, {0.8, -0.6});
        s.fc4.b.value() = Tensor<double>({2}, {0.2, 0.1});
        fillseq(s.conv10.conv.w.value(), 0.05, 0.01);
        s.conv10.bn.gamma.value() = Tensor<double>({2}, {1.0, 1.3});
        s.conv10.bn.beta.value() = Tensor<double>({2}, {0.0, 0.05});
        s.conv10.bn.running_mean = Tensor<double>({2}, {-0.2, -0.05});
        s.conv10.bn.running_var = Tensor<double>({2}, {1.2, 0.7});
    }
    Tensor<double> x({1, 2, 1, 1}, {0.6, -0.4});
    for (int t = 1; t <= 3; ++t) {
        auto out = gcf.forward(Var<double>(x), t, false);
        check_tensor(out.value(), {0.094625444427469, 0.0793850942195231}, 1e-12, "gcf");
    }
}

TEST_CASE("fia matches the frozen micro-case") {
    Rng rng(4);
    FIA<double> fia(rng, 1, 1, true);
    fia.conv1.conv.w.value() = Tensor<double>({1, 1, 1, 1}, {0.9});
    fia.conv1.bn.gamma.value()[0] = 1.05;
    fia.conv1.bn.beta.value()[0] = 0.02;
    fia.conv1.bn.running_mean[0] = 0.1;
    fia.conv1.bn.running_var[0] = 0.95;
    fillseq(fia.conv2.w.value(), 0.1, 0.02);
    fia.conv2.b.value()[0] = 0.02;
    fillseq(fia.conv3.w.value(), 0.12, -0.03);
    fia.conv3.b.value()[0] = -0.01;
    fillseq(fia.conv4.w.value(), 0.2, -0.05);
    fia.conv4.b.value()[0] = 0.03;
    fillseq(fia.conv5.conv.w.value(), 0.02, 0.012);
    fia.conv5.bn.gamma.value()[0] = 1.1;
    fia.conv5.bn.beta.value()[0] = 0.05;
    fia.conv5.bn.running_mean[0] = -0.1;
    fia.conv5.bn.running_var[0] = 1.05;

    Tensor<double> f_l({1, 1, 4, 4});
    fillseq(f_l, 0.05, 0.05);
    Tensor<double> f_h({1, 1, 2, 2}, {0.3, -0.2, 0.5, 0.1});
    Tensor<double> f_g({1, 1, 1, 1}, {0.7});
    auto out = fia.forward(Var<double>(f_l), Var<double>(f_h), Var<double>(f_g), false);
    check_tensor(out.value(),
                 {0.168467769891056, 0.178048137991123, 0.187832561454696, 0.180249902289431,
                  0.186448336741338, 0.204196399327498, 0.214678978570637, 0.197073532765529,
                  0.220552699172383, 0.250534290966414, 0.257474453712913, 0.220196385802902,
                  0.200811496551835, 0.219989094067294, 0.222729062343636, 0.197005163841551},
                 1e-12, "fia");
}

// ------------------------------------------------------------- gradients

namespace {

std::vector<Var<double>> collect_vars(ParamList<double>& plist, std::vector<Var<double>> inputs) {
    for (auto& p : plist) inputs.push_back(p.var);
    return inputs;
}

}  // namespace

TEST_CASE("fia gradients") {
    Rng rng(31);
    FIA<double> fia(rng, 3, 2, true);
    auto f_l = leafv(random_tensor(rng, {1, 3, 4, 4}));
    auto f_h = leafv(random_tensor(rng, {1, 2, 2, 2}));
    auto f_g = leafv(random_tensor(rng, {1, 2, 1, 1}));
    ParamList<double> ps;
    fia.params("fia", ps);
    gradcheck(collect_vars(ps, {f_l, f_h, f_g}),
              [&] { return sum(fia.forward(f_l, f_h, f_g, true)); }, 1e-5, 2e-3);
}

TEST_CASE("sr gradients") {
    Rng rng(32);
    SR<double> sr(rng, 2, 2);
    auto x = leafv(random_tensor(rng, {1, 2, 3, 3}));
    ParamList<double> ps;
    sr.params("sr", ps);
    gradcheck(collect_vars(ps, {x}), [&] { return sum(sr.forward(x, true)); }, 1e-5, 2e-3);
}

TEST_CASE("ha gradients") {
    Rng rng(33);
    HA<double> ha(rng, 3, 2, 2);
    auto x = leafv(random_tensor(rng, {1, 3, 2, 2}));
    ParamList<double> ps;
    ha.params("ha", ps);
    gradcheck(collect_vars(ps, {x}), [&] { return sum(ha.forward(x, true)); }, 1e-5, 2e-3);
}

TEST_CASE("gcf gradients") {
    Rng rng(34);
    GCF<double> gcf(rng, 2, 2, 2, false);
    auto x = leafv(random_tensor(rng, {1, 2, 2, 2}));
    ParamList<double> ps;
    gcf.params("gcf", ps);
    gradcheck(collect_vars(ps, {x}), [&] { return sum(gcf.forward(x, 2, true)); }, 1e-5, 2e-3);
}

// ------------------------------------------------------------ invariants

TEST_CASE("fia gating annihilation") {
    Rng rng(35);
    FIA<double> fia(rng, 3, 4, true);  // fresh init: mask conv biases start at zero
    auto f_l = Var<double>(random_tensor(rng, {2, 3, 8, 8}));
    auto f_h0 = Var<double>(Tensor<double>({2, 4, 4, 4}));
    auto f_g = Var<double>(random_tensor(rng, {2, 4, 2, 2}));
    FIATrace<double> tr;
    fia.forward(f_l, f_h0, f_g, false, &tr);
    for (long i = 0; i < tr.f_hl.numel(); ++i) CHECK(tr.f_hl[i] == 0.0);
    for (long i = 0; i < tr.f_lh.numel(); ++i) CHECK(tr.f_lh[i] == 0.0);

    auto f_h = Var<double>(random_tensor(rng, {2, 4, 4, 4}));
    auto f_g0 = Var<double>(Tensor<double>({2, 4, 2, 2}));
    fia.forward(f_l, f_h, f_g0, false, &tr);
    for (long i = 0; i < tr.f_gl.numel(); ++i) CHECK(tr.f_gl[i] == 0.0);
    bool any = false;
    for (long i = 0; i < tr.f_hl.numel(); ++i) any |= tr.f_hl[i] != 0.0;
    CHECK(any);  // the other branches stay alive
}

TEST_CASE("ha and gcf broadcast a per-channel gate uniformly") {
    Rng rng(36);
    HA<double> ha(rng, 3, 4, 2);
    auto x = Var<double>(random_tensor(rng, {2, 3, 5, 5}));
    Tensor<double> pre, gate;
    auto out = ha.forward(x, false, &pre, &gate);
    long HW = 25;
    for (long nc = 0; nc < 2 * 4; ++nc)
        for (long i = 0; i < HW; ++i)
            if (std::abs(pre[nc * HW + i]) > 1e-9) {
                double ratio = out.value()[nc * HW + i] / pre[nc * HW + i];
                CHECK(ratio == doctest::Approx(gate[nc]).epsilon(1e-12));
            }

    GCF<double> gcf(rng, 3, 4, 2, false);
    auto top = Var<double>(random_tensor(rng, {2, 3, 4, 4}));
    auto gout = gcf.forward(top, 1, false, &pre, &gate);
    long HW2 = 16;
    for (long nc = 0; nc < 2 * 4; ++nc)
        for (long i = 0; i < HW2; ++i)
            if (std::abs(pre[nc * HW2 + i]) > 1e-9) {
                double ratio = gout.value()[nc * HW2 + i] / pre[nc * HW2 + i];
                CHECK(ratio == doctest::Approx(gate[nc]).epsilon(1e-12));
            }
}

TEST_CASE("ha with zeroed fc2 halves the refined map") {
    Rng rng(37);
    HA<double> ha(rng, 2, 4, 2);
    ha.fc2.w.value().fill(0);
    ha.fc2.b.value().fill(0);
    auto x = Var<double>(random_tensor(rng, {1, 2, 3, 3}));
    Tensor<double> pre;
    auto out = ha.forward(x, false, &pre);
    for (long i = 0; i < out.value().numel(); ++i)
        CHECK(out.value()[i] == doctest::Approx(0.5 * pre[i]).epsilon(1e-12));
}

TEST_CASE("block output shapes follow the closed form") {
    Rng rng(38);
    for (long n : {1L, 2L})
        for (long d : {2L, 4L}) {
            long cin = 3, h = 3, w = 2;
            FIA<double> fia(rng, cin, d, true);
            auto out = fia.forward(Var<double>(random_tensor(rng, {n, cin, 2 * h, 2 * w})),
                                   Var<double>(random_tensor(rng, {n, d, h, w})),
                                   Var<double>(random_tensor(rng, {n, d, 1, 1})), false);
            CHECK(out.shape() == std::vector<long>{n, d, 2 * h, 2 * w});

            SR<double> sr(rng, cin, d);
            auto sout = sr.forward(Var<double>(random_tensor(rng, {n, cin, h, w})), false);
            CHECK(sout.shape() == std::vector<long>{n, d, h, w});

            HA<double> haa(rng, cin, d, 2);
            auto hout = haa.forward(Var<double>(random_tensor(rng, {n, cin, h, w})), false);
            CHECK(hout.shape() == std::vector<long>{n, d, h, w});

            GCF<double> gcf(rng, cin, d, 1, false);
            auto gout = gcf.forward(Var<double>(random_tensor(rng, {n, cin, h, w})), 3, false);
            CHECK(gout.shape() == std::vector<long>{n, d, h, w});
        }
}

TEST_CASE("ha compresses a resnet-sized top to 256 channels") {
    Rng rng(39);
    HA<float> ha(rng, 2048, 256, 16);
    Tensor<float> x({1, 2048, 10, 10});
    for (long i = 0; i < x.numel(); ++i) x[i] = float(rng.uniform(-1, 1));
    NoGradGuard ng;
    auto out = ha.forward(Var<float>(std::move(x)), false);
    CHECK(out.shape() == std::vector<long>{1, 256, 10, 10});
}

TEST_CASE("gcf projects a resnet-sized top to d channels") {
    Rng rng(40);
    GCF<float> gcf(rng, 2048, 256, 16, false);
    Tensor<float> x({1, 2048, 10, 10});
    for (long i = 0; i < x.numel(); ++i) x[i] = float(rng.uniform(-1, 1));
    NoGradGuard ng;
    auto out = gcf.forward(Var<float>(std::move(x)), 1, false);
    CHECK(out.shape() == std::vector<long>{1, 256, 10, 10});
}

TEST_CASE("gcf stage validation and sharing") {
    Rng rng(41);
    GCF<double> per_stage(rng, 2, 2, 1, false);
    GCF<double> shared(rng, 2, 2, 1, true);
    auto x = Var<double>(random_tensor(rng, {1, 2, 2, 2}));
    CHECK_THROWS_AS(per_stage.forward(x, 0, false), std::invalid_argument);
    CHECK_THROWS_AS(per_stage.forward(x, 4, false), std::invalid_argument);

    ParamList<double> pa, pb;
    per_stage.params("g", pa);
    shared.params("g", pb);
    CHECK(pa.size() == 3 * pb.size());

    // shared mode: every stage computes with the same parameters
    auto o1 = shared.forward(x, 1, false);
    auto o2 = shared.forward(x, 2, false);
    for (long i = 0; i < o1.value().numel(); ++i) CHECK(o1.value()[i] == o2.value()[i]);
}

TEST_CASE("fia rejects mismatched pyramid shapes") {
    Rng rng(42);
    FIA<double> fia(rng, 3, 2, true);
    auto f_l = Var<double>(random_tensor(rng, {1, 3, 8, 8}));
    auto f_h_bad = Var<double>(random_tensor(rng, {1, 2, 3, 3}));
    auto f_g = Var<double>(random_tensor(rng, {1, 2, 1, 1}));
    CHECK_THROWS_AS(fia.forward(f_l, f_h_bad, f_g, false), ShapeError);
    auto f_h = Var<double>(random_tensor(rng, {1, 2, 4, 4}));
    CHECK_THROWS_AS(fia.forward(f_l, f_h, Var<double>{}, false), ShapeError);
}

TEST_CASE("blocks are deterministic across repeated calls") {
    Rng rng(43);
    FIA<double> fia(rng, 3, 2, true);
    auto f_l = Var<double>(random_tensor(rng, {2, 3, 6, 6}));
    auto f_h = Var<double>(random_tensor(rng, {2, 2, 3, 3}));
    auto f_g = Var<double>(random_tensor(rng, {2, 2, 3, 3}));
    auto a = fia.forward(f_l, f_h, f_g, false);
    auto b = fia.forward(f_l, f_h, f_g, false);
    for (long i = 0; i < a.value().numel(); ++i) CHECK(a.value()[i] == b.value()[i]);
}
