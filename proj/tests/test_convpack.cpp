#include <gtest/gtest.h>

#include "simc/convpack.hpp"
#include "simc/prg.hpp"

using namespace simc;

namespace {

// independent oracle: zero-pad the image explicitly, then slide
Tensor oracle(const Field& F, const ConvGeometry& g, const Kernels& K, const Tensor& t) {
    long ph = (long)(g.k_h - 1) / 2, pw = (long)(g.k_w - 1) / 2;
    long H = (long)g.u_h + (long)g.k_h - 1, W = (long)g.u_w + (long)g.k_w - 1;
    std::vector<std::vector<u64>> padded(g.c_i, std::vector<u64>(H * W, 0));
    for (u64 c = 0; c < g.c_i; ++c)
        for (long y = 0; y < (long)g.u_h; ++y)
            for (long x = 0; x < (long)g.u_w; ++x) padded[c][(y + ph) * W + x + pw] = t[c][y * g.u_w + x];
    Tensor out(g.c_o, fvec(g.plane()));
    for (u64 o = 0; o < g.c_o; ++o)
        for (long y = 0; y < (long)g.u_h; ++y)
            for (long x = 0; x < (long)g.u_w; ++x) {
                unsigned __int128 acc = 0;
                for (u64 c = 0; c < g.c_i; ++c)
                    for (long ky = 0; ky < (long)g.k_h; ++ky)
                        for (long kx = 0; kx < (long)g.k_w; ++kx)
                            acc += (unsigned __int128)K[o][c][ky][kx] * padded[c][(y + ky) * W + x + kx];
                out[o][y * g.u_w + x] = (u64)(acc % F.p());
            }
    return out;
}

Kernels rand_kernels(Prg& r, u64 p, const ConvGeometry& g) {
    Kernels K(g.c_o, std::vector<std::vector<fvec>>(g.c_i, std::vector<fvec>(g.k_h)));
    for (auto& a : K)
        for (auto& b : a)
            for (auto& c : b) c = r.uniform_vec(p, g.k_w);
    return K;
}
Tensor rand_tensor(Prg& r, u64 p, const ConvGeometry& g) {
    Tensor t(g.c_i);
    for (auto& c : t) c = r.uniform_vec(p, g.plane());
    return t;
}

Tensor run(const Field& F, ConvMethod m, const ConvGeometry& g, const Kernels& K, const Tensor& t, OpLedger& led) {
    SlotBackend be(F, g.n, &led);
    auto P = plan_conv(m, g, &K);
    std::vector<PackedVector> in;
    for (auto& v : pack_conv_input(g, t)) in.push_back(be.encrypt(1, v));
    auto out = apply_conv(be, P, in)[0];
    std::vector<fvec> dec;
    for (auto& c : out) dec.push_back(c.slots);
    return unpack_conv_output(F, g, dec);
}

}  // namespace

TEST(Convpack, SisoOffsets) {
    ConvGeometry g{8, 8, 4, 3, 3, 4, 256};
    EXPECT_EQ(siso_offsets(g).size(), 9u);
    ConvGeometry g1{8, 8, 4, 1, 1, 4, 256};
    EXPECT_EQ(siso_offsets(g1).size(), 1u);
    OpLedger led;
    CountBackend cb(256, &led);
    auto P = plan_conv(ConvMethod::simc2, g);
    // c_n = 4, one input ciphertext -> 8 SISO rotations
    std::vector<SymCt> in(1);
    apply_conv(cb, P, in);
    EXPECT_EQ(led.rotations, 8u + 3u);
}

TEST(Convpack, OneHotStampsKernel) {
    Field F;
    Prg r(1);
    ConvGeometry g{8, 8, 2, 3, 3, 2, 128};
    auto K = rand_kernels(r, F.p(), g);
    Tensor t(2, fvec(64, 0));
    t[1][3 * 8 + 4] = 1;  // (y=3, x=4) in channel 1
    for (auto m : {ConvMethod::gazelle, ConvMethod::simc2}) {
        OpLedger led;
        auto out = run(F, m, g, K, t, led);
        for (u64 o = 0; o < 2; ++o)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx)
                    // out[y][x] picks in[y+ky-1][x+kx-1]; the one-hot sits at (3,4)
                    EXPECT_EQ(out[o][(3 - ky + 1) * 8 + (4 - kx + 1)], K[o][1][ky][kx]);
    }
}

TEST(Convpack, RandomOracleBothMethods) {
    Field F;
    Prg r(2);
    const ConvGeometry geos[] = {
        {4, 4, 4, 3, 3, 4, 32}, {4, 4, 4, 1, 1, 8, 32}, {8, 8, 4, 5, 5, 4, 128}, {4, 4, 8, 3, 3, 4, 32}, {4, 4, 2, 2, 2, 2, 32}};
    for (auto& g : geos)
        for (int it = 0; it < 10; ++it) {
            auto K = rand_kernels(r, F.p(), g);
            auto t = rand_tensor(r, F.p(), g);
            auto want = oracle(F, g, K, t);
            ASSERT_EQ(conv_plain(F, g, K, t), want);
            for (auto m : {ConvMethod::gazelle, ConvMethod::simc2}) {
                OpLedger led;
                ASSERT_EQ(run(F, m, g, K, t, led), want) << to_string(m);
                auto c = predict_conv_cost(m, g);
                ASSERT_EQ(led.rotations, c.rotations);
                ASSERT_EQ(led.sc_mults, c.sc_mults);
                ASSERT_EQ(led.ct_adds, c.adds);
            }
        }
}

TEST(Convpack, TableThreeFormula) {
    struct Row { ConvGeometry g; u64 simc2, gazelle, sc, add; };
    const Row rows[] = {
        {{16, 16, 128, 1, 1, 128, 4096}, 120, 960, 1024, 1016},
        {{16, 16, 2048, 1, 1, 512, 4096}, 480, 61440, 65536, 65504},
        {{16, 16, 128, 3, 3, 128, 4096}, 184, 1024, 9216, 9208},
        {{16, 16, 2048, 5, 5, 64, 4096}, 3132, 10752, 204800, 204796},
    };
    for (auto& r : rows) {
        auto s = predict_conv_cost(ConvMethod::simc2, r.g);
        auto z = predict_conv_cost(ConvMethod::gazelle, r.g);
        EXPECT_EQ(s.rotations, r.simc2);
        EXPECT_EQ(z.rotations, r.gazelle);
        EXPECT_EQ(s.sc_mults, r.sc);
        EXPECT_EQ(z.sc_mults, r.sc);
        EXPECT_EQ(s.adds, r.add);
        EXPECT_EQ(z.adds, r.add);
        for (auto m : {ConvMethod::gazelle, ConvMethod::simc2}) {
            OpLedger led;
            CountBackend cb(4096, &led);
            std::vector<SymCt> in(r.g.in_cts());
            apply_conv(cb, plan_conv(m, r.g), in);
            auto c = predict_conv_cost(m, r.g);
            EXPECT_EQ(led.rotations, c.rotations);
            EXPECT_EQ(led.sc_mults, c.sc_mults);
            EXPECT_EQ(led.ct_adds, c.adds);
        }
    }
}

TEST(Convpack, BlockAdvantageFactor) {
    ConvGeometry g{16, 16, 2048, 1, 1, 512, 4096};
    auto s = predict_conv_cost(ConvMethod::simc2, g), z = predict_conv_cost(ConvMethod::gazelle, g);
    EXPECT_EQ(z.rotations / s.rotations, g.c_i / g.c_n());
}

TEST(Convpack, GeometryErrors) {
    EXPECT_THROW((ConvGeometry{16, 16, 3, 1, 1, 16, 4096}.validate()), std::invalid_argument);
    EXPECT_THROW((ConvGeometry{3, 3, 16, 1, 1, 16, 4096}.validate()), std::invalid_argument);
    Kernels bad(2);
    EXPECT_THROW(plan_conv(ConvMethod::simc2, ConvGeometry{4, 4, 2, 1, 1, 4, 32}, &bad), std::invalid_argument);
}

TEST(Convpack, ExactLedgerAtTableGeometry) {
    Field F;
    Prg r(3);
    ConvGeometry g{16, 16, 128, 1, 1, 128, 4096};
    auto K = rand_kernels(r, F.p(), g);
    auto t = rand_tensor(r, F.p(), g);
    for (auto m : {ConvMethod::gazelle, ConvMethod::simc2}) {
        OpLedger led;
        auto out = run(F, m, g, K, t, led);
        EXPECT_EQ(led.rotations, m == ConvMethod::simc2 ? 120u : 960u);
        EXPECT_EQ(out[5], conv_plain(F, g, K, t)[5]);
    }
}
