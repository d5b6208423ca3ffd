#include <gtest/gtest.h>

#include "simc/infer.hpp"
#include "simc/report.hpp"

using namespace simc;

namespace {
std::string model_path(const std::string& n) { return std::string(SIMC_SOURCE_DIR) + "/models/" + n + ".json"; }
std::string input_path(const std::string& n) { return std::string(SIMC_SOURCE_DIR) + "/models/" + n + "_input.json"; }

PartyOptions opts(u64 seed, OtMode m = OtMode::dealer, Deviation d = {}) {
    PartyOptions o;
    o.seed = seed;
    o.ot = m;
    o.dev = d;
    return o;
}
}  // namespace

TEST(Infer, TinyHonestMatchesOracle) {
    auto m = load_model(model_path("tiny"));
    auto x = load_input(input_path("tiny"));
    auto R = run_inproc(m, x, opts(1), opts(2));
    EXPECT_FALSE(R.server.abort);
    EXPECT_FALSE(R.client.abort);
    EXPECT_EQ(R.server.q, 0u);
    EXPECT_EQ(R.client.logits, plain_forward(m, x));
    EXPECT_EQ(R.server.triples_used, 16u);
    EXPECT_EQ(R.client.triples_used, 16u);
}

TEST(Infer, ConvModelHonest) {
    auto m = load_model(model_path("tiny_conv"));
    auto x = load_input(input_path("tiny_conv"));
    auto R = run_inproc(m, x, opts(3), opts(4));
    EXPECT_FALSE(R.client.abort);
    EXPECT_EQ(R.client.logits, plain_forward(m, x));
}

TEST(Infer, HonestSharesSatisfyInvariants) {
    auto m = load_model(model_path("tiny"));
    auto x = load_input(input_path("tiny"));
    auto R = run_inproc(m, x, opts(5), opts(6));
    Field F{FieldParams()};
    ASSERT_EQ(R.server.layers.size(), 2u);
    for (size_t i = 0; i < 2; ++i) {
        auto &S = R.server.layers[i], &C = R.client.layers[i];
        EXPECT_EQ(F.add(S.r, C.r), F.add(S.k, C.k));
        EXPECT_EQ(F.add(S.z, C.z), fvec(S.z.size(), 0));
    }
}

TEST(Infer, EachDeviationAborts) {
    auto m = load_model(model_path("tiny"));
    auto x = load_input(input_path("tiny"));
    for (const char* inj : {"nonlin:0:1", "nonlin:1:-5:3", "lin_t:1:1", "lin_d:2:7:2", "q:0:1"}) {
        auto R = run_inproc(m, x, opts(7), opts(8, OtMode::dealer, parse_deviation(inj)));
        EXPECT_TRUE(R.server.abort) << inj;
        EXPECT_TRUE(R.client.abort) << inj;
        EXPECT_TRUE(R.client.logits.empty());
    }
    EXPECT_THROW(run_inproc(m, x, opts(7), opts(8, OtMode::dealer, parse_deviation("lin_t:0:1"))), ConfigError);
    EXPECT_THROW(parse_deviation("bogus:0:1"), ConfigError);
}

TEST(Infer, ToyFieldCheckDetectionRate) {
    // q = s_1[0] for r - k = (1, 0, ...): zero only when s_1[0] = 0
    Field F(FieldParams(17, 16));
    Prg g(9, "check");
    std::vector<LayerShares> L(1);
    L[0].r = {1, 0, 0};
    L[0].k = {0, 0, 0};
    L[0].z = {0, 0};
    int caught = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        std::vector<fvec> s{g.uniform_vec(17, 3)}, sp{g.uniform_vec(17, 2)};
        caught += q_share(F, L, s, sp) != 0;
    }
    double rate = (double)caught / trials, p = 16.0 / 17.0, sd = std::sqrt(p * (1 - p) / trials);
    EXPECT_LT(std::fabs(rate - p), 4 * sd) << rate;
}

TEST(Infer, DeterministicTranscripts) {
    auto m = load_model(model_path("tiny"));
    auto x = load_input(input_path("tiny"));
    auto A = run_inproc(m, x, opts(11, OtMode::base), opts(12, OtMode::base));
    auto B = run_inproc(m, x, opts(11, OtMode::base), opts(12, OtMode::base));
    EXPECT_EQ(A.server.transcript, B.server.transcript);
    EXPECT_EQ(A.client.transcript, B.client.transcript);
    auto C = run_inproc(m, x, opts(13, OtMode::base), opts(12, OtMode::base));
    EXPECT_NE(A.server.transcript, C.server.transcript);
    EXPECT_EQ(A.client.logits, C.client.logits);
}

TEST(Infer, ModelValidation) {
    auto m = load_model(model_path("tiny"));
    auto bad = m;
    bad.layers[1].n_i = 9;
    EXPECT_THROW(validate_model(bad), ConfigError);
    auto big = m;
    big.input_bound = 1LL << 40;
    EXPECT_THROW(validate_model(big), ConfigError);
    EXPECT_NO_THROW(validate_model(m));
    EXPECT_THROW(load_model("/nonexistent.json"), ConfigError);
}

TEST(Infer, CountReportMatchesLedger) {
    auto m = load_model(model_path("mlp"));
    for (const char* meth : {"simc2", "simc"}) {
        m.method = meth;
        auto R = count_report(m);
        EXPECT_TRUE(R.match()) << meth;
        EXPECT_EQ(R.layers.size(), 3u);
    }
}

TEST(Infer, SheetsCount) {
    auto s = model_sheet("resnet18");
    EXPECT_TRUE(s.simc.match());
    EXPECT_TRUE(s.ours.match());
    EXPECT_LT(s.ours.measured.rotations, s.simc.measured.rotations);
}
