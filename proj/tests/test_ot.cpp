#include <gtest/gtest.h>

#include <thread>

#include "simc/ot.hpp"

using namespace simc;

namespace {

std::vector<OtPair> rand_pairs(Prg& g, size_t n) {
    std::vector<OtPair> v;
    for (size_t i = 0; i < n; ++i) v.push_back({rand_block(g), rand_block(g)});
    return v;
}

std::vector<Block> run(OtSender& s, OtReceiver& r, const std::vector<OtPair>& pairs, const std::vector<int>& c,
                       Channel& a, Channel& b) {
    std::thread t([&] { s.send(a, pairs); });
    auto out = r.recv(b, c);
    t.join();
    return out;
}

}  // namespace

TEST(Ot, BaseOtCorrectness) {
    Prg g(1);
    auto [a, b] = InprocChannel::pair();
    auto pairs = rand_pairs(g, 1000);
    std::vector<int> choices;
    for (int i = 0; i < 1000; ++i) choices.push_back(g.bit());
    BaseOtSender s(Prg(2));
    BaseOtReceiver r(Prg(3));
    auto got = run(s, r, pairs, choices, *a, *b);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(got[i], choices[i] ? pairs[i].second : pairs[i].first) << i;
}

TEST(Ot, AllZeroAndAllOne) {
    Prg g(4);
    auto pairs = rand_pairs(g, 44);
    for (int c : {0, 1}) {
        auto [a, b] = InprocChannel::pair();
        BaseOtSender s(Prg(5));
        BaseOtReceiver r(Prg(6));
        auto got = run(s, r, pairs, std::vector<int>(44, c), *a, *b);
        for (int i = 0; i < 44; ++i) ASSERT_EQ(got[i], c ? pairs[i].second : pairs[i].first);
    }
}

TEST(Ot, DealerCorrectAndSilent) {
    auto d = std::make_shared<OtDealer>();
    DealerOtSender s(d);
    DealerOtReceiver r(d);
    Prg g(7);
    auto [a, b] = InprocChannel::pair();
    auto pairs = rand_pairs(g, 100);
    std::vector<int> c(100);
    for (auto& x : c) x = g.bit();
    auto got = run(s, r, pairs, c, *a, *b);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(got[i], c[i] ? pairs[i].second : pairs[i].first);
    EXPECT_EQ(a->bytes().total_sent(), 0u);
}

TEST(Ot, ReceiverViewIgnoresUnchosen) {
    // swap every unchosen message: receiver output (its whole view of results) is unchanged
    Prg g(8);
    auto pairs = rand_pairs(g, 64);
    std::vector<int> c(64);
    for (auto& x : c) x = g.bit();
    auto alt = pairs;
    for (int i = 0; i < 64; ++i) (c[i] ? alt[i].first : alt[i].second) = rand_block(g);
    auto [a1, b1] = InprocChannel::pair();
    auto [a2, b2] = InprocChannel::pair();
    BaseOtSender s1(Prg(9)), s2(Prg(9));
    BaseOtReceiver r1(Prg(10)), r2(Prg(10));
    auto o1 = run(s1, r1, pairs, c, *a1, *b1);
    auto o2 = run(s2, r2, alt, c, *a2, *b2);
    EXPECT_EQ(o1, o2);
    // and the sender's view (receiver keys) does not depend on unchosen data either
    EXPECT_EQ(a1->bytes().total_received(), a2->bytes().total_received());
}

TEST(Ot, DeterministicTranscript) {
    Prg g(11);
    auto pairs = rand_pairs(g, 44);
    std::vector<int> c(44, 1);
    std::string h[2];
    for (int k = 0; k < 2; ++k) {
        auto [a, b] = InprocChannel::pair();
        BaseOtSender s(Prg(12));
        BaseOtReceiver r(Prg(13));
        run(s, r, pairs, c, *a, *b);
        h[k] = a->transcript_hex();
    }
    EXPECT_EQ(h[0], h[1]);
}

TEST(Ot, TrafficAndReference) {
    Prg g(14);
    auto pairs = rand_pairs(g, 44);
    auto [a, b] = InprocChannel::pair();
    BaseOtSender s(Prg(15));
    BaseOtReceiver r(Prg(16));
    run(s, r, pairs, std::vector<int>(44, 0), *a, *b);
    // A, 44 receiver points, 44 pairs of 16-byte ciphertexts, plus 3 frame headers
    EXPECT_EQ(a->bytes().sent[(size_t)Phase::ot], 6u + 32 + 6 + 44 * 32);
    EXPECT_EQ(b->bytes().sent[(size_t)Phase::ot], 6u + 44 * 32);
    EXPECT_EQ(ot_reference_bits(44, 128, 128), 44u * 128 + 256);
}

TEST(Ot, RejectsMalformedPayload) {
    auto [a, b] = InprocChannel::pair();
    BaseOtReceiver r(Prg(17));
    std::thread t([&, &a = a] {

        detail::Point A;
        detail::Scalar s{};
        s[0] = 5;
        crypto_scalarmult_ristretto255_base(A.data(), s.data());
        a->send(Msg::OT_SENDER_SETUP, Phase::ot, Bytes(A.begin(), A.end()));
        a->expect(Msg::OT_RECEIVER_KEYS);
        a->send(Msg::OT_SENDER_PAYLOAD, Phase::ot, Bytes(7));
    });
    EXPECT_THROW(r.recv(*b, {0, 1}), ProtocolError);
    t.join();
}
