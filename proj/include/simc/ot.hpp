#pragma once

#include <sodium.h>

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gc.hpp"
#include "prg.hpp"
#include "transport.hpp"

namespace simc {

using OtPair = std::pair<Block, Block>;

class OtSender {
public:
    virtual ~OtSender() = default;
    virtual void send(Channel& ch, const std::vector<OtPair>& pairs) = 0;
};
class OtReceiver {
public:
    virtual ~OtReceiver() = default;
    virtual std::vector<Block> recv(Channel& ch, const std::vector<int>& choices) = 0;
};

// INSECURE test dealer: a trusted in-process third party that sees both
// message sets.  Deterministic, no traffic on the protocol channel.
class OtDealer {
public:
    void deposit(std::vector<OtPair> pairs) {
        std::lock_guard<std::mutex> lk(mu_);
        q_.push_back(std::move(pairs));
        cv_.notify_all();
    }
    std::vector<Block> take(const std::vector<int>& choices) {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return !q_.empty(); });
        auto pairs = std::move(q_.front());
        q_.pop_front();
        if (pairs.size() != choices.size()) throw ProtocolError("OT batch size mismatch");
        std::vector<Block> out;
        for (size_t i = 0; i < pairs.size(); ++i) out.push_back(choices[i] ? pairs[i].second : pairs[i].first);
        return out;
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::vector<OtPair>> q_;
};

class DealerOtSender : public OtSender {
public:
    explicit DealerOtSender(std::shared_ptr<OtDealer> d) : d_(std::move(d)) {}
    void send(Channel&, const std::vector<OtPair>& pairs) override { d_->deposit(pairs); }

private:
    std::shared_ptr<OtDealer> d_;
};
class DealerOtReceiver : public OtReceiver {
public:
    explicit DealerOtReceiver(std::shared_ptr<OtDealer> d) : d_(std::move(d)) {}
    std::vector<Block> recv(Channel&, const std::vector<int>& c) override { return d_->take(c); }

private:
    std::shared_ptr<OtDealer> d_;
};

namespace detail {
using Point = std::array<std::uint8_t, crypto_core_ristretto255_BYTES>;
using Scalar = std::array<std::uint8_t, crypto_core_ristretto255_SCALARBYTES>;

inline Scalar rand_scalar(Prg& g) {
    std::uint8_t wide[crypto_core_ristretto255_NONREDUCEDSCALARBYTES];
    g.bytes(wide, sizeof wide);
    Scalar s;
    crypto_core_ristretto255_scalar_reduce(s.data(), wide);
    return s;
}
inline Block kdf(u64 idx, const Point& A, const Point& B, const Point& K) {
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, 16);
    std::uint8_t ib[8];
    for (int i = 0; i < 8; ++i) ib[i] = (std::uint8_t)(idx >> (8 * i));
    crypto_generichash_update(&st, ib, 8);
    crypto_generichash_update(&st, A.data(), A.size());
    crypto_generichash_update(&st, B.data(), B.size());
    crypto_generichash_update(&st, K.data(), K.size());
    std::uint8_t out[16];
    crypto_generichash_final(&st, out, 16);
    Block b;
    std::memcpy(&b, out, 16);
    return b;
}
}  // namespace detail

// Chou-Orlandi style base OT over ristretto255.  Randomness comes from the
// caller's seeded PRG so transcripts are reproducible.
class BaseOtSender : public OtSender {
public:
    BaseOtSender(Prg rng, Phase phase = Phase::ot) : rng_(std::move(rng)), phase_(phase) { sodium_once(); }
    void send(Channel& ch, const std::vector<OtPair>& pairs) override {
        using namespace detail;
        Scalar a = rand_scalar(rng_);
        Point A;
        crypto_scalarmult_ristretto255_base(A.data(), a.data());
        ch.send(Msg::OT_SENDER_SETUP, phase_, Bytes(A.begin(), A.end()));
        Bytes keys = ch.expect(Msg::OT_RECEIVER_KEYS);
        if (keys.size() != pairs.size() * 32) throw ProtocolError("OT receiver key batch has wrong size");
        Bytes out;
        out.reserve(pairs.size() * 32);
        for (size_t i = 0; i < pairs.size(); ++i) {
            Point B, BA, K0, K1;
            std::memcpy(B.data(), keys.data() + 32 * i, 32);
            if (crypto_core_ristretto255_is_valid_point(B.data()) != 1) throw ProtocolError("invalid OT point");
            crypto_core_ristretto255_sub(BA.data(), B.data(), A.data());
            if (crypto_scalarmult_ristretto255(K0.data(), a.data(), B.data()) != 0 ||
                crypto_scalarmult_ristretto255(K1.data(), a.data(), BA.data()) != 0)
                throw ProtocolError("degenerate OT point");
            put_block(out, pairs[i].first ^ kdf(i, A, B, K0));
            put_block(out, pairs[i].second ^ kdf(i, A, B, K1));
        }
        ch.send(Msg::OT_SENDER_PAYLOAD, phase_, std::move(out));
    }

private:
    Prg rng_;
    Phase phase_;
};

class BaseOtReceiver : public OtReceiver {
public:
    BaseOtReceiver(Prg rng, Phase phase = Phase::ot) : rng_(std::move(rng)), phase_(phase) { sodium_once(); }
    std::vector<Block> recv(Channel& ch, const std::vector<int>& choices) override {
        using namespace detail;
        Bytes ab = ch.expect(Msg::OT_SENDER_SETUP);
        if (ab.size() != 32) throw ProtocolError("bad OT setup");
        Point A;
        std::memcpy(A.data(), ab.data(), 32);
        if (crypto_core_ristretto255_is_valid_point(A.data()) != 1) throw ProtocolError("invalid OT point");
        std::vector<Scalar> bs;
        std::vector<Point> Bs;
        Bytes keys;
        for (int c : choices) {
            Scalar b = rand_scalar(rng_);
            Point B;
            crypto_scalarmult_ristretto255_base(B.data(), b.data());
            if (c) crypto_core_ristretto255_add(B.data(), B.data(), A.data());
            keys.insert(keys.end(), B.begin(), B.end());
            bs.push_back(b);
            Bs.push_back(B);
        }
        ch.send(Msg::OT_RECEIVER_KEYS, phase_, std::move(keys));
        Bytes pay = ch.expect(Msg::OT_SENDER_PAYLOAD);
        if (pay.size() != choices.size() * 32) throw ProtocolError("OT payload has wrong size");
        Reader r(pay);
        std::vector<Block> out;
        for (size_t i = 0; i < choices.size(); ++i) {
            Block e0 = get_block(r), e1 = get_block(r);
            Point K;
            if (crypto_scalarmult_ristretto255(K.data(), bs[i].data(), A.data()) != 0) throw ProtocolError("degenerate OT point");
            out.push_back((choices[i] ? e1 : e0) ^ kdf(i, A, Bs[i], K));
        }
        return out;
    }

private:
    Prg rng_;
    Phase phase_;
};

// Reference size of OT_n^kappa with extension, in bits.
inline u64 ot_reference_bits(u64 kappa, u64 lambda, u64 n) { return kappa * lambda + 2 * n; }

}  // namespace simc
