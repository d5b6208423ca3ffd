#pragma once

#include <sodium.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"

namespace simc {

inline void sodium_once() {
    static const bool ok = sodium_init() >= 0;
    if (!ok) throw std::runtime_error("libsodium init failed");
}

// Seeded ChaCha20 stream.  Same (seed, label) -> same stream, always.
class Prg {
public:
    explicit Prg(u64 seed = 0, const std::string& label = "") {
        sodium_once();
        std::uint8_t in[8];
        for (int i = 0; i < 8; ++i) in[i] = (std::uint8_t)(seed >> (8 * i));
        crypto_generichash_state st;
        crypto_generichash_init(&st, nullptr, 0, key_.size());
        crypto_generichash_update(&st, in, 8);
        crypto_generichash_update(&st, (const std::uint8_t*)label.data(), label.size());
        crypto_generichash_final(&st, key_.data(), key_.size());
    }

    Prg fork(const std::string& label) {
        std::uint8_t k[8];
        bytes(k, 8);
        return Prg(get_u64(k), label);
    }

    void bytes(void* dst, size_t n) {
        auto* out = static_cast<std::uint8_t*>(dst);
        while (n) {
            if (pos_ == buf_.size()) refill();
            size_t k = std::min(n, buf_.size() - pos_);
            std::memcpy(out, buf_.data() + pos_, k);
            pos_ += k; out += k; n -= k;
        }
    }
    u64 next() {
        std::uint8_t b[8];
        bytes(b, 8);
        return get_u64(b);
    }
    int bit() { return (int)(next() & 1); }

    // rejection sampling keeps it exactly uniform
    fe uniform(u64 p) {
        int k = ceil_log2(p);
        u64 mask = k >= 64 ? ~0ull : ((1ull << k) - 1);
        for (;;) {
            u64 x = next() & mask;
            if (x < p) return x;
        }
    }
    fe nonzero(u64 p) {
        for (;;) {
            fe x = uniform(p);
            if (x) return x;
        }
    }
    fvec uniform_vec(u64 p, size_t n) {
        fvec v(n);
        for (auto& x : v) x = uniform(p);
        return v;
    }

private:
    void refill() {
        std::array<std::uint8_t, crypto_stream_chacha20_ietf_NONCEBYTES> nonce{};
        for (int i = 0; i < 8; ++i) nonce[i] = (std::uint8_t)(ctr_ >> (8 * i));
        ++ctr_;
        crypto_stream_chacha20_ietf(buf_.data(), buf_.size(), nonce.data(), key_.data());
        pos_ = 0;
    }
    std::array<std::uint8_t, crypto_stream_chacha20_ietf_KEYBYTES> key_{};
    std::array<std::uint8_t, 4096> buf_{};
    size_t pos_ = 4096;
    u64 ctr_ = 0;
};

}  // namespace simc
