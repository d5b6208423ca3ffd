#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "prg.hpp"

namespace simc {

struct OpLedger {
    u64 rotations = 0, sc_mults = 0, ct_adds = 0, ct_mults = 0;
    u64 bytes_sent = 0, bytes_received = 0;

    void reset() { *this = OpLedger{}; }
    OpLedger operator-(const OpLedger& o) const {
        return {rotations - o.rotations, sc_mults - o.sc_mults, ct_adds - o.ct_adds,
                ct_mults - o.ct_mults, bytes_sent - o.bytes_sent, bytes_received - o.bytes_received};
    }
    OpLedger& operator+=(const OpLedger& o) {
        rotations += o.rotations; sc_mults += o.sc_mults; ct_adds += o.ct_adds; ct_mults += o.ct_mults;
        bytes_sent += o.bytes_sent; bytes_received += o.bytes_received;
        return *this;
    }
    bool same_ops(const OpLedger& o) const {
        return rotations == o.rotations && sc_mults == o.sc_mults && ct_adds == o.ct_adds && ct_mults == o.ct_mults;
    }
};

// A logical ciphertext (or plaintext encoding).  key_id == 0 means plaintext.
struct PackedVector {
    fvec slots;
    u64 key_id = 0;
    bool is_ct() const { return key_id != 0; }
    size_t size() const { return slots.size(); }
};

struct HeKeys {
    u64 pk = 0;  // public handle
    u64 sk = 0;  // secret handle; 0 on the side that only holds pk
};

inline bool is_pow2(u64 x) { return x && !(x & (x - 1)); }
inline int log2_exact(u64 x) {
    int k = 0;
    while ((u64(1) << k) < x) ++k;
    return k;
}

// Exact slot machine.  Values are stored in the clear; only the ledger makes
// it behave like an HE evaluator.  Any backend must offer this surface.
class SlotBackend {
public:
    using Ct = PackedVector;

    SlotBackend(const Field& F, size_t n, OpLedger* ledger) : F_(F), n_(n), led_(ledger) {
        if (!is_pow2(n)) throw std::invalid_argument("slot count must be a power of two");
    }

    const Field& field() const { return F_; }
    size_t slots() const { return n_; }
    OpLedger& ledger() { return *led_; }

    HeKeys keygen(Prg& rng) const {
        HeKeys k;
        k.pk = rng.next() | 1;
        k.sk = k.pk;
        return k;
    }

    PackedVector plain(fvec v) const {
        if (v.size() != n_) throw std::invalid_argument("wrong slot count");
        return PackedVector{std::move(v), 0};
    }
    PackedVector encrypt(u64 pk, const PackedVector& pt) const {
        if (pt.size() != n_) throw std::invalid_argument("wrong slot count");
        if (!pk) throw std::invalid_argument("no public key");
        return PackedVector{pt.slots, pk};
    }
    PackedVector encrypt(u64 pk, const fvec& v) const { return encrypt(pk, plain(v)); }
    fvec decrypt(const HeKeys& k, const PackedVector& ct) const {
        if (!ct.is_ct()) throw std::invalid_argument("not a ciphertext");
        if (k.sk == 0 || k.sk != ct.key_id) throw std::invalid_argument("decrypt needs the matching secret key");
        return ct.slots;
    }

    PackedVector rot(const PackedVector& ct, long j) const {
        need_ct(ct);
        long n = (long)n_;
        if (j <= -n || j >= n) throw std::out_of_range("rotation offset out of range");
        if (j == 0) return ct;
        size_t s = (size_t)((j % n + n) % n);
        PackedVector r{fvec(n_), ct.key_id};
        for (size_t i = 0; i < n_; ++i) r.slots[i] = ct.slots[(i + s) % n_];
        led_->rotations++;
        return r;
    }
    PackedVector sc_mult(const PackedVector& pt, const PackedVector& ct) const {
        need_ct(ct);
        if (pt.is_ct()) throw std::invalid_argument("sc_mult takes a plaintext; use ct_mult");
        same_len(pt, ct);
        PackedVector r{fvec(n_), ct.key_id};
        for (size_t i = 0; i < n_; ++i) r.slots[i] = F_.mul(pt.slots[i], ct.slots[i]);
        led_->sc_mults++;
        return r;
    }
    template <class MakePlain>
    PackedVector sc_mult_lazy(MakePlain&& mk, const PackedVector& ct) const {
        return sc_mult(mk(), ct);
    }
    PackedVector add(const PackedVector& a, const PackedVector& b) const {
        same_len(a, b);
        if (!a.is_ct() && !b.is_ct()) throw std::invalid_argument("add needs a ciphertext operand");
        PackedVector r{fvec(n_), a.is_ct() ? a.key_id : b.key_id};
        for (size_t i = 0; i < n_; ++i) r.slots[i] = F_.add(a.slots[i], b.slots[i]);
        if (a.is_ct() && b.is_ct()) led_->ct_adds++;
        return r;
    }
    // ct - pt / ct - ct; counted exactly like add
    PackedVector sub(const PackedVector& a, const PackedVector& b) const {
        need_ct(a);
        same_len(a, b);
        PackedVector r{fvec(n_), a.key_id};
        for (size_t i = 0; i < n_; ++i) r.slots[i] = F_.sub(a.slots[i], b.slots[i]);
        if (b.is_ct()) led_->ct_adds++;
        return r;
    }
    PackedVector ct_mult(const PackedVector& a, const PackedVector& b) const {
        need_ct(a);
        need_ct(b);
        same_len(a, b);
        PackedVector r{fvec(n_), a.key_id};
        for (size_t i = 0; i < n_; ++i) r.slots[i] = F_.mul(a.slots[i], b.slots[i]);
        led_->ct_mults++;
        return r;
    }
    // stands in for noise flooding / function privacy; slot values untouched
    PackedVector rerandomize(const PackedVector& ct) const {
        need_ct(ct);
        return ct;
    }

private:
    void need_ct(const PackedVector& v) const {
        if (!v.is_ct()) throw std::invalid_argument("operand must be a ciphertext");
    }
    void same_len(const PackedVector& a, const PackedVector& b) const {
        if (a.size() != b.size() || a.size() != n_) throw std::invalid_argument("slot length mismatch");
    }
    Field F_;
    size_t n_;
    OpLedger* led_;
};

// Symbolic twin of SlotBackend: no slot data, just the ledger.  Used to count
// geometries far too large to materialise.
struct SymCt {
    bool ct = true;
    bool is_ct() const { return ct; }
};

class CountBackend {
public:
    using Ct = SymCt;
    CountBackend(size_t n, OpLedger* ledger) : n_(n), led_(ledger) {
        if (!is_pow2(n)) throw std::invalid_argument("slot count must be a power of two");
    }
    size_t slots() const { return n_; }
    OpLedger& ledger() { return *led_; }
    SymCt fresh() const { return {}; }
    SymCt rot(const SymCt& c, long j) const {
        if (j != 0) led_->rotations++;
        return c;
    }
    template <class MakePlain>
    SymCt sc_mult_lazy(MakePlain&&, const SymCt& c) const {
        led_->sc_mults++;
        return c;
    }
    SymCt add(const SymCt& a, const SymCt& b) const {
        if (a.ct && b.ct) led_->ct_adds++;
        return SymCt{a.ct || b.ct};
    }
    SymCt rerandomize(const SymCt& c) const { return c; }

private:
    size_t n_;
    OpLedger* led_;
};

// wire codec: 0x01 | u32 slot count | slots as u64 LE
inline constexpr std::uint8_t kCtTag = 0x01;

inline void encode_ct(std::vector<std::uint8_t>& out, const PackedVector& ct) {
    out.push_back(kCtTag);
    put_u32(out, (std::uint32_t)ct.slots.size());
    for (fe x : ct.slots) put_u64(out, x);
}
inline PackedVector decode_ct(Reader& r, u64 key_id, const Field& F) {
    if (r.u8_() != kCtTag) throw std::runtime_error("bad ciphertext tag");
    std::uint32_t n = r.u32_();
    r.need((size_t)n * 8);
    PackedVector ct{fvec(n), key_id};
    for (auto& x : ct.slots) {
        x = r.u64_();
        if (x >= F.p()) throw std::runtime_error("ciphertext slot out of range");
    }
    return ct;
}
inline void encode_cts(std::vector<std::uint8_t>& out, const std::vector<PackedVector>& cts) {
    put_u32(out, (std::uint32_t)cts.size());
    for (auto& c : cts) encode_ct(out, c);
}
inline std::vector<PackedVector> decode_cts(Reader& r, u64 key_id, const Field& F, size_t expect_slots) {
    std::uint32_t k = r.u32_();
    std::vector<PackedVector> v;
    for (std::uint32_t i = 0; i < k; ++i) {
        v.push_back(decode_ct(r, key_id, F));
        if (v.back().size() != expect_slots) throw std::runtime_error("ciphertext slot count mismatch");
    }
    return v;
}
inline std::vector<std::uint8_t> encode_ct(const PackedVector& ct) {
    std::vector<std::uint8_t> out;
    encode_ct(out, ct);
    return out;
}

}  // namespace simc
