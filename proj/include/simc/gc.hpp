#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

#include "field.hpp"
#include "prg.hpp"

namespace simc {

// 128-bit label.  The color (point-and-permute) bit is bit 0 of lo; the body
// is the other 127 bits.
struct Block {
    u64 lo = 0, hi = 0;
    Block operator^(const Block& o) const { return {lo ^ o.lo, hi ^ o.hi}; }
    Block& operator^=(const Block& o) { lo ^= o.lo; hi ^= o.hi; return *this; }
    bool operator==(const Block&) const = default;
    int color() const { return (int)(lo & 1); }
    // last h bits of the label (h <= 127), never touching the color bit
    u128 trun(int h) const {
        u128 v = ((u128)hi << 64) | lo;
        return h >= 128 ? v : (v >> (128 - h));
    }
    Block dbl() const {  // times x in GF(2^128)
        u64 carry = hi >> 63;
        return {(lo << 1) ^ (carry ? 0x87 : 0), (hi << 1) | (lo >> 63)};
    }
};
inline const Block kZero{};

inline Block rand_block(Prg& g) { return {g.next(), g.next()}; }

inline void put_block(std::vector<std::uint8_t>& out, const Block& b) {
    put_u64(out, b.lo);
    put_u64(out, b.hi);
}
inline Block get_block(Reader& r) {
    Block b;
    b.lo = r.u64_();
    b.hi = r.u64_();
    return b;
}

// H(x, j) = pi(2x ^ j) ^ 2x ^ j with pi a fixed-key AES-128 permutation.
class FixedKeyHash {
public:
    FixedKeyHash() : ctx_(EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free) {
        static const std::uint8_t key[16] = {0x61, 0x7e, 0x8d, 0xa2, 0xa0, 0x51, 0x1e, 0x96,
                                             0x5e, 0x41, 0xc2, 0x9b, 0x15, 0x3f, 0xc7, 0x7a};
        if (!ctx_ || EVP_EncryptInit_ex(ctx_.get(), EVP_aes_128_ecb(), nullptr, key, nullptr) != 1)
            throw std::runtime_error("AES init failed");
        EVP_CIPHER_CTX_set_padding(ctx_.get(), 0);
    }
    // hashes k blocks in place with tweaks j[i]
    void operator()(Block* x, const u64* j, int k) {
        std::uint8_t in[16 * 4], out[16 * 4];
        for (int i = 0; i < k; ++i) {
            x[i] = x[i].dbl();
            x[i].lo ^= j[i];
            std::memcpy(in + 16 * i, &x[i], 16);
        }
        int len = 0;
        EVP_EncryptUpdate(ctx_.get(), out, &len, in, 16 * k);
        for (int i = 0; i < k; ++i) {
            Block p;
            std::memcpy(&p, out + 16 * i, 16);
            x[i] ^= p;
        }
    }

private:
    std::unique_ptr<EVP_CIPHER_CTX, void (*)(EVP_CIPHER_CTX*)> ctx_;
};

enum class GateType : std::uint8_t { XOR, AND, NOT };

struct Gate {
    GateType type;
    std::uint32_t a, b, out;
};

// Output i is either a wire or a public constant.
struct OutWire {
    std::int64_t wire = -1;  // -1: constant
    int constant = 0;
};

struct BoolCircuit {
    std::uint32_t n_inputs = 0, n_wires = 0;
    std::vector<Gate> gates;
    std::vector<OutWire> outputs;
    std::uint32_t and_count = 0;

    std::vector<int> eval_plain(const std::vector<int>& in) const {
        if (in.size() != n_inputs) throw std::invalid_argument("input width mismatch");
        std::vector<int> w(n_wires, 0);
        for (size_t i = 0; i < in.size(); ++i) w[i] = in[i] & 1;
        for (auto& g : gates) {
            switch (g.type) {
                case GateType::XOR: w[g.out] = w[g.a] ^ w[g.b]; break;
                case GateType::AND: w[g.out] = w[g.a] & w[g.b]; break;
                case GateType::NOT: w[g.out] = w[g.a] ^ 1; break;
            }
        }
        std::vector<int> out;
        for (auto& o : outputs) out.push_back(o.wire < 0 ? o.constant : w[o.wire]);
        return out;
    }
};

// Builder with constant folding, so public constants never cost gates.
class CircuitBuilder {
public:
    struct Bit {
        bool is_const = true;
        int val = 0;
        std::uint32_t wire = 0;
    };
    explicit CircuitBuilder(std::uint32_t n_inputs) {
        c_.n_inputs = c_.n_wires = n_inputs;
    }
    Bit input(std::uint32_t i) const { return Bit{false, 0, i}; }
    static Bit constant(int v) { return Bit{true, v & 1, 0}; }

    Bit XOR(Bit a, Bit b) {
        if (a.is_const && b.is_const) return constant(a.val ^ b.val);
        if (a.is_const) std::swap(a, b);
        if (b.is_const) return b.val ? NOT(a) : a;
        return emit(GateType::XOR, a.wire, b.wire);
    }
    Bit AND(Bit a, Bit b) {
        if (a.is_const && b.is_const) return constant(a.val & b.val);
        if (a.is_const) std::swap(a, b);
        if (b.is_const) return b.val ? a : constant(0);
        c_.and_count++;
        return emit(GateType::AND, a.wire, b.wire);
    }
    Bit NOT(Bit a) {
        if (a.is_const) return constant(a.val ^ 1);
        return emit(GateType::NOT, a.wire, a.wire);
    }
    Bit OR(Bit a, Bit b) { return NOT(AND(NOT(a), NOT(b))); }
    void output(Bit b) { c_.outputs.push_back(b.is_const ? OutWire{-1, b.val} : OutWire{b.wire, 0}); }
    BoolCircuit finish() { return std::move(c_); }

private:
    Bit emit(GateType t, std::uint32_t a, std::uint32_t b) {
        std::uint32_t o = c_.n_wires++;
        c_.gates.push_back({t, a, b, o});
        return Bit{false, 0, o};
    }
    BoolCircuit c_;
};

// Inputs: kappa bits of <u>_0 then kappa bits of <u>_1 (LSB first).
// Outputs: u (kappa bits), sign(u), then kappa-1 constant zeros.
inline BoolCircuit build_sign_circuit(const FieldParams& fp) {
    const int k = fp.kappa;
    const u64 p = fp.p, h = fp.half();
    CircuitBuilder B(2 * k);
    using Bit = CircuitBuilder::Bit;

    // s = a + b, k+1 bits; carry c' = c ^ ((a^c) & (b^c))
    std::vector<Bit> s(k + 1);
    Bit c = CircuitBuilder::constant(0);
    for (int i = 0; i < k; ++i) {
        Bit a = B.input(i), b = B.input(k + i);
        Bit ac = B.XOR(a, c), bc = B.XOR(b, c);
        s[i] = B.XOR(ac, b);
        c = B.XOR(c, B.AND(ac, bc));
    }
    s[k] = c;

    // d = s - p; borrow out decides s >= p
    // s ^ d = p ^ borrow, kept separately so constants fold in the mux
    std::vector<Bit> sd(k + 1);
    Bit br = CircuitBuilder::constant(0);
    for (int i = 0; i <= k; ++i) {
        int pi = (int)((p >> i) & 1);
        sd[i] = B.XOR(CircuitBuilder::constant(pi), br);
        // borrow' = (~s & pi) | (~s & br) | (pi & br)
        Bit ns = B.NOT(s[i]);
        br = pi ? B.OR(ns, br) : B.AND(ns, br);
    }
    Bit ge = B.NOT(br);

    // u = ge ? d : s  ==  s ^ (ge & (s ^ d))
    std::vector<Bit> u(k);
    for (int i = 0; i < k; ++i) u[i] = B.XOR(s[i], B.AND(ge, sd[i]));

    // sign = [u < h]: borrow out of u - h
    Bit lt = CircuitBuilder::constant(0);
    for (int i = 0; i < k; ++i) {
        int hi_ = (int)((h >> i) & 1);
        Bit nu = B.NOT(u[i]);
        lt = hi_ ? B.OR(nu, lt) : B.AND(nu, lt);
    }

    for (int i = 0; i < k; ++i) B.output(u[i]);
    B.output(lt);
    for (int i = 1; i < k; ++i) B.output(CircuitBuilder::constant(0));
    return B.finish();
}

struct GarbledCircuit {
    std::vector<Block> table;  // two rows per AND gate, topological order
};

struct Garbling {
    GarbledCircuit gc;
    std::vector<Block> in0;   // label for 0 on each input wire
    std::vector<Block> out0;  // label for 0 on each output
    Block delta;
    Block in_label(size_t i, int v) const { return v ? in0[i] ^ delta : in0[i]; }
    Block out_label(size_t i, int v) const { return v ? out0[i] ^ delta : out0[i]; }
};

// Public label every evaluator uses for a constant output.
inline Block constant_label(int v) { return v ? Block{1, 0} : kZero; }

inline Garbling garble(const BoolCircuit& C, Prg& rng, FixedKeyHash& H) {
    Garbling G;
    G.delta = rand_block(rng);
    G.delta.lo |= 1;
    std::vector<Block> w(C.n_wires);
    for (std::uint32_t i = 0; i < C.n_inputs; ++i) w[i] = rand_block(rng);
    G.in0.assign(w.begin(), w.begin() + C.n_inputs);
    G.gc.table.reserve(2 * C.and_count);
    const Block R = G.delta;
    u64 gid = 0;
    for (auto& g : C.gates) {
        switch (g.type) {
            case GateType::XOR: w[g.out] = w[g.a] ^ w[g.b]; break;
            case GateType::NOT: w[g.out] = w[g.a] ^ R; break;
            case GateType::AND: {
                const Block a0 = w[g.a], b0 = w[g.b];
                const int pa = a0.color(), pb = b0.color();
                const u64 j0 = 2 * gid, j1 = 2 * gid + 1;
                Block x[4] = {a0, a0 ^ R, b0, b0 ^ R};
                const u64 tw[4] = {j0, j0, j1, j1};
                H(x, tw, 4);
                Block TG = x[0] ^ x[1];
                if (pb) TG ^= R;
                Block WG = x[0];
                if (pa) WG ^= TG;
                Block TE = x[2] ^ x[3] ^ a0;
                Block WE = x[2];
                if (pb) WE ^= TE ^ a0;
                G.gc.table.push_back(TG);
                G.gc.table.push_back(TE);
                w[g.out] = WG ^ WE;
                ++gid;
                break;
            }
        }
    }
    for (auto& o : C.outputs) {
        if (o.wire >= 0) {
            G.out0.push_back(w[o.wire]);
        } else {
            Block pub = constant_label(0);
            G.out0.push_back(o.constant ? pub ^ R : pub);
        }
    }
    return G;
}

inline std::vector<Block> gc_eval(const BoolCircuit& C, const GarbledCircuit& gc, const std::vector<Block>& in,
                                  FixedKeyHash& H) {
    if (in.size() != C.n_inputs) throw std::invalid_argument("one label per input wire");
    if (gc.table.size() != 2 * (size_t)C.and_count) throw std::invalid_argument("malformed garbled table");
    std::vector<Block> w(C.n_wires);
    std::copy(in.begin(), in.end(), w.begin());
    u64 gid = 0;
    for (auto& g : C.gates) {
        switch (g.type) {
            case GateType::XOR: w[g.out] = w[g.a] ^ w[g.b]; break;
            case GateType::NOT: w[g.out] = w[g.a]; break;
            case GateType::AND: {
                const Block A = w[g.a], Bl = w[g.b];
                const Block TG = gc.table[2 * gid], TE = gc.table[2 * gid + 1];
                Block x[2] = {A, Bl};
                const u64 tw[2] = {2 * gid, 2 * gid + 1};
                H(x, tw, 2);
                Block WG = x[0];
                if (A.color()) WG ^= TG;
                Block WE = x[1];
                if (Bl.color()) WE ^= TE ^ A;
                w[g.out] = WG ^ WE;
                ++gid;
                break;
            }
        }
    }
    std::vector<Block> out;
    for (auto& o : C.outputs) out.push_back(o.wire >= 0 ? w[o.wire] : constant_label(0));
    return out;
}

// header: lambda u16 | e u32 | inputs u32 | outputs u32, then the rows
inline constexpr size_t kGcHeader = 14;
inline void serialize_gc(std::vector<std::uint8_t>& out, const BoolCircuit& C, const GarbledCircuit& gc, int lambda = 128) {
    out.push_back((std::uint8_t)lambda);
    out.push_back((std::uint8_t)(lambda >> 8));
    put_u32(out, C.and_count);
    put_u32(out, C.n_inputs);
    put_u32(out, (std::uint32_t)C.outputs.size());
    for (auto& b : gc.table) put_block(out, b);
}
inline void serialize_gc_rows(std::vector<std::uint8_t>& out, const GarbledCircuit& gc) {
    for (auto& b : gc.table) put_block(out, b);
}
inline GarbledCircuit deserialize_gc(Reader& r, const BoolCircuit& C) {
    int lambda = r.u8_();
    lambda |= r.u8_() << 8;
    if (lambda != 128) throw std::runtime_error("unsupported label length");
    if (r.u32_() != C.and_count || r.u32_() != C.n_inputs || r.u32_() != C.outputs.size())
        throw std::runtime_error("garbled circuit header does not match the circuit");
    GarbledCircuit gc;
    r.need(32 * (size_t)C.and_count);
    for (std::uint32_t i = 0; i < 2 * C.and_count; ++i) gc.table.push_back(get_block(r));
    return gc;
}
inline GarbledCircuit deserialize_gc_rows(Reader& r, const BoolCircuit& C) {
    GarbledCircuit gc;
    r.need(32 * (size_t)C.and_count);
    for (std::uint32_t i = 0; i < 2 * C.and_count; ++i) gc.table.push_back(get_block(r));
    return gc;
}

}  // namespace simc
