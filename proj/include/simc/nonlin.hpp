#pragma once

#include <stdexcept>
#include <vector>

#include "gc.hpp"
#include "mac.hpp"
#include "ot.hpp"
#include "transport.hpp"

namespace simc {

// Authenticated shares out of one ReLU layer, plus the local g-shares of the
// recombination step (kept for the identity tests: g1 = αu, g2 = sign u,
// g3 = α sign u).
struct NonlinOutput {
    fvec k, t, d;
    fvec g1, g2, g3;
};

namespace detail {

struct BitWriter {
    Bytes out;
    int fill = 0;
    void put(u128 v, int n) {
        for (int i = 0; i < n; ++i) {
            if (fill == 0) out.push_back(0);
            out.back() |= (std::uint8_t)(((v >> i) & 1) << fill);
            fill = (fill + 1) & 7;
        }
    }
};
struct BitReader {
    const Bytes& in;
    size_t bit = 0;
    u128 get(int n) {
        if (bit + (size_t)n > in.size() * 8) throw ProtocolError("label ciphertexts truncated");
        u128 v = 0;
        for (int i = 0; i < n; ++i, ++bit) v |= (u128)((in[bit >> 3] >> (bit & 7)) & 1) << i;
        return v;
    }
};

// One-time pad from an output label.  Hashing the label (tweaked per output
// wire) rather than truncating it directly keeps pads of different wires
// unrelated even though free-XOR makes all label pairs differ by one offset.
inline u128 label_pad(FixedKeyHash& H, const Block& L, u64 out_index, int h) {
    Block x = L;
    const u64 tw = (u64(1) << 62) | out_index;
    H(&x, &tw, 1);
    return x.trun(h);
}

inline u128 mask_bits(int h) { return h >= 128 ? ~(u128)0 : (((u128)1 << h) - 1); }

}  // namespace detail

inline NonlinOutput nonlin_server(Channel& ch, const FieldParams& fp, const fvec& u0, fe alpha, TriplePool& pool,
                                  OtSender& ot, Prg& rng) {
    const Field F(fp);
    const int k = fp.kappa;
    if (fp.lambda < 2 * k) throw std::invalid_argument("label length must be at least 2*kappa");
    const BoolCircuit C = build_sign_circuit(fp);
    FixedKeyHash H;
    const size_t w = u0.size();
    if (pool.remaining() < w) throw std::runtime_error("triple pool exhausted");

    std::vector<Garbling> G;
    G.reserve(w);
    for (size_t j = 0; j < w; ++j) G.push_back(garble(C, rng, H));

    // garbled-circuit phase
    Bytes tab;
    for (size_t j = 0; j < w; ++j) {
        if (j == 0) serialize_gc(tab, C, G[0].gc);
        else serialize_gc_rows(tab, G[j].gc);
    }
    if (w == 0) serialize_gc(tab, C, GarbledCircuit{});
    ch.send(Msg::GC_TABLE, Phase::gc, std::move(tab));
    Bytes gin;
    for (size_t j = 0; j < w; ++j) {
        auto b = F.bits(u0[j]);
        for (int i = 0; i < k; ++i) put_block(gin, G[j].in_label(i, b[i]));
    }
    ch.send(Msg::GARBLED_INPUTS, Phase::gc, std::move(gin));
    std::vector<OtPair> pairs;
    pairs.reserve(w * k);
    for (size_t j = 0; j < w; ++j)
        for (int i = 0; i < k; ++i) pairs.push_back({G[j].in_label(k + i, 0), G[j].in_label(k + i, 1)});
    ot.send(ch, pairs);

    // authentication phase 1
    NonlinOutput o;
    o.g1.assign(w, 0);
    o.g2.assign(w, 0);
    o.g3.assign(w, 0);
    detail::BitWriter bw;
    for (size_t j = 0; j < w; ++j) {
        fe g1 = 0, g2 = 0, g3 = 0;
        std::vector<u128> ct(2 * k), cth(2 * k);
        for (int i = 0; i < k; ++i) {
            fe tau0 = rng.uniform(F.p()), rho0 = rng.uniform(F.p()), sig0 = rng.uniform(F.p());
            fe tau[2] = {tau0, F.add(alpha, tau0)};
            fe rho[2] = {rho0, F.add(1, rho0)};
            fe sig[2] = {sig0, F.add(alpha, sig0)};
            for (int v = 0; v < 2; ++v) {
                Block L = G[j].out_label(i, v);
                ct[2 * i + L.color()] = (u128)tau[v] ^ detail::label_pad(H, L, i, k);
                Block Lh = G[j].out_label(k + i, v);
                u128 rs = ((u128)rho[v] << k) | sig[v];
                cth[2 * i + Lh.color()] = rs ^ detail::label_pad(H, Lh, k + i, 2 * k);
            }
            const fe w2 = (u64(1) << i) % F.p();
            g1 = F.sub(g1, F.mul(tau0, w2));
            g2 = F.sub(g2, F.mul(rho0, w2));
            g3 = F.sub(g3, F.mul(sig0, w2));
        }
        for (int i = 0; i < 2 * k; ++i) bw.put(ct[i], k);
        for (int i = 0; i < 2 * k; ++i) bw.put(cth[i], 2 * k);
        o.g1[j] = g1;
        o.g2[j] = g2;
        o.g3[j] = g3;
    }
    ch.send(Msg::LABEL_CTS, Phase::auth1, std::move(bw.out));

    // authentication phase 2: z2 = u * g2, z3 = alpha * u * g2
    std::vector<BeaverTriple> T;
    fvec mine;
    for (size_t j = 0; j < w; ++j) {
        T.push_back(pool.take());
        mine.push_back(F.sub(u0[j], T[j].A));
        mine.push_back(F.sub(o.g2[j], T[j].B));
    }
    Bytes in = ch.expect(Msg::OPEN_GAMMA_LAMBDA);
    Reader r(in);
    fvec theirs = get_fvec(r);
    if (theirs.size() != 2 * w || !r.done()) throw ProtocolError("bad opening batch");
    for (fe x : theirs)
        if (x >= F.p()) throw ProtocolError("opened share out of range");
    Bytes pay;
    put_fvec(pay, mine);
    ch.send(Msg::OPEN_GAMMA_LAMBDA, Phase::auth2, std::move(pay));
    o.k = o.g1;
    o.t.resize(w);
    o.d.resize(w);
    for (size_t j = 0; j < w; ++j) {
        fe Gm = F.add(mine[2 * j], theirs[2 * j]), Lm = F.add(mine[2 * j + 1], theirs[2 * j + 1]);
        std::tie(o.t[j], o.d[j]) = beaver_combine(F, 0, Gm, Lm, T[j], alpha);
    }
    return o;
}

inline NonlinOutput nonlin_client(Channel& ch, const FieldParams& fp, const fvec& u1, TriplePool& pool, OtReceiver& ot) {
    const Field F(fp);
    const int k = fp.kappa;
    const BoolCircuit C = build_sign_circuit(fp);
    FixedKeyHash H;
    const size_t w = u1.size();
    if (pool.remaining() < w) throw std::runtime_error("triple pool exhausted");

    Bytes tab = ch.expect(Msg::GC_TABLE);
    if (tab.size() != kGcHeader + w * 32 * (size_t)C.and_count) throw ProtocolError("garbled table batch has wrong size");
    Reader tr(tab);
    std::vector<GarbledCircuit> gcs;
    for (size_t j = 0; j < w; ++j) gcs.push_back(j == 0 ? deserialize_gc(tr, C) : deserialize_gc_rows(tr, C));
    Bytes gin = ch.expect(Msg::GARBLED_INPUTS);
    if (gin.size() != w * k * 16) throw ProtocolError("garbled input batch has wrong size");
    Reader gr(gin);
    std::vector<int> choice;
    choice.reserve(w * k);
    for (size_t j = 0; j < w; ++j) {
        auto b = F.bits(u1[j]);
        choice.insert(choice.end(), b.begin(), b.end());
    }
    std::vector<Block> mylab = ot.recv(ch, choice);

    Bytes cts = ch.expect(Msg::LABEL_CTS);
    if (cts.size() != (w * 6 * (size_t)k * k + 7) / 8) throw ProtocolError("label ciphertext batch has wrong size");
    detail::BitReader br{cts};
    NonlinOutput o;
    o.g1.assign(w, 0);
    o.g2.assign(w, 0);
    o.g3.assign(w, 0);
    for (size_t j = 0; j < w; ++j) {
        std::vector<Block> in(2 * k);
        for (int i = 0; i < k; ++i) in[i] = get_block(gr);
        for (int i = 0; i < k; ++i) in[k + i] = mylab[j * k + i];
        auto out = gc_eval(C, gcs[j], in, H);
        std::vector<u128> ct(2 * k), cth(2 * k);
        for (auto& x : ct) x = br.get(k);
        for (auto& x : cth) x = br.get(2 * k);
        fe g1 = 0, g2 = 0, g3 = 0;
        for (int i = 0; i < k; ++i) {
            const Block L = out[i], Lh = out[k + i];
            u128 c = ct[2 * i + L.color()] ^ detail::label_pad(H, L, i, k);
            u128 de = cth[2 * i + Lh.color()] ^ detail::label_pad(H, Lh, k + i, 2 * k);
            u128 d = de >> k, e = de & detail::mask_bits(k);
            if (c >= F.p() || d >= F.p() || e >= F.p()) throw ProtocolError("label decryption out of range");
            const fe w2 = (u64(1) << i) % F.p();
            g1 = F.add(g1, F.mul((fe)c, w2));
            g2 = F.add(g2, F.mul((fe)d, w2));
            g3 = F.add(g3, F.mul((fe)e, w2));
        }
        o.g1[j] = g1;
        o.g2[j] = g2;
        o.g3[j] = g3;
    }

    std::vector<BeaverTriple> T;
    fvec mine;
    for (size_t j = 0; j < w; ++j) {
        T.push_back(pool.take());
        mine.push_back(F.sub(u1[j], T[j].A));
        mine.push_back(F.sub(o.g2[j], T[j].B));
    }
    Bytes pay;
    put_fvec(pay, mine);
    ch.send(Msg::OPEN_GAMMA_LAMBDA, Phase::auth2, std::move(pay));
    Bytes in = ch.expect(Msg::OPEN_GAMMA_LAMBDA);
    Reader r(in);
    fvec theirs = get_fvec(r);
    if (theirs.size() != 2 * w || !r.done()) throw ProtocolError("bad opening batch");
    for (fe x : theirs)
        if (x >= F.p()) throw ProtocolError("opened share out of range");
    o.k = o.g1;
    o.t.resize(w);
    o.d.resize(w);
    for (size_t j = 0; j < w; ++j) {
        fe Gm = F.add(mine[2 * j], theirs[2 * j]), Lm = F.add(mine[2 * j + 1], theirs[2 * j + 1]);
        std::tie(o.t[j], o.d[j]) = beaver_combine(F, 1, Gm, Lm, T[j]);
    }
    return o;
}

// Communication per ReLU: the analytic 2eλ + 4κλ + 6κ² + 2κ next to what the
// channel actually carried.
struct ReluCommReport {
    u64 width = 0, e = 0, kappa = 0, lambda = 0;
    u64 formula_bits = 0;
    double formula_kb = 0;
    u64 gc_table_bytes = 0;  // garbled rows only, no header/framing
    u64 gc = 0, ot = 0, auth1 = 0, auth2 = 0, total = 0;  // framed bytes, both directions
    double per_relu_bytes() const { return width ? (double)total / (double)width : 0.0; }
};

inline u64 relu_formula_bits(u64 e, u64 kappa, u64 lambda) {
    return 2 * e * lambda + 4 * kappa * lambda + 6 * kappa * kappa + 2 * kappa;
}
// the comparison baseline omits the trailing 2κ
inline u64 simc_relu_formula_bits(u64 c, u64 kappa, u64 lambda) {
    return 2 * c * lambda + 4 * kappa * lambda + 6 * kappa * kappa;
}

inline ReluCommReport relu_comm_report(u64 width, u64 e, u64 kappa, u64 lambda, const PhaseBytes* before = nullptr,
                                       const PhaseBytes* after = nullptr) {
    ReluCommReport r;
    r.width = width;
    r.e = e;
    r.kappa = kappa;
    r.lambda = lambda;
    r.formula_bits = relu_formula_bits(e, kappa, lambda);
    r.formula_kb = (double)r.formula_bits / 8.0 / 1024.0;
    r.gc_table_bytes = width * 2 * e * lambda / 8;
    if (before && after) {
        auto d = [&](Phase p) {
            size_t i = (size_t)p;
            return (after->sent[i] - before->sent[i]) + (after->received[i] - before->received[i]);
        };
        r.gc = d(Phase::gc);
        r.ot = d(Phase::ot);
        r.auth1 = d(Phase::auth1);
        r.auth2 = d(Phase::auth2);
        r.total = r.gc + r.ot + r.auth1 + r.auth2;
    }
    return r;
}

}  // namespace simc
