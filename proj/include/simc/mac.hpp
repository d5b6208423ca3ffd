#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "prg.hpp"
#include "slothe.hpp"
#include "transport.hpp"

namespace simc {

struct AuthShare {
    fe value = 0;  // <x>_b
    fe mac = 0;    // <alpha x>_b
    int party = 0;
};

inline AuthShare add(const Field& F, const AuthShare& a, const AuthShare& b) {
    return {F.add(a.value, b.value), F.add(a.mac, b.mac), a.party};
}
inline AuthShare scale(const Field& F, const AuthShare& a, fe c) { return {F.mul(a.value, c), F.mul(a.mac, c), a.party}; }
// adding a public constant: value on party 0 only, mac on the alpha holder
inline AuthShare add_const(const Field& F, const AuthShare& a, fe c, fe alpha_if_p0) {
    if (a.party != 0) return a;
    return {F.add(a.value, c), F.add(a.mac, F.mul(alpha_if_p0, c)), 0};
}

// One party's half of an authenticated triple.
struct BeaverTriple {
    fe A = 0, aA = 0, B = 0, aB = 0, C = 0, aC = 0;
};

class TriplePool {
public:
    TriplePool() = default;
    TriplePool(int party, std::vector<BeaverTriple> t) : party_(party), t_(std::move(t)) {}
    const BeaverTriple& take() {
        if (next_ >= t_.size()) throw std::runtime_error("triple pool exhausted");
        return t_[next_++];
    }
    size_t size() const { return t_.size(); }
    size_t used() const { return next_; }
    size_t remaining() const { return t_.size() - next_; }
    int party() const { return party_; }
    const std::vector<BeaverTriple>& all() const { return t_; }

private:
    int party_ = 0;
    std::vector<BeaverTriple> t_;
    size_t next_ = 0;
};

// <xy>_b from opened Gamma = x - A, Lambda = y - B.  Constant terms go to
// party 0, which also holds alpha.
inline std::pair<fe, fe> beaver_combine(const Field& F, int b, fe G, fe L, const BeaverTriple& t, fe alpha = 0) {
    fe z = F.add(F.add(t.C, F.mul(G, t.B)), F.mul(L, t.A));
    fe zm = F.add(F.add(t.aC, F.mul(G, t.aB)), F.mul(L, t.aA));
    if (b == 0) {
        fe gl = F.mul(G, L);
        z = F.add(z, gl);
        zm = F.add(zm, F.mul(alpha, gl));
    }
    return {z, zm};
}

// Placeholder for a proof of plaintext knowledge: a tag plus a digest of the
// ciphertexts it vouches for.  The server only checks that it is present.
inline Bytes zk_stub(const Bytes& ct_payload) {
    Bytes out{'Z', 'K', 'S', 'T', 'U', 'B'};
    std::uint8_t d[16];
    crypto_generichash(d, 16, ct_payload.data(), ct_payload.size(), nullptr, 0);
    out.insert(out.end(), d, d + 16);
    return out;
}
inline void check_zk_stub(const Bytes& stub) {
    if (stub.size() != 22 || std::string(stub.begin(), stub.begin() + 6) != "ZKSTUB")
        throw ProtocolError("missing proof-of-knowledge stub");
}
inline void send_with_stub(Channel& ch, Msg t, Phase ph, Bytes payload) {
    Bytes stub = zk_stub(payload);
    ch.send(t, ph, std::move(payload));
    ch.send(Msg::ZK_STUB, ph, std::move(stub));
}
inline Bytes recv_with_stub(Channel& ch, Msg t) {
    Bytes p = ch.expect(t);
    check_zk_stub(ch.expect(Msg::ZK_STUB));
    return p;
}

// Authenticated triple generation, one packed batch of n triples per
// ciphertext-ciphertext product.
inline TriplePool gen_triples_server(Channel& ch, const SlotBackend& be, u64 pk, fe alpha, size_t count, Prg& rng) {
    const Field& F = be.field();
    const size_t n = be.slots(), batches = (count + n - 1) / n;
    std::vector<BeaverTriple> out;
    const PackedVector al{fvec(n, alpha), 0};
    for (size_t bi = 0; bi < batches; ++bi) {
        Bytes in = recv_with_stub(ch, Msg::TRIPLE_CTS);
        Reader r(in);
        auto cts = decode_cts(r, pk, F, n);
        if (cts.size() != 2) throw ProtocolError("expected two triple ciphertexts");
        fvec A0 = rng.uniform_vec(F.p(), n), B0 = rng.uniform_vec(F.p(), n);
        fvec aA0 = rng.uniform_vec(F.p(), n), aB0 = rng.uniform_vec(F.p(), n);
        fvec aC0 = rng.uniform_vec(F.p(), n), C0 = rng.uniform_vec(F.p(), n);
        auto ctA = be.add(cts[0], PackedVector{A0, 0});
        auto ctB = be.add(cts[1], PackedVector{B0, 0});
        auto prod = be.ct_mult(ctA, ctB);
        std::vector<PackedVector> res{
            be.rerandomize(be.sub(be.sc_mult(al, ctA), PackedVector{aA0, 0})),
            be.rerandomize(be.sub(be.sc_mult(al, ctB), PackedVector{aB0, 0})),
            be.rerandomize(be.sub(be.sc_mult(al, prod), PackedVector{aC0, 0})),
            be.rerandomize(be.sub(prod, PackedVector{C0, 0})),
        };
        Bytes pay;
        encode_cts(pay, res);
        ch.send(Msg::TRIPLE_RESULT_CTS, Phase::triples, std::move(pay));
        for (size_t i = 0; i < n && out.size() < count; ++i) out.push_back({A0[i], aA0[i], B0[i], aB0[i], C0[i], aC0[i]});
    }
    return TriplePool(0, std::move(out));
}

inline TriplePool gen_triples_client(Channel& ch, const SlotBackend& be, const HeKeys& keys, size_t count, Prg& rng) {
    const Field& F = be.field();
    const size_t n = be.slots(), batches = (count + n - 1) / n;
    std::vector<BeaverTriple> out;
    for (size_t bi = 0; bi < batches; ++bi) {
        fvec A1 = rng.uniform_vec(F.p(), n), B1 = rng.uniform_vec(F.p(), n);
        Bytes pay;
        encode_cts(pay, {be.encrypt(keys.pk, A1), be.encrypt(keys.pk, B1)});
        send_with_stub(ch, Msg::TRIPLE_CTS, Phase::triples, std::move(pay));
        Bytes in = ch.expect(Msg::TRIPLE_RESULT_CTS);
        Reader r(in);
        auto cts = decode_cts(r, keys.sk, F, n);
        if (cts.size() != 4) throw ProtocolError("expected four triple result ciphertexts");
        fvec aA = be.decrypt(keys, cts[0]), aB = be.decrypt(keys, cts[1]);
        fvec aC = be.decrypt(keys, cts[2]), C = be.decrypt(keys, cts[3]);
        for (size_t i = 0; i < n && out.size() < count; ++i) out.push_back({A1[i], aA[i], B1[i], aB[i], C[i], aC[i]});
    }
    return TriplePool(1, std::move(out));
}

// Pool file: u64 count | u64 p | per triple: party 0's six elements, party 1's six.
inline void save_triple_pools(const std::string& path, u64 p, const TriplePool& p0, const TriplePool& p1) {
    if (p0.size() != p1.size()) throw std::invalid_argument("pool size mismatch");
    Bytes out;
    put_u64(out, p0.size());
    put_u64(out, p);
    for (size_t i = 0; i < p0.size(); ++i)
        for (auto* t : {&p0.all()[i], &p1.all()[i]})
            for (fe x : {t->A, t->aA, t->B, t->aB, t->C, t->aC}) put_u64(out, x);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write((const char*)out.data(), (std::streamsize)out.size());
}
inline std::pair<TriplePool, TriplePool> load_triple_pools(const std::string& path, u64 expect_p) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    Bytes in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(in);
    u64 count = r.u64_(), p = r.u64_();
    if (p != expect_p) throw std::runtime_error("triple pool modulus mismatch");
    if (in.size() != 16 + count * 96) throw std::runtime_error("triple pool file truncated");
    std::vector<BeaverTriple> a(count), b(count);
    for (size_t i = 0; i < count; ++i)
        for (auto* t : {&a[i], &b[i]})
            for (fe* x : {&t->A, &t->aA, &t->B, &t->aB, &t->C, &t->aC}) {
                *x = r.u64_();
                if (*x >= p) throw std::runtime_error("triple pool element out of range");
            }
    return {TriplePool(0, std::move(a)), TriplePool(1, std::move(b))};
}

// INSECURE trusted dealer for tests that do not exercise triple generation.
inline std::pair<TriplePool, TriplePool> dealer_triples(const Field& F, fe alpha, size_t count, Prg& rng) {
    std::vector<BeaverTriple> a(count), b(count);
    auto split = [&](fe x, fe& s0, fe& s1) {
        s0 = rng.uniform(F.p());
        s1 = F.sub(x, s0);
    };
    for (size_t i = 0; i < count; ++i) {
        fe A = rng.uniform(F.p()), B = rng.uniform(F.p()), C = F.mul(A, B);
        split(A, a[i].A, b[i].A);
        split(B, a[i].B, b[i].B);
        split(C, a[i].C, b[i].C);
        split(F.mul(alpha, A), a[i].aA, b[i].aA);
        split(F.mul(alpha, B), a[i].aB, b[i].aB);
        split(F.mul(alpha, C), a[i].aC, b[i].aC);
    }
    return {TriplePool(0, std::move(a)), TriplePool(1, std::move(b))};
}

// Trusted-test reconstruction of two pools.
inline bool open_and_check(const Field& F, fe alpha, const TriplePool& p0, const TriplePool& p1) {
    if (p0.size() != p1.size()) return false;
    for (size_t i = 0; i < p0.size(); ++i) {
        const auto &x = p0.all()[i], &y = p1.all()[i];
        fe A = F.add(x.A, y.A), B = F.add(x.B, y.B), C = F.add(x.C, y.C);
        if (C != F.mul(A, B)) return false;
        if (F.add(x.aA, y.aA) != F.mul(alpha, A)) return false;
        if (F.add(x.aB, y.aB) != F.mul(alpha, B)) return false;
        if (F.add(x.aC, y.aC) != F.mul(alpha, C)) return false;
    }
    return true;
}

// A client shifts its share pair by (beta, beta') with beta != 0 without
// knowing alpha.  It knows alpha*beta != 0, so its best blind guess for
// beta' is uniform over the non-zero elements.  Forgery succeeds iff
// beta' = alpha*beta; the rate is 1/(p-1) <= 2^-floor(log p).
struct ForgeryStats {
    u64 trials = 0, forged = 0;
    double rate() const { return trials ? (double)forged / (double)trials : 0.0; }
};
inline ForgeryStats mac_forgery_harness(const Field& F, u64 trials, Prg& rng, bool tamper = true) {
    ForgeryStats st;
    for (u64 i = 0; i < trials; ++i) {
        fe alpha = rng.nonzero(F.p()), x = rng.uniform(F.p());
        fe x0 = rng.uniform(F.p()), x1 = F.sub(x, x0);
        fe m0 = rng.uniform(F.p()), m1 = F.sub(F.mul(alpha, x), m0);
        fe beta = 0, betap = 0;
        if (tamper) {
            beta = rng.nonzero(F.p());
            betap = rng.nonzero(F.p());
        }
        x1 = F.add(x1, beta);
        m1 = F.add(m1, betap);
        fe xo = F.add(x0, x1), mo = F.add(m0, m1);
        bool accepted = F.mul(alpha, xo) == mo;
        bool tampered = beta != 0 || betap != 0;
        st.trials++;
        if (accepted && tampered) st.forged++;
    }
    return st;
}

}  // namespace simc
