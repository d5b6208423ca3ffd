#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "convpack.hpp"
#include "linpack.hpp"
#include "mac.hpp"
#include "transport.hpp"

namespace simc {

struct OpCost {
    u64 rotations = 0, sc_mults = 0, adds = 0;
    bool operator==(const OpCost&) const = default;
    OpCost& operator+=(const OpCost& o) {
        rotations += o.rotations;
        sc_mults += o.sc_mults;
        adds += o.adds;
        return *this;
    }
};

// A linear layer bound to a packing plan.  Vectors cross the layer boundary
// flat: fc as-is, conv channel-major [c][y*u_w + x].
struct LinearOp {
    enum class Kind { fc, conv } kind = Kind::fc;
    MatVecPlan mv;
    ConvPlan cv;
    std::shared_ptr<const Matrix> W;
    std::shared_ptr<const Kernels> K;

    u64 slots() const { return kind == Kind::fc ? mv.n : cv.geo.n; }
    size_t in_dim() const { return kind == Kind::fc ? mv.n_i : cv.geo.c_i * cv.geo.plane(); }
    size_t out_dim() const { return kind == Kind::fc ? mv.n_o : cv.geo.c_o * cv.geo.plane(); }
    size_t in_cts() const { return kind == Kind::fc ? 1 : cv.geo.in_cts(); }
    bool has_weights() const { return kind == Kind::fc ? (bool)W : (bool)K; }

    std::vector<fvec> pack_input(const fvec& t) const {
        if (t.size() != in_dim()) throw std::invalid_argument("layer input length mismatch");
        if (kind == Kind::fc) return {pack_matvec_input(mv, t)};
        return pack_conv_input(cv.geo, to_tensor(t, cv.geo.c_i));
    }
    // first-copy slots of a packed input layout
    fvec unpack_input(const std::vector<fvec>& vs) const {
        if (vs.size() != in_cts()) throw std::invalid_argument("input ciphertext count mismatch");
        if (kind == Kind::fc) return fvec(vs[0].begin(), vs[0].begin() + (long)mv.n_i);
        const auto& g = cv.geo;
        fvec out(in_dim());
        for (u64 c = 0; c < g.c_i; ++c)
            for (u64 i = 0; i < g.plane(); ++i) out[c * g.plane() + i] = vs[c / g.c_n()][(c % g.c_n()) * g.plane() + i];
        return out;
    }
    fvec collapse(const Field& F, const std::vector<fvec>& vs) const {
        if (kind == Kind::fc) return collapse_share(F, vs, mv);
        Tensor t = unpack_conv_output(F, cv.geo, vs);
        fvec out;
        for (auto& c : t) out.insert(out.end(), c.begin(), c.end());
        return out;
    }
    template <class Backend, class Ct = typename Backend::Ct>
    std::vector<std::vector<Ct>> apply(Backend& be, const std::vector<Ct>& in, const fvec& scales, const Field* F) const {
        if (kind == Kind::fc) {
            if (in.size() != 1) throw std::invalid_argument("fc layer takes one ciphertext");
            return apply_matvec(be, mv, in[0], scales, F);
        }
        return apply_conv(be, cv, in, scales, F);
    }
    fvec plain(const Field& F, const fvec& t) const {
        if (kind == Kind::fc) return matvec_plain(F, *W, t);
        Tensor o = conv_plain(F, cv.geo, *K, to_tensor(t, cv.geo.c_i));
        fvec out;
        for (auto& c : o) out.insert(out.end(), c.begin(), c.end());
        return out;
    }
    OpCost predicted() const {
        if (kind == Kind::fc) {
            auto c = predict_matvec_cost(static_cast<const MatVecShape&>(mv));
            return {c.rotations, c.sc_mults, c.adds};
        }
        auto c = predict_conv_cost(cv.method, cv.geo);
        return {c.rotations, c.sc_mults, c.adds};
    }

private:
    Tensor to_tensor(const fvec& t, u64 ch) const {
        const u64 pl = cv.geo.plane();
        Tensor T(ch);
        for (u64 c = 0; c < ch; ++c) T[c].assign(t.begin() + (long)(c * pl), t.begin() + (long)((c + 1) * pl));
        return T;
    }
};

inline LinearOp make_fc(MatVecMethod m, Matrix N, u64 n, u64 l = 0) {
    LinearOp op;
    op.kind = LinearOp::Kind::fc;
    op.W = std::make_shared<const Matrix>(std::move(N));
    op.mv = plan_matvec(m, *op.W, n, l);
    return op;
}
// shape only: enough for count mode
inline LinearOp make_fc_shape(MatVecMethod m, u64 n_i, u64 n_o, u64 n, u64 l = 0) {
    LinearOp op;
    op.kind = LinearOp::Kind::fc;
    static_cast<MatVecShape&>(op.mv) = matvec_shape(m, n_i, n_o, n, l);
    return op;
}
inline LinearOp make_conv(ConvMethod m, const ConvGeometry& g, std::shared_ptr<const Kernels> K) {
    LinearOp op;
    op.kind = LinearOp::Kind::conv;
    op.K = std::move(K);
    op.cv = plan_conv(m, g, op.K.get());
    return op;
}

struct LinShare {
    fvec u, r, z;  // z empty for the first layer
};

// Deviations a malicious client can apply to what it encrypts.
struct LinTamper {
    fvec dt, dd;
};

namespace detail {
inline std::vector<PackedVector> encrypt_packed(const SlotBackend& be, u64 pk, const std::vector<fvec>& vs) {
    std::vector<PackedVector> out;
    for (auto& v : vs) out.push_back(be.encrypt(pk, v));
    return out;
}
inline std::vector<fvec> decrypt_all(const SlotBackend& be, const HeKeys& k, const std::vector<PackedVector>& cts,
                                     size_t from, size_t count) {
    std::vector<fvec> out;
    for (size_t i = from; i < from + count; ++i) out.push_back(be.decrypt(k, cts.at(i)));
    return out;
}
inline fvec add_tamper(const Field& F, fvec v, const fvec& d) {
    if (d.empty()) return v;
    if (d.size() != v.size()) throw std::invalid_argument("deviation length mismatch");
    return F.add(v, d);
}
}  // namespace detail

// First layer: shares of N t and alpha N t, one set of input rotations.
inline LinShare init_lin_server(Channel& ch, SlotBackend& be, u64 pk, const LinearOp& op, fe alpha, Prg& rng) {
    const Field& F = be.field();
    Bytes in = recv_with_stub(ch, Msg::CLIENT_CT);
    Reader r(in);
    auto cts = decode_cts(r, pk, F, be.slots());
    if (cts.size() != op.in_cts() || !r.done()) throw ProtocolError("client ciphertext count does not match the layer");
    auto res = op.apply(be, cts, fvec{1, alpha}, &F);
    auto mu = mask_and_share(be, res[0], &rng);
    auto mr = mask_and_share(be, res[1], &rng);
    std::vector<PackedVector> outc = mu.cts;
    outc.insert(outc.end(), mr.cts.begin(), mr.cts.end());
    Bytes pay;
    encode_cts(pay, outc);
    ch.send(Msg::MASKED_RESULT_CTS, Phase::linear, std::move(pay));
    return {op.collapse(F, mu.masks), op.collapse(F, mr.masks), {}};
}

inline LinShare init_lin_client(Channel& ch, const SlotBackend& be, const HeKeys& keys, const LinearOp& op, const fvec& t) {
    const Field& F = be.field();
    Bytes pay;
    encode_cts(pay, detail::encrypt_packed(be, keys.pk, op.pack_input(t)));
    send_with_stub(ch, Msg::CLIENT_CT, Phase::linear, std::move(pay));
    Bytes in = ch.expect(Msg::MASKED_RESULT_CTS);
    Reader r(in);
    auto cts = decode_cts(r, keys.sk, F, be.slots());
    if (cts.size() % 2 || !r.done()) throw ProtocolError("bad result batch");
    size_t h = cts.size() / 2;
    return {op.collapse(F, detail::decrypt_all(be, keys, cts, 0, h)), op.collapse(F, detail::decrypt_all(be, keys, cts, h, h)), {}};
}

// Later layers: shares of N t, N d and z = alpha^3 t - alpha^2 d.
inline LinShare lin_server(Channel& ch, SlotBackend& be, u64 pk, const LinearOp& op, const fvec& t0, const fvec& d0,
                           fe alpha, Prg& rng) {
    const Field& F = be.field();
    Bytes in = recv_with_stub(ch, Msg::CLIENT_CT);
    Reader r(in);
    auto cts = decode_cts(r, pk, F, be.slots());
    const size_t m = op.in_cts();
    if (cts.size() != 2 * m || !r.done()) throw ProtocolError("client ciphertext count does not match the layer");
    auto pt = op.pack_input(t0), pd = op.pack_input(d0);
    std::vector<PackedVector> ct_t, ct_d;
    for (size_t i = 0; i < m; ++i) {
        ct_t.push_back(be.add(cts[i], PackedVector{pt[i], 0}));
        ct_d.push_back(be.add(cts[m + i], PackedVector{pd[i], 0}));
    }
    auto Nt = op.apply(be, ct_t, fvec{1}, &F)[0];
    auto Nd = op.apply(be, ct_d, fvec{1}, &F)[0];
    const fe a2 = F.mul(alpha, alpha), a3 = F.mul(a2, alpha);
    std::vector<PackedVector> e5;
    for (size_t i = 0; i < m; ++i)
        e5.push_back(be.sub(be.sc_mult(PackedVector{fvec(be.slots(), a3), 0}, ct_t[i]),
                            be.sc_mult(PackedVector{fvec(be.slots(), a2), 0}, ct_d[i])));
    auto mu = mask_and_share(be, Nt, &rng), mr = mask_and_share(be, Nd, &rng), mz = mask_and_share(be, e5, &rng);
    std::vector<PackedVector> outc = mu.cts;
    outc.insert(outc.end(), mr.cts.begin(), mr.cts.end());
    outc.insert(outc.end(), mz.cts.begin(), mz.cts.end());
    Bytes pay;
    encode_cts(pay, outc);
    ch.send(Msg::MASKED_RESULT_CTS, Phase::linear, std::move(pay));
    return {op.collapse(F, mu.masks), op.collapse(F, mr.masks), op.unpack_input(mz.masks)};
}

inline LinShare lin_client(Channel& ch, const SlotBackend& be, const HeKeys& keys, const LinearOp& op, const fvec& t1,
                           const fvec& d1, const LinTamper& dev = {}) {
    const Field& F = be.field();
    auto pt = op.pack_input(detail::add_tamper(F, t1, dev.dt));
    auto pd = op.pack_input(detail::add_tamper(F, d1, dev.dd));
    pt.insert(pt.end(), pd.begin(), pd.end());
    Bytes pay;
    encode_cts(pay, detail::encrypt_packed(be, keys.pk, pt));
    send_with_stub(ch, Msg::CLIENT_CT, Phase::linear, std::move(pay));
    Bytes in = ch.expect(Msg::MASKED_RESULT_CTS);
    Reader r(in);
    auto cts = decode_cts(r, keys.sk, F, be.slots());
    const size_t m = op.in_cts();
    if (cts.size() < m || !r.done()) throw ProtocolError("bad result batch");
    const size_t h = (cts.size() - m) / 2;
    if (2 * h + m != cts.size()) throw ProtocolError("bad result batch");
    return {op.collapse(F, detail::decrypt_all(be, keys, cts, 0, h)), op.collapse(F, detail::decrypt_all(be, keys, cts, h, h)),
            op.unpack_input(detail::decrypt_all(be, keys, cts, 2 * h, m))};
}

}  // namespace simc
