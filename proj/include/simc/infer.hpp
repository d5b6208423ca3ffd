#pragma once

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "model.hpp"
#include "nonlin.hpp"

namespace simc {

// Where a cheating client perturbs its view.  layer indexes the nonlinear
// layer (nonlin), the linear layer (lin_t / lin_d; >= 1), and is ignored for q.
struct Deviation {
    enum class Site { none, nonlin, lin_t, lin_d, q } site = Site::none;
    size_t layer = 0;
    size_t index = 0;
    long long value = 0;
    fvec vec;  // full-length perturbation; overrides (index, value) when set

    bool active() const { return site != Site::none; }
    fvec materialize(const Field& F, size_t len) const {
        if (!vec.empty()) {
            if (vec.size() != len) throw ConfigError("deviation vector length mismatch");
            return vec;
        }
        if (index >= len) throw ConfigError("deviation index out of range");
        fvec d(len, 0);
        d[index] = F.from_signed(value);
        return d;
    }
};

inline const char* to_string(Deviation::Site s) {
    switch (s) {
        case Deviation::Site::none: return "none";
        case Deviation::Site::nonlin: return "nonlin";
        case Deviation::Site::lin_t: return "lin_t";
        case Deviation::Site::lin_d: return "lin_d";
        case Deviation::Site::q: return "q";
    }
    return "?";
}

// "nonlin:0:+1", "lin_t:1:-3", "lin_d:2:5", "q:0:1"; optional 4th field = index
inline Deviation parse_deviation(const std::string& s) {
    Deviation d;
    std::vector<std::string> parts;
    size_t a = 0;
    while (true) {
        size_t b = s.find(':', a);
        parts.push_back(s.substr(a, b == std::string::npos ? std::string::npos : b - a));
        if (b == std::string::npos) break;
        a = b + 1;
    }
    if (parts.size() < 3 || parts.size() > 4) throw ConfigError("injection must look like site:layer:value[:index]");
    const auto& site = parts[0];
    if (site == "nonlin") d.site = Deviation::Site::nonlin;
    else if (site == "lin_t" || site == "lin-t") d.site = Deviation::Site::lin_t;
    else if (site == "lin_d" || site == "lin-d") d.site = Deviation::Site::lin_d;
    else if (site == "q") d.site = Deviation::Site::q;
    else throw ConfigError("unknown injection site " + site);
    try {
        d.layer = std::stoul(parts[1]);
        d.value = std::stoll(parts[2]);
        if (parts.size() == 4) d.index = std::stoul(parts[3]);
    } catch (const std::exception&) {
        throw ConfigError("bad number in injection " + s);
    }
    return d;
}

enum class OtMode { base, dealer };

struct PartyOptions {
    u64 seed = 1;
    OtMode ot = OtMode::base;
    std::shared_ptr<OtDealer> dealer;  // required for OtMode::dealer
    Deviation dev;                     // client only
};

// One party's shares around nonlinear layer i.
struct LayerShares {
    fvec u, r, k, t, d, z;
};

struct PartyResult {
    bool abort = false;
    ivec logits;       // client, on pass
    fvec out_share;
    OpLedger ledger;   // this party's homomorphic work
    OpLedger linear_ledger;
    PhaseBytes bytes;
    std::string transcript;
    std::vector<LayerShares> layers;
    fe q_share = 0;
    fe q = 0;          // server only
    size_t triples = 0, triples_used = 0;
    ReluCommReport relu;
};

namespace detail {

inline Bytes pack_fvecs(const std::vector<fvec>& vs) {
    Bytes b;
    put_u32(b, (std::uint32_t)vs.size());
    for (auto& v : vs) put_fvec(b, v);
    return b;
}
inline std::vector<fvec> unpack_fvecs(const Bytes& b, u64 p) {
    Reader r(b);
    std::vector<fvec> vs(r.u32_());
    for (auto& v : vs) {
        v = get_fvec(r);
        for (fe x : v)
            if (x >= p) throw ProtocolError("field element out of range");
    }
    if (!r.done()) throw ProtocolError("trailing bytes");
    return vs;
}
inline std::unique_ptr<OtSender> make_sender(const PartyOptions& o) {
    if (o.ot == OtMode::dealer) {
        if (!o.dealer) throw ConfigError("dealer OT needs a shared dealer");
        return std::make_unique<DealerOtSender>(o.dealer);
    }
    return std::make_unique<BaseOtSender>(Prg(o.seed, "ot-sender"));
}
inline std::unique_ptr<OtReceiver> make_receiver(const PartyOptions& o) {
    if (o.ot == OtMode::dealer) {
        if (!o.dealer) throw ConfigError("dealer OT needs a shared dealer");
        return std::make_unique<DealerOtReceiver>(o.dealer);
    }
    return std::make_unique<BaseOtReceiver>(Prg(o.seed, "ot-receiver"));
}
inline size_t relu_count(const ModelSpec& m) {
    size_t c = 0;
    for (size_t i = 0; i + 1 < m.layers.size(); ++i) c += m.layers[i].out_dim();
    return c;
}
}  // namespace detail

// <q>_b = sum_i <r_i - k_i>_b . s_i + <z_i>_b . s'_i
inline fe q_share(const Field& F, const std::vector<LayerShares>& L, const std::vector<fvec>& s, const std::vector<fvec>& sp) {
    if (s.size() != L.size() || sp.size() != L.size()) throw ProtocolError("check vector count mismatch");
    fe q = 0;
    for (size_t i = 0; i < L.size(); ++i) {
        if (s[i].size() != L[i].r.size() || sp[i].size() != L[i].z.size()) throw ProtocolError("check vector length mismatch");
        q = F.add(q, F.dot(F.sub(L[i].r, L[i].k), s[i]));
        q = F.add(q, F.dot(L[i].z, sp[i]));
    }
    return q;
}

inline PartyResult run_server(Channel& ch, const ModelSpec& model, const PartyOptions& opt) {
    validate_model(model, true);
    const FieldParams fp(model.modulus);
    const Field F(fp);
    PartyResult R;
    OpLedger led;
    SlotBackend be(F, model.slots, &led);
    Prg rng(opt.seed, "server");
    auto ot = detail::make_sender(opt);

    session_hello(ch, 0);
    std::string meta = model_to_json(model, false).dump();
    ch.send(Msg::MODEL_META, Phase::setup, Bytes(meta.begin(), meta.end()));
    Bytes pkb = ch.expect(Msg::HE_PUBKEY);
    Reader pr(pkb);
    const u64 pk = pr.u64_();
    if (!pk || !pr.done()) throw ProtocolError("bad public key message");

    const fe alpha = rng.nonzero(F.p());
    R.triples = detail::relu_count(model);
    Prg trng = rng.fork("triples");
    TriplePool pool = gen_triples_server(ch, be, pk, alpha, R.triples, trng);

    std::vector<LinearOp> ops;
    for (auto& L : model.layers) ops.push_back(build_layer_op(F, model, L, true));

    const size_t m = ops.size();
    OpLedger before = led;
    LinShare cur = init_lin_server(ch, be, pk, ops[0], alpha, rng);
    R.linear_ledger += led - before;
    PhaseBytes acc{};
    for (size_t i = 0; i + 1 < m; ++i) {
        LayerShares S;
        S.u = cur.u;
        S.r = cur.r;
        PhaseBytes b0 = ch.bytes();
        NonlinOutput no = nonlin_server(ch, fp, cur.u, alpha, pool, *ot, rng);
        PhaseBytes b1 = ch.bytes();
        for (size_t p = 0; p < acc.sent.size(); ++p) {
            acc.sent[p] += b1.sent[p] - b0.sent[p];
            acc.received[p] += b1.received[p] - b0.received[p];
        }
        S.k = no.k;
        S.t = no.t;
        S.d = no.d;
        before = led;
        cur = lin_server(ch, be, pk, ops[i + 1], no.t, no.d, alpha, rng);
        R.linear_ledger += led - before;
        S.z = cur.z;
        R.layers.push_back(std::move(S));
    }
    PhaseBytes zero{};
    R.relu = relu_comm_report(R.triples, build_sign_circuit(fp).and_count, fp.kappa, fp.lambda, &zero, &acc);

    // consistency check, vectors drawn only now
    Prg crng = rng.fork("check");
    std::vector<fvec> s, sp;
    for (auto& L : R.layers) {
        s.push_back(crng.uniform_vec(F.p(), L.r.size()));
        sp.push_back(crng.uniform_vec(F.p(), L.z.size()));
    }
    std::vector<fvec> all = s;
    all.insert(all.end(), sp.begin(), sp.end());
    ch.send(Msg::CHECK_VECTORS, Phase::check, detail::pack_fvecs(all));
    Bytes qb = ch.expect(Msg::Q_SHARE);
    Reader qr(qb);
    const fe q1 = qr.u64_();
    if (!qr.done() || q1 >= F.p()) throw ProtocolError("bad q share");
    R.q_share = q_share(F, R.layers, s, sp);
    R.q = F.add(R.q_share, q1);
    R.abort = R.q != 0;
    ch.send(Msg::VERDICT, Phase::output, Bytes{(std::uint8_t)(R.abort ? 0 : 1)});
    if (!R.abort) {
        Bytes ob;
        put_fvec(ob, cur.u);
        ch.send(Msg::OUTPUT_SHARE, Phase::output, std::move(ob));
    }
    R.out_share = cur.u;
    R.ledger = led;
    R.triples_used = pool.used();
    R.bytes = ch.bytes();
    R.transcript = ch.transcript_hex();
    return R;
}

inline PartyResult run_client(Channel& ch, const ivec& input, const PartyOptions& opt) {
    PartyResult R;
    session_hello(ch, 1);
    Bytes mb = ch.expect(Msg::MODEL_META);
    ModelSpec model;
    try {
        model = model_from_json(json::parse(mb.begin(), mb.end()));
        validate_model(model, false);
    } catch (const ConfigError& e) {
        throw ProtocolError(std::string("bad model metadata: ") + e.what());
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad model metadata: ") + e.what());
    }
    if (input.size() != model.layers[0].in_dim()) throw ConfigError("input length does not match the model");
    const FieldParams fp(model.modulus);
    const Field F(fp);
    OpLedger led;
    SlotBackend be(F, model.slots, &led);
    Prg rng(opt.seed, "client");
    HeKeys keys = be.keygen(rng);
    Bytes pkb;
    put_u64(pkb, keys.pk);
    ch.send(Msg::HE_PUBKEY, Phase::setup, std::move(pkb));
    auto ot = detail::make_receiver(opt);

    R.triples = detail::relu_count(model);
    Prg trng = rng.fork("triples");
    TriplePool pool = gen_triples_client(ch, be, keys, R.triples, trng);

    std::vector<LinearOp> ops;
    for (auto& L : model.layers) ops.push_back(build_layer_op(F, model, L, false));
    const Deviation& dv = opt.dev;
    if (dv.active() && dv.site != Deviation::Site::q) {
        size_t lim = dv.site == Deviation::Site::nonlin ? ops.size() - 1 : ops.size();
        bool ok = dv.site == Deviation::Site::nonlin ? dv.layer < lim : (dv.layer >= 1 && dv.layer < lim);
        if (!ok) throw ConfigError("injection layer out of range");
    }

    fvec x;
    for (auto v : input) x.push_back(F.from_signed(v));
    const size_t m = ops.size();
    LinShare cur = init_lin_client(ch, be, keys, ops[0], x);
    for (size_t i = 0; i + 1 < m; ++i) {
        LayerShares S;
        S.u = cur.u;
        S.r = cur.r;
        fvec uin = cur.u;
        if (dv.site == Deviation::Site::nonlin && dv.layer == i) uin = F.add(uin, dv.materialize(F, uin.size()));
        NonlinOutput no = nonlin_client(ch, fp, uin, pool, *ot);
        S.k = no.k;
        S.t = no.t;
        S.d = no.d;
        LinTamper tam;
        if (dv.site == Deviation::Site::lin_t && dv.layer == i + 1) tam.dt = dv.materialize(F, no.t.size());
        if (dv.site == Deviation::Site::lin_d && dv.layer == i + 1) tam.dd = dv.materialize(F, no.d.size());
        cur = lin_client(ch, be, keys, ops[i + 1], no.t, no.d, tam);
        S.z = cur.z;
        R.layers.push_back(std::move(S));
    }

    auto all = detail::unpack_fvecs(ch.expect(Msg::CHECK_VECTORS), F.p());
    const size_t L = R.layers.size();
    if (all.size() != 2 * L) throw ProtocolError("check vector count mismatch");
    std::vector<fvec> s(all.begin(), all.begin() + (long)L), sp(all.begin() + (long)L, all.end());
    R.q_share = q_share(F, R.layers, s, sp);
    fe qsend = R.q_share;
    if (dv.site == Deviation::Site::q) qsend = F.add(qsend, dv.vec.empty() ? F.from_signed(dv.value) : dv.vec.at(0));
    Bytes qb;
    put_u64(qb, qsend);
    ch.send(Msg::Q_SHARE, Phase::check, std::move(qb));
    Bytes v = ch.expect(Msg::VERDICT);
    if (v.size() != 1 || v[0] > 1) throw ProtocolError("bad verdict");
    R.abort = v[0] == 0;
    R.out_share = cur.u;
    if (!R.abort) {
        Bytes ob = ch.expect(Msg::OUTPUT_SHARE);
        Reader r(ob);
        fvec s0 = get_fvec(r);
        if (s0.size() != cur.u.size() || !r.done()) throw ProtocolError("bad output share");
        for (fe e : F.add(s0, cur.u)) R.logits.push_back(F.to_signed(e));
    }
    R.ledger = led;
    R.triples_used = pool.used();
    R.bytes = ch.bytes();
    R.transcript = ch.transcript_hex();
    return R;
}

// Both endpoints in one process over an in-memory channel (or a loopback TCP
// pair).  Exceptions on either side are rethrown here.
struct SessionResult {
    PartyResult server, client;
};

inline SessionResult run_session(Channel& sch, Channel& cch, const ModelSpec& model, const ivec& input, PartyOptions so,
                                 PartyOptions co) {
    if (so.ot == OtMode::dealer || co.ot == OtMode::dealer) {
        auto d = std::make_shared<OtDealer>();
        if (!so.dealer) so.dealer = d;
        if (!co.dealer) co.dealer = so.dealer;
    }
    SessionResult out;
    std::exception_ptr cerr;
    std::thread th([&] {
        try {
            out.client = run_client(cch, input, co);
        } catch (...) {
            cerr = std::current_exception();
            cch.close();
        }
    });
    try {
        out.server = run_server(sch, model, so);
    } catch (...) {
        sch.close();
        th.join();
        if (cerr) std::rethrow_exception(cerr);
        throw;
    }
    th.join();
    if (cerr) std::rethrow_exception(cerr);
    return out;
}

inline SessionResult run_inproc(const ModelSpec& model, const ivec& input, const PartyOptions& so, const PartyOptions& co) {
    auto [a, b] = InprocChannel::pair();
    return run_session(*a, *b, model, input, so, co);
}

inline json bytes_json(const PhaseBytes& b) {
    json j;
    for (size_t p = 0; p < (size_t)Phase::kCount; ++p)
        j[to_string((Phase)p)] = {{"sent", b.sent[p]}, {"received", b.received[p]}};
    return j;
}
inline json ledger_json(const OpLedger& l) {
    return {{"rotations", l.rotations}, {"sc_mults", l.sc_mults}, {"ct_adds", l.ct_adds}, {"ct_mults", l.ct_mults}};
}

}  // namespace simc
