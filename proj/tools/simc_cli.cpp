// simc_cli: benches, end-to-end runs, fault injection, triple pools.
// Exit codes: 0 ok, 1 bench mismatch, 2 abort, 3 transport/protocol, 4 config.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "simc/infer.hpp"
#include "simc/report.hpp"

using namespace simc;

namespace {

enum Exit { kOk = 0, kMismatch = 1, kAbort = 2, kTransport = 3, kConfig = 4 };

void emit(const json& j, bool as_json, const std::string& out_path, const std::string& human) {
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw ConfigError("cannot write " + out_path);
        f << j.dump(2) << "\n";
    }
    if (as_json) std::cout << j.dump(2) << std::endl;
    else std::cout << human;
}

double secs_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string default_model() {
    const char* e = std::getenv("SIMC_MODEL");
    return e ? e : "";
}

// ---- bench-matvec ----
struct MatvecArgs {
    u64 ni = 0, no = 0, n = 4096, l = 0, seed = 1;
    std::string method = "simc2";
};
int bench_matvec(const MatvecArgs& a, bool as_json, const std::string& out) {
    const Field F{FieldParams()};
    const auto meth = matvec_method_from(a.method);
    Prg g(a.seed, "bench-matvec");
    Matrix N(a.no);
    for (auto& r : N) r = g.uniform_vec(F.p(), a.ni);
    fvec t = g.uniform_vec(F.p(), a.ni);
    auto P = plan_matvec(meth, N, a.n, a.l);
    OpLedger led;
    SlotBackend be(F, a.n, &led);
    Prg kr(a.seed, "keys");
    auto keys = be.keygen(kr);
    auto ct = be.encrypt(keys.pk, pack_matvec_input(P, t));
    led.reset();
    auto res = apply_matvec(be, P, ct)[0];
    std::vector<fvec> dec;
    for (auto& c : res) dec.push_back(be.decrypt(keys, c));
    const bool oracle_ok = collapse_share(F, dec, P) == matvec_plain(F, N, t);
    const auto pc = predict_matvec_cost(static_cast<const MatVecShape&>(P));
    const OpCost pred{pc.rotations, pc.sc_mults, pc.adds}, meas{led.rotations, led.sc_mults, led.ct_adds};
    json j{{"bench", "matvec"},
           {"config", {{"n_i", a.ni}, {"n_o", a.no}, {"n", a.n}, {"l", P.l}, {"method", to_string(meth)}, {"seed", a.seed}}},
           {"predicted", cost_json(pred)},
           {"measured", cost_json(meas)},
           {"match", pred == meas},
           {"oracle_ok", oracle_ok}};
    char buf[256];
    std::snprintf(buf, sizeof buf, "matvec %lux%lu n=%lu %s: rotations %lu, sc_mults %lu, adds %lu (predicted %s, oracle %s)\n",
                  (unsigned long)a.no, (unsigned long)a.ni, (unsigned long)a.n, to_string(meth), (unsigned long)meas.rotations,
                  (unsigned long)meas.sc_mults, (unsigned long)meas.adds, pred == meas ? "match" : "MISMATCH",
                  oracle_ok ? "ok" : "FAILED");
    emit(j, as_json, out, buf);
    return pred == meas && oracle_ok ? kOk : kMismatch;
}

// ---- bench-conv ----
struct ConvArgs {
    u64 uw = 0, uh = 0, ci = 0, co = 0, kw = 1, kh = 1, n = 4096, seed = 1;
    std::string method = "simc2";
    bool exact = false;
};

bool conv_oracle(const ConvGeometry& g, ConvMethod m, u64 seed) {
    const Field F{FieldParams()};
    Prg r(seed, "bench-conv");
    auto K = std::make_shared<Kernels>(g.c_o, std::vector<std::vector<fvec>>(g.c_i, std::vector<fvec>(g.k_h)));
    for (auto& o : *K)
        for (auto& c : o)
            for (auto& row : c) row = r.uniform_vec(F.p(), g.k_w);
    Tensor t(g.c_i);
    for (auto& c : t) c = r.uniform_vec(F.p(), g.plane());
    auto P = plan_conv(m, g, K.get());
    OpLedger led;
    SlotBackend be(F, g.n, &led);
    Prg kr(seed, "keys");
    auto keys = be.keygen(kr);
    std::vector<PackedVector> in;
    for (auto& v : pack_conv_input(g, t)) in.push_back(be.encrypt(keys.pk, v));
    auto res = apply_conv(be, P, in)[0];
    std::vector<fvec> dec;
    for (auto& c : res) dec.push_back(be.decrypt(keys, c));
    return unpack_conv_output(F, g, dec) == conv_plain(F, g, *K, t);
}

int bench_conv(const ConvArgs& a, bool as_json, const std::string& out) {
    const auto meth = conv_method_from(a.method);
    ConvGeometry g{a.uw, a.uh, a.ci, a.kw, a.kh, a.co, a.n};
    g.validate();
    const auto pc = predict_conv_cost(meth, g);
    const OpCost pred{pc.rotations, pc.sc_mults, pc.adds};
    OpCost meas = count_op(make_conv(meth, g, nullptr));
    // data check: the full geometry when asked, else a reduced one with the same kernel
    ConvGeometry vg = g;
    std::string vmode = "full";
    if (!a.exact) {
        vmode = "reduced";
        u64 u = std::min<u64>(std::min(a.uw, a.uh), 8);
        u64 c = std::min<u64>(std::min(a.ci, a.co), 4);
        vg = ConvGeometry{u, u, std::min<u64>(a.ci, 8), a.kw, a.kh, std::min<u64>(a.co, 8), next_pow2(u * u * c)};
        if (!is_pow2(u * u) || vg.c_i % c || vg.c_o % c) vg.n = 0;
    }
    bool verified = false, oracle_ok = false;
    if (vg.n) {
        vg.validate();
        oracle_ok = conv_oracle(vg, meth, a.seed);
        verified = true;
    }
    json j{{"bench", "conv"},
           {"config",
            {{"u_w", a.uw}, {"u_h", a.uh}, {"c_i", a.ci}, {"c_o", a.co}, {"k_w", a.kw}, {"k_h", a.kh}, {"n", a.n}, {"method", to_string(meth)}}},
           {"predicted", cost_json(pred)},
           {"measured", cost_json(meas)},
           {"match", pred == meas},
           {"oracle", {{"mode", vmode}, {"verified", verified}, {"ok", oracle_ok}}}};
    char buf[320];
    std::snprintf(buf, sizeof buf, "conv %lux%lu@%lu k%lux%lu@%lu %s: rotations %lu, sc_mults %lu, adds %lu (predicted %s, %s oracle %s)\n",
                  (unsigned long)a.uw, (unsigned long)a.uh, (unsigned long)a.ci, (unsigned long)a.kw, (unsigned long)a.kh,
                  (unsigned long)a.co, to_string(meth), (unsigned long)meas.rotations, (unsigned long)meas.sc_mults,
                  (unsigned long)meas.adds, pred == meas ? "match" : "MISMATCH", vmode.c_str(),
                  !verified ? "skipped" : oracle_ok ? "ok" : "FAILED");
    emit(j, as_json, out, buf);
    return pred == meas && (!verified || oracle_ok) ? kOk : kMismatch;
}

// ---- run ----
struct RunArgs {
    std::string model = default_model(), input, role = "both", transport = "inproc", host = "127.0.0.1", inject, ot = "base";
    int port = 0;
    u64 seed = 1, client_seed = 2;
};

json party_json(const PartyResult& r) {
    json j{{"abort", r.abort},
           {"ledger", ledger_json(r.ledger)},
           {"linear_ledger", ledger_json(r.linear_ledger)},
           {"bytes_by_phase", bytes_json(r.bytes)},
           {"transcript", r.transcript},
           {"triples", r.triples},
           {"triples_used", r.triples_used}};
    if (!r.abort && !r.logits.empty()) j["logits"] = r.logits;
    return j;
}

json relu_json(const ReluCommReport& r) {
    return {{"relus", r.width},
            {"and_gates", r.e},
            {"formula_bits_per_relu", r.formula_bits},
            {"formula_kb_per_relu", r.formula_kb},
            {"gc_table_bytes", r.gc_table_bytes},
            {"measured_bytes", {{"gc", r.gc}, {"ot", r.ot}, {"auth1", r.auth1}, {"auth2", r.auth2}, {"total", r.total}}},
            {"measured_bytes_per_relu", r.per_relu_bytes()}};
}

int cmd_run(const RunArgs& a, bool as_json, const std::string& out) {
    if (a.model.empty()) throw ConfigError("--model is required (or set SIMC_MODEL)");
    PartyOptions so, co;
    so.seed = a.seed;
    co.seed = a.client_seed;
    if (a.ot == "dealer") {
        if (a.role != "both" || a.transport != "inproc") throw ConfigError("dealer OT only works for an in-process session");
        so.ot = co.ot = OtMode::dealer;
    } else if (a.ot != "base") {
        throw ConfigError("--ot must be base or dealer");
    }
    if (!a.inject.empty()) co.dev = parse_deviation(a.inject);
    const auto t0 = std::chrono::steady_clock::now();

    ModelSpec model;
    ivec x;
    if (a.role != "client") model = load_model(a.model);
    if (a.role != "server") {
        if (a.input.empty()) throw ConfigError("--input is required");
        x = load_input(a.input);
    }
    if (a.role != "client") validate_model(model);

    json j;
    bool abort = false;
    std::string human;
    if (a.role == "both") {
        SessionResult R;
        if (a.transport == "inproc") {
            R = run_inproc(model, x, so, co);
        } else if (a.transport == "tcp") {
            int bound = 0;
            auto srv = TcpChannel::listen(a.port, &bound);
            auto cli = TcpChannel::connect(a.host, bound);
            R = run_session(*srv, *cli, model, x, so, co);
        } else {
            throw ConfigError("--transport must be inproc or tcp");
        }
        j = {{"model", model.name}, {"transport", a.transport}, {"abort", R.client.abort}, {"server", party_json(R.server)},
             {"client", party_json(R.client)}, {"relu", relu_json(R.server.relu)}};
        j["logits"] = R.client.abort ? json(nullptr) : json(R.client.logits);
        if (!a.inject.empty()) j["inject"] = a.inject;
        abort = R.client.abort;
        human = abort ? "ABORT\n" : "logits: " + json(R.client.logits).dump() + "\n";
        char buf[256];
        std::snprintf(buf, sizeof buf, "server ledger: rotations %lu sc_mults %lu adds %lu ct_mults %lu; per-ReLU %.1f bytes measured, %.2f KB formula\n",
                      (unsigned long)R.server.ledger.rotations, (unsigned long)R.server.ledger.sc_mults,
                      (unsigned long)R.server.ledger.ct_adds, (unsigned long)R.server.ledger.ct_mults,
                      R.server.relu.per_relu_bytes(), R.server.relu.formula_kb);
        human += buf;
    } else if (a.role == "server") {
        if (a.transport != "tcp") throw ConfigError("a lone server endpoint needs --transport tcp");
        auto ch = TcpChannel::listen(a.port);
        auto r = run_server(*ch, model, so);
        j = {{"model", model.name}, {"role", "server"}, {"abort", r.abort}, {"server", party_json(r)}, {"relu", relu_json(r.relu)}};
        abort = r.abort;
        human = abort ? "ABORT\n" : "session passed the consistency check\n";
    } else if (a.role == "client") {
        if (a.transport != "tcp") throw ConfigError("a lone client endpoint needs --transport tcp");
        auto ch = TcpChannel::connect(a.host, a.port);
        auto r = run_client(*ch, x, co);
        j = {{"role", "client"}, {"abort", r.abort}, {"client", party_json(r)}};
        j["logits"] = r.abort ? json(nullptr) : json(r.logits);
        abort = r.abort;
        human = abort ? "ABORT\n" : "logits: " + json(r.logits).dump() + "\n";
    } else {
        throw ConfigError("--role must be server, client or both");
    }
    if (!as_json) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "elapsed %.2f s\n", secs_since(t0));
        human += buf;
    }
    emit(j, as_json, out, human);
    return abort ? kAbort : kOk;
}

int cmd_oracle(const std::string& model_path, const std::string& input, bool as_json, const std::string& out) {
    auto m = load_model(model_path);
    validate_model(m);
    auto y = plain_forward(m, load_input(input));
    emit(json{{"model", m.name}, {"logits", y}}, as_json, out, "logits: " + json(y).dump() + "\n");
    return kOk;
}

int cmd_count(const std::string& model_path, const std::string& sheet, const std::string& method, u64 n, bool as_json,
              const std::string& out) {
    json j;
    std::string human;
    bool ok = true;
    auto row = [&](const std::string& name, const CountReport& s, const CountReport& o) {
        double ratio = o.measured.rotations ? (double)s.measured.rotations / (double)o.measured.rotations : 0.0;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-10s rotations %lu vs %lu (%.1fx)  sc_mults %lu vs %lu  adds %lu vs %lu\n", name.c_str(),
                      (unsigned long)s.measured.rotations, (unsigned long)o.measured.rotations, ratio,
                      (unsigned long)s.measured.sc_mults, (unsigned long)o.measured.sc_mults, (unsigned long)s.measured.adds,
                      (unsigned long)o.measured.adds);
        human += buf;
        ok = ok && s.match() && o.match();
        return json{{"model", name}, {"simc", count_report_json(s)}, {"simc2", count_report_json(o)}, {"rotation_ratio", ratio}};
    };
    if (!sheet.empty()) {
        std::vector<std::string> names = sheet == "all" ? sheet_models() : std::vector<std::string>{sheet};
        j["sheets"] = json::array();
        for (auto& nm : names) {
            auto s = model_sheet(nm, n);
            j["sheets"].push_back(row(nm, s.simc, s.ours));
        }
    } else {
        if (model_path.empty()) throw ConfigError("--model or --sheet is required");
        auto m = load_model(model_path);
        validate_model(m, false);
        if (!method.empty()) {
            m.method = method;
            auto r = count_report(m);
            ok = r.match();
            j = count_report_json(r);
            human = "total rotations " + std::to_string(r.measured.rotations) + ", sc_mults " + std::to_string(r.measured.sc_mults) +
                    ", adds " + std::to_string(r.measured.adds) + (r.match() ? "" : " (MISMATCH)") + "\n";
        } else {
            m.method = "simc";
            auto s = count_report(m);
            m.method = "simc2";
            j = row(m.name, s, count_report(m));
        }
    }
    emit(j, as_json, out, human);
    return ok ? kOk : kMismatch;
}

int cmd_triples(const std::string& action, u64 count, u64 n, u64 seed, const std::string& file, u64 alpha, bool as_json,
                const std::string& out) {
    const Field F{FieldParams()};
    if (action == "gen") {
        if (file.empty()) throw ConfigError("--file is required");
        Prg g(seed, "triple-pool");
        const fe a = alpha ? alpha % F.p() : g.nonzero(F.p());
        OpLedger led;
        SlotBackend be(F, n, &led);
        auto keys = be.keygen(g);
        auto [s, c] = InprocChannel::pair();
        TriplePool cp;
        std::exception_ptr err;
        std::thread th([&] {
            try {
                Prg r(seed, "triple-client");
                cp = gen_triples_client(*c, be, keys, count, r);
            } catch (...) {
                err = std::current_exception();
            }
        });
        Prg r(seed, "triple-server");
        TriplePool sp = gen_triples_server(*s, be, keys.pk, a, count, r);
        th.join();
        if (err) std::rethrow_exception(err);
        save_triple_pools(file, F.p(), sp, cp);
        json j{{"count", count}, {"alpha", a}, {"ct_mults", led.ct_mults}, {"file", file}};
        emit(j, as_json, out, "wrote " + std::to_string(count) + " triples (" + std::to_string(led.ct_mults) + " ct_mults), alpha " + std::to_string(a) + "\n");
        return kOk;
    }
    if (action == "check") {
        auto [p0, p1] = load_triple_pools(file, F.p());
        bool ok = open_and_check(F, alpha, p0, p1);
        emit(json{{"count", p0.size()}, {"ok", ok}}, as_json, out, std::string(ok ? "all triples check" : "CHECK FAILED") + "\n");
        return ok ? kOk : kMismatch;
    }
    throw ConfigError("triple-pool action must be gen or check");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"client-malicious secure inference toolkit"};
    app.require_subcommand(1);
    bool as_json = false;
    std::string out;
    app.add_flag("--json", as_json, "print the JSON report");
    app.add_option("--out", out, "also write the JSON report to a file");

    MatvecArgs mv;
    auto* c_mv = app.add_subcommand("bench-matvec", "matrix-vector product: counts + oracle check");
    c_mv->add_option("--ni", mv.ni, "input dimension")->required();
    c_mv->add_option("--no", mv.no, "output dimension")->required();
    c_mv->add_option("--n", mv.n, "slot count");
    c_mv->add_option("--l", mv.l, "block size (0 = default)");
    c_mv->add_option("--method", mv.method, "naive | hybrid | simc2");
    c_mv->add_option("--seed", mv.seed);

    ConvArgs cv;
    auto* c_cv = app.add_subcommand("bench-conv", "convolution: counts + oracle check");
    c_cv->add_option("--uw", cv.uw)->required();
    c_cv->add_option("--uh", cv.uh)->required();
    c_cv->add_option("--ci", cv.ci)->required();
    c_cv->add_option("--co", cv.co)->required();
    c_cv->add_option("--kw", cv.kw);
    c_cv->add_option("--kh", cv.kh);
    c_cv->add_option("--n", cv.n);
    c_cv->add_option("--method", cv.method, "gazelle | simc2");
    c_cv->add_option("--seed", cv.seed);
    c_cv->add_flag("--exact", cv.exact, "run the data check on the full geometry");

    RunArgs ra;
    auto* c_run = app.add_subcommand("run", "end-to-end secure inference");
    c_run->add_option("--model", ra.model);
    c_run->add_option("--input", ra.input);
    c_run->add_option("--role", ra.role, "server | client | both");
    c_run->add_option("--transport", ra.transport, "inproc | tcp");
    c_run->add_option("--host", ra.host);
    c_run->add_option("--port", ra.port);
    c_run->add_option("--seed", ra.seed, "server seed");
    c_run->add_option("--client-seed", ra.client_seed);
    c_run->add_option("--inject", ra.inject, "site:layer:value[:index], site = nonlin | lin_t | lin_d | q");
    c_run->add_option("--ot", ra.ot, "base | dealer (insecure, in-process only)");

    std::string om = default_model(), oi;
    auto* c_or = app.add_subcommand("oracle", "plaintext forward pass");
    c_or->add_option("--model", om);
    c_or->add_option("--input", oi)->required();

    std::string cm, sheet, cmeth;
    u64 cn = 4096;
    auto* c_ct = app.add_subcommand("count", "operation counts without crypto");
    c_ct->add_option("--model", cm);
    c_ct->add_option("--sheet", sheet, "alexnet | vgg16 | resnet18 | resnet50 | resnet101 | resnet152 | all");
    c_ct->add_option("--method", cmeth, "only this method");
    c_ct->add_option("--n", cn, "slot count for sheets");

    std::string tact, tfile;
    u64 tcount = 1000, tn = 4096, tseed = 1, talpha = 0;
    auto* c_tp = app.add_subcommand("triple-pool", "generate or check an authenticated triple pool");
    c_tp->add_option("action", tact, "gen | check")->required();
    c_tp->add_option("--file", tfile)->required();
    c_tp->add_option("--count", tcount);
    c_tp->add_option("--n", tn);
    c_tp->add_option("--seed", tseed);
    c_tp->add_option("--alpha", talpha, "MAC key (gen: 0 = random)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    try {
        if (*c_mv) return bench_matvec(mv, as_json, out);
        if (*c_cv) return bench_conv(cv, as_json, out);
        if (*c_run) return cmd_run(ra, as_json, out);
        if (*c_or) return cmd_oracle(om, oi, as_json, out);
        if (*c_ct) return cmd_count(cm, sheet, cmeth, cn, as_json, out);
        if (*c_tp) return cmd_triples(tact, tcount, tn, tseed, tfile, talpha, as_json, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kTransport;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return kTransport;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kTransport;
    }
    return kConfig;
}
