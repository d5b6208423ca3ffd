#pragma once

#include <string>
#include <vector>

#include "model.hpp"

namespace simc {

struct LayerCount {
    std::string label;
    OpCost predicted, measured;
};
struct CountReport {
    std::string method;
    u64 slots = 0;
    std::vector<LayerCount> layers;
    OpCost predicted, measured;
    bool match() const { return predicted == measured; }
};

// One forward pass worth of homomorphic linear work, counted symbolically.
inline OpCost count_op(const LinearOp& op) {
    OpLedger led;
    CountBackend be(op.slots(), &led);
    std::vector<SymCt> in(op.in_cts(), be.fresh());
    op.apply(be, in, fvec{1}, nullptr);
    return {led.rotations, led.sc_mults, led.ct_adds};
}

inline std::string layer_label(const LayerSpec& L) {
    if (L.kind == LinearOp::Kind::fc) return "fc " + std::to_string(L.n_i) + "x" + std::to_string(L.n_o);
    const auto& g = L.geo;
    return "conv " + std::to_string(g.u_w) + "x" + std::to_string(g.u_h) + "@" + std::to_string(g.c_i) + " k" +
           std::to_string(g.k_w) + "x" + std::to_string(g.k_h) + "@" + std::to_string(g.c_o) + " n" + std::to_string(g.n);
}

inline CountReport count_report(const ModelSpec& m) {
    const Field F{FieldParams(m.modulus)};
    CountReport R;
    R.method = m.method;
    R.slots = m.slots;
    for (auto& L : m.layers) {
        ModelSpec one = m;
        if (L.kind == LinearOp::Kind::conv) one.slots = L.geo.n;  // conv layers may carry their own slot count
        LinearOp op = build_layer_op(F, one, L, false);
        LayerCount c{layer_label(L), op.predicted(), count_op(op)};
        R.predicted += c.predicted;
        R.measured += c.measured;
        R.layers.push_back(std::move(c));
    }
    return R;
}

inline json cost_json(const OpCost& c) { return {{"rotations", c.rotations}, {"sc_mults", c.sc_mults}, {"adds", c.adds}}; }
inline json count_report_json(const CountReport& R) {
    json j{{"method", R.method}, {"slots", R.slots}, {"predicted", cost_json(R.predicted)}, {"measured", cost_json(R.measured)},
           {"match", R.match()}};
    j["layers"] = json::array();
    for (auto& l : R.layers)
        j["layers"].push_back({{"layer", l.label}, {"predicted", cost_json(l.predicted)}, {"measured", cost_json(l.measured)}});
    return j;
}

// ---- large-model geometry sheets (CIFAR-10 sized, count mode only) ----
//
// Every conv is counted at its input resolution with same padding (a stride-2
// conv is a stride-1 conv followed by subsampling).  Channels are padded to
// powers of two and each layer uses min(n, plane * channels) slots so that
// the channels-per-ciphertext value divides both channel counts.

namespace detail {
inline LayerSpec sheet_conv(u64 res, u64 ci, u64 co, u64 k, u64 n) {
    LayerSpec L;
    L.kind = LinearOp::Kind::conv;
    u64 pci = next_pow2(ci), pco = next_pow2(co), plane = res * res;
    u64 ne = std::min<u64>(n, plane * std::min(pci, pco));
    L.geo = ConvGeometry{res, res, pci, k, k, pco, ne};
    return L;
}
inline LayerSpec sheet_fc(u64 ni, u64 no) {
    LayerSpec L;
    L.kind = LinearOp::Kind::fc;
    L.n_i = ni;
    L.n_o = no;
    return L;
}
}  // namespace detail

inline std::vector<std::string> sheet_models() { return {"alexnet", "vgg16", "resnet18", "resnet50", "resnet101", "resnet152"}; }

inline ModelSpec sheet_model(const std::string& name, u64 n = 4096) {
    using detail::sheet_conv;
    using detail::sheet_fc;
    ModelSpec m;
    m.name = name;
    m.slots = n;
    auto& Ls = m.layers;
    if (name == "alexnet") {
        Ls = {sheet_conv(32, 3, 64, 5, n),   sheet_conv(16, 64, 192, 5, n), sheet_conv(8, 192, 384, 3, n),
              sheet_conv(8, 384, 256, 3, n), sheet_conv(8, 256, 256, 3, n), sheet_fc(4096, 4096),
              sheet_fc(4096, 4096),          sheet_fc(4096, 10)};
    } else if (name == "vgg16") {
        const int cfg[] = {64, 64, -1, 128, 128, -1, 256, 256, 256, -1, 512, 512, 512, -1, 512, 512, 512, -1};
        u64 res = 32, c = 3;
        for (int v : cfg) {
            if (v < 0) {
                res /= 2;
                continue;
            }
            Ls.push_back(sheet_conv(res, c, (u64)v, 3, n));
            c = (u64)v;
        }
        Ls.push_back(sheet_fc(512, 512));
        Ls.push_back(sheet_fc(512, 512));
        Ls.push_back(sheet_fc(512, 10));
    } else if (name.rfind("resnet", 0) == 0) {
        std::vector<int> blocks;
        bool bottleneck = true;
        if (name == "resnet18") blocks = {2, 2, 2, 2}, bottleneck = false;
        else if (name == "resnet50") blocks = {3, 4, 6, 3};
        else if (name == "resnet101") blocks = {3, 4, 23, 3};
        else if (name == "resnet152") blocks = {3, 8, 36, 3};
        else throw ConfigError("unknown sheet model " + name);
        const u64 exp = bottleneck ? 4 : 1;
        Ls.push_back(sheet_conv(32, 3, 64, 3, n));
        u64 in = 64, res = 32;
        for (int s = 0; s < 4; ++s) {
            const u64 w = 64u << s;
            for (int b = 0; b < blocks[s]; ++b) {
                const bool down = s > 0 && b == 0;
                const u64 rout = down ? res / 2 : res;
                if (bottleneck) {
                    Ls.push_back(sheet_conv(res, in, w, 1, n));
                    Ls.push_back(sheet_conv(res, w, w, 3, n));
                    Ls.push_back(sheet_conv(rout, w, w * exp, 1, n));
                } else {
                    Ls.push_back(sheet_conv(res, in, w, 3, n));
                    Ls.push_back(sheet_conv(rout, w, w, 3, n));
                }
                if (down || in != w * exp) Ls.push_back(sheet_conv(res, in, w * exp, 1, n));
                in = w * exp;
                res = rout;
            }
        }
        Ls.push_back(sheet_fc(512 * exp, 10));
    } else {
        throw ConfigError("unknown sheet model " + name);
    }
    return m;
}

struct ModelSheet {
    std::string name;
    CountReport simc, ours;
};
inline ModelSheet model_sheet(const std::string& name, u64 n = 4096) {
    ModelSpec m = sheet_model(name, n);
    ModelSheet s{name, {}, {}};
    m.method = "simc";
    s.simc = count_report(m);
    m.method = "simc2";
    s.ours = count_report(m);
    return s;
}

}  // namespace simc
