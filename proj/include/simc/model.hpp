#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "linproto.hpp"

namespace simc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ivec = std::vector<long long>;

struct LayerSpec {
    LinearOp::Kind kind = LinearOp::Kind::fc;
    u64 n_i = 0, n_o = 0;            // fc
    ConvGeometry geo;                // conv; geo.n is the model's slot count
    std::vector<ivec> W;             // fc [o][i]
    ivec K;                          // conv [o][c][ky][kx] flattened
    size_t in_dim() const { return kind == LinearOp::Kind::fc ? n_i : geo.c_i * geo.plane(); }
    size_t out_dim() const { return kind == LinearOp::Kind::fc ? n_o : geo.c_o * geo.plane(); }
    bool has_weights() const { return kind == LinearOp::Kind::fc ? !W.empty() : !K.empty(); }
};

struct ModelSpec {
    std::string name = "model";
    u64 modulus = kDefaultPrime;
    u64 slots = 4096;
    std::string method = "simc2";
    long long input_bound = 0;  // |x_i| <= input_bound; 0 = unchecked
    std::vector<LayerSpec> layers;
};

inline MatVecMethod model_matvec_method(const std::string& m) { return matvec_method_from(m); }
inline ConvMethod model_conv_method(const std::string& m) {
    return matvec_method_from(m) == MatVecMethod::simc2 ? ConvMethod::simc2 : ConvMethod::gazelle;
}

using nlohmann::json;

inline json model_to_json(const ModelSpec& m, bool with_weights = true) {
    json j;
    j["name"] = m.name;
    j["modulus"] = m.modulus;
    j["slots"] = m.slots;
    j["method"] = m.method;
    j["activation"] = "relu";
    j["input_bound"] = m.input_bound;
    j["layers"] = json::array();
    for (auto& L : m.layers) {
        json l;
        if (L.kind == LinearOp::Kind::fc) {
            l["type"] = "fc";
            l["dims"] = {L.n_i, L.n_o};
            if (with_weights) l["weights"] = L.W;
        } else {
            l["type"] = "conv";
            const auto& g = L.geo;
            l["dims"] = {{"u_w", g.u_w}, {"u_h", g.u_h}, {"c_i", g.c_i}, {"c_o", g.c_o}, {"k_w", g.k_w}, {"k_h", g.k_h}};
            if (with_weights) l["kernels"] = L.K;
        }
        j["layers"].push_back(l);
    }
    return j;
}

inline ModelSpec model_from_json(const json& j) {
    try {
        ModelSpec m;
        m.name = j.value("name", "model");
        m.modulus = j.value("modulus", kDefaultPrime);
        m.slots = j.value("slots", (u64)4096);
        m.method = j.value("method", "simc2");
        m.input_bound = j.value("input_bound", 0LL);
        if (j.value("activation", "relu") != "relu") throw ConfigError("only relu activations are supported");
        for (auto& l : j.at("layers")) {
            LayerSpec L;
            std::string t = l.at("type");
            if (t == "fc") {
                L.kind = LinearOp::Kind::fc;
                L.n_i = l.at("dims").at(0);
                L.n_o = l.at("dims").at(1);
                if (l.contains("weights")) {
                    L.W = l.at("weights").get<std::vector<ivec>>();
                    if (L.W.size() != L.n_o) throw ConfigError("fc weight rows != output dim");
                    for (auto& r : L.W)
                        if (r.size() != L.n_i) throw ConfigError("fc weight row length != input dim");
                }
            } else if (t == "conv") {
                L.kind = LinearOp::Kind::conv;
                auto& d = l.at("dims");
                L.geo = ConvGeometry{d.at("u_w"), d.at("u_h"), d.at("c_i"), d.at("k_w"), d.at("k_h"), d.at("c_o"), m.slots};
                if (l.contains("kernels")) {
                    L.K = l.at("kernels").get<ivec>();
                    if (L.K.size() != L.geo.c_o * L.geo.c_i * L.geo.kk()) throw ConfigError("kernel count does not match geometry");
                }
            } else {
                throw ConfigError("unknown layer type: " + t);
            }
            m.layers.push_back(std::move(L));
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
}

inline ModelSpec load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open model file " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
    return model_from_json(j);
}

inline ivec load_input(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open input file " + path);
    try {
        json j;
        f >> j;
        return j.get<ivec>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("input file: ") + e.what());
    }
}

// Shapes chain, geometry packs, and worst-case magnitudes stay inside the
// signed range of the field.  Returns the per-layer output bounds.
inline std::vector<long double> validate_model(const ModelSpec& m, bool need_weights = true) {
    if (m.layers.empty()) throw ConfigError("model has no layers");
    FieldParams fp;
    try {
        fp = FieldParams(m.modulus);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (!is_pow2(m.slots)) throw ConfigError("slot count must be a power of two");
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const auto& L = m.layers[i];
        if (i && L.in_dim() != m.layers[i - 1].out_dim()) throw ConfigError("layer dims do not chain at layer " + std::to_string(i));
        if (need_weights && !L.has_weights()) throw ConfigError("layer " + std::to_string(i) + " has no weights");
        try {
            if (L.kind == LinearOp::Kind::fc) matvec_shape(model_matvec_method(m.method), L.n_i, L.n_o, m.slots);
            else L.geo.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
    std::vector<long double> bounds;
    if (!need_weights || m.input_bound <= 0) return bounds;
    const long double lim = (long double)((m.modulus - 1) / 2);
    long double b = (long double)m.input_bound;
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const auto& L = m.layers[i];
        long double worst = 0;
        if (L.kind == LinearOp::Kind::fc) {
            for (auto& r : L.W) {
                long double s = 0;
                for (auto w : r) s += std::fabs((long double)w);
                worst = std::max(worst, s * b);
            }
        } else {
            const u64 per = L.geo.c_i * L.geo.kk();
            for (u64 o = 0; o < L.geo.c_o; ++o) {
                long double s = 0;
                for (u64 q = 0; q < per; ++q) s += std::fabs((long double)L.K[o * per + q]);
                worst = std::max(worst, s * b);
            }
        }
        // the MAC path multiplies by alpha inside the field, which wraps harmlessly;
        // only the signed reading of u at the ReLU and output matters
        if (worst > lim) throw ConfigError("layer " + std::to_string(i) + " may overflow the field's signed range");
        bounds.push_back(worst);
        b = worst;
    }
    return bounds;
}

// Plain integer forward pass: the oracle for end-to-end runs.
inline ivec plain_forward(const ModelSpec& m, const ivec& x) {
    std::vector<__int128> v(x.begin(), x.end());
    for (size_t i = 0; i < m.layers.size(); ++i) {
        const auto& L = m.layers[i];
        if (v.size() != L.in_dim()) throw ConfigError("input length does not match the model");
        std::vector<__int128> y(L.out_dim(), 0);
        if (L.kind == LinearOp::Kind::fc) {
            for (u64 o = 0; o < L.n_o; ++o)
                for (u64 c = 0; c < L.n_i; ++c) y[o] += (__int128)L.W[o][c] * v[c];
        } else {
            const auto& g = L.geo;
            const long ph = (long)(g.k_h - 1) / 2, pw = (long)(g.k_w - 1) / 2;
            for (u64 o = 0; o < g.c_o; ++o)
                for (long yy = 0; yy < (long)g.u_h; ++yy)
                    for (long xx = 0; xx < (long)g.u_w; ++xx) {
                        __int128 acc = 0;
                        for (u64 c = 0; c < g.c_i; ++c)
                            for (long ky = 0; ky < (long)g.k_h; ++ky)
                                for (long kx = 0; kx < (long)g.k_w; ++kx) {
                                    long sy = yy + ky - ph, sx = xx + kx - pw;
                                    if (sy < 0 || sx < 0 || sy >= (long)g.u_h || sx >= (long)g.u_w) continue;
                                    acc += (__int128)L.K[((o * g.c_i + c) * g.k_h + ky) * g.k_w + kx] * v[c * g.plane() + sy * g.u_w + sx];
                                }
                        y[o * g.plane() + yy * g.u_w + xx] = acc;
                    }
        }
        if (i + 1 < m.layers.size())
            for (auto& e : y) e = e > 0 ? e : 0;
        v = std::move(y);
    }
    return ivec(v.begin(), v.end());
}

// Packing plans for one layer.  Without weights only shapes are built, which
// is all the client (and count mode) needs.
inline LinearOp build_layer_op(const Field& F, const ModelSpec& m, const LayerSpec& L, bool with_weights) {
    if (L.kind == LinearOp::Kind::fc) {
        auto meth = model_matvec_method(m.method);
        if (!with_weights) return make_fc_shape(meth, L.n_i, L.n_o, m.slots);
        Matrix N(L.n_o, fvec(L.n_i));
        for (u64 o = 0; o < L.n_o; ++o)
            for (u64 c = 0; c < L.n_i; ++c) N[o][c] = F.from_signed(L.W[o][c]);
        return make_fc(meth, std::move(N), m.slots);
    }
    ConvGeometry g = L.geo;
    g.n = m.slots;
    if (!with_weights) return make_conv(model_conv_method(m.method), g, nullptr);
    auto K = std::make_shared<Kernels>(g.c_o, std::vector<std::vector<fvec>>(g.c_i, std::vector<fvec>(g.k_h, fvec(g.k_w))));
    size_t q = 0;
    for (auto& o : *K)
        for (auto& c : o)
            for (auto& row : c)
                for (auto& w : row) w = F.from_signed(L.K[q++]);
    return make_conv(model_conv_method(m.method), g, K);
}

}  // namespace simc
