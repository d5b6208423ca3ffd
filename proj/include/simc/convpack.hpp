#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "slothe.hpp"

namespace simc {

enum class ConvMethod { gazelle, simc2 };

inline const char* to_string(ConvMethod m) { return m == ConvMethod::gazelle ? "gazelle" : "simc2"; }
inline ConvMethod conv_method_from(const std::string& s) {
    if (s == "gazelle" || s == "simc") return ConvMethod::gazelle;
    if (s == "simc2" || s == "ours") return ConvMethod::simc2;
    throw std::invalid_argument("unknown conv method: " + s);
}

struct ConvGeometry {
    u64 u_w = 0, u_h = 0, c_i = 0, k_w = 1, k_h = 1, c_o = 0, n = 4096;

    u64 plane() const { return u_w * u_h; }
    u64 c_n() const { return n / plane(); }
    u64 kk() const { return k_w * k_h; }
    void validate() const {
        if (!is_pow2(n)) throw std::invalid_argument("n must be a power of two");
        if (!u_w || !u_h || !c_i || !c_o || !k_w || !k_h) throw std::invalid_argument("empty geometry");
        if (plane() > n || n % plane()) throw std::invalid_argument("u_w*u_h must divide n");
        if (c_i % c_n() || c_o % c_n()) throw std::invalid_argument("c_n must divide c_i and c_o");
        if ((k_w - 1) / 2 >= u_w || (k_h - 1) / 2 >= u_h) throw std::invalid_argument("kernel reaches past the whole input");
    }
    u64 in_cts() const { return c_i / c_n(); }
    u64 out_cts() const { return c_o / c_n(); }
};

struct ConvCost {
    u64 rotations = 0, sc_mults = 0, adds = 0;
    bool operator==(const ConvCost&) const = default;
};

inline ConvCost predict_conv_cost(ConvMethod m, const ConvGeometry& g) {
    g.validate();
    u64 cn = g.c_n(), kk = g.kk();
    ConvCost c;
    u64 siso = g.c_i * (kk - 1) / cn;
    c.rotations = (m == ConvMethod::gazelle ? (g.c_o * g.c_i / (cn * cn)) * (cn - 1) : (g.c_o / cn) * (cn - 1)) + siso;
    c.sc_mults = kk * g.c_i * g.c_o / cn;
    c.adds = (g.c_o / cn) * (g.c_i * kk - 1);
    return c;
}

// kernels[o][c][ky][kx]
using Kernels = std::vector<std::vector<std::vector<fvec>>>;
// tensor[c][y*u_w + x]
using Tensor = std::vector<fvec>;

struct ConvOffset {
    long dy, dx;
    long shift(u64 u_w) const { return dy * (long)u_w + dx; }
};

struct ConvPlan {
    ConvMethod method = ConvMethod::simc2;
    ConvGeometry geo;
    std::vector<ConvOffset> offsets;  // SISO offsets, offset 0 first
    const Kernels* kernels = nullptr;  // null in count-only mode

    // Coefficient vector for (output group, input group, diagonal, offset):
    // channel slot b carries the weight of output channel (b - delta) mod c_n,
    // zeroed where the shifted pixel falls outside the image.
    fvec encode(u64 og, u64 ig, u64 delta, size_t oi) const {
        const u64 cn = geo.c_n(), pl = geo.plane();
        const ConvOffset o = offsets[oi];
        const long ph = (long)(geo.k_h - 1) / 2, pw = (long)(geo.k_w - 1) / 2;
        fvec v(geo.n, 0);
        for (u64 b = 0; b < cn; ++b) {
            u64 oc = og * cn + (b + cn - delta) % cn, ic = ig * cn + b;
            fe w = (*kernels)[oc][ic][o.dy + ph][o.dx + pw];
            if (!w) continue;
            for (long y = 0; y < (long)geo.u_h; ++y) {
                long sy = y + o.dy;
                if (sy < 0 || sy >= (long)geo.u_h) continue;
                for (long x = 0; x < (long)geo.u_w; ++x) {
                    long sx = x + o.dx;
                    if (sx < 0 || sx >= (long)geo.u_w) continue;
                    v[b * pl + y * geo.u_w + x] = w;
                }
            }
        }
        return v;
    }
};

inline std::vector<ConvOffset> siso_offsets(const ConvGeometry& g) {
    std::vector<ConvOffset> offs{{0, 0}};
    const long ph = (long)(g.k_h - 1) / 2, pw = (long)(g.k_w - 1) / 2;
    for (long dy = -ph; dy < (long)g.k_h - ph; ++dy)
        for (long dx = -pw; dx < (long)g.k_w - pw; ++dx)
            if (dy || dx) offs.push_back({dy, dx});
    return offs;
}

inline ConvPlan plan_conv(ConvMethod m, const ConvGeometry& g, const Kernels* kernels = nullptr) {
    g.validate();
    if (kernels) {
        if (kernels->size() != g.c_o) throw std::invalid_argument("kernel count != c_o");
        for (auto& k : *kernels) {
            if (k.size() != g.c_i || k[0].size() != g.k_h || k[0][0].size() != g.k_w)
                throw std::invalid_argument("kernel shape mismatch");
        }
    }
    return ConvPlan{m, g, siso_offsets(g), kernels};
}

inline std::vector<fvec> pack_conv_input(const ConvGeometry& g, const Tensor& t) {
    if (t.size() != g.c_i) throw std::invalid_argument("channel count mismatch");
    std::vector<fvec> cts(g.in_cts(), fvec(g.n, 0));
    for (u64 c = 0; c < g.c_i; ++c) {
        if (t[c].size() != g.plane()) throw std::invalid_argument("plane size mismatch");
        auto& dst = cts[c / g.c_n()];
        for (u64 i = 0; i < g.plane(); ++i) dst[(c % g.c_n()) * g.plane() + i] = t[c][i];
    }
    return cts;
}

inline Tensor unpack_conv_output(const Field& F, const ConvGeometry& g, const std::vector<fvec>& vs) {
    (void)F;
    if (vs.size() != g.out_cts()) throw std::invalid_argument("output ciphertext count mismatch");
    Tensor out(g.c_o, fvec(g.plane()));
    for (u64 c = 0; c < g.c_o; ++c)
        for (u64 i = 0; i < g.plane(); ++i) out[c][i] = vs[c / g.c_n()][(c % g.c_n()) * g.plane() + i];
    return out;
}

template <class Backend, class Ct = typename Backend::Ct>
std::vector<std::vector<Ct>> apply_conv(Backend& be, const ConvPlan& P, const std::vector<Ct>& in,
                                        const fvec& scales = {1}, const Field* F = nullptr) {
    const ConvGeometry& g = P.geo;
    if (be.slots() != g.n) throw std::invalid_argument("plan/backend slot count mismatch");
    if (in.size() != g.in_cts()) throw std::invalid_argument("input ciphertext count mismatch");
    const u64 cn = g.c_n(), nig = g.in_cts(), nog = g.out_cts();
    const size_t no = P.offsets.size();

    // SISO input rotations, shared by every kernel and every scale
    std::vector<std::vector<Ct>> rin(nig);
    for (u64 ig = 0; ig < nig; ++ig)
        for (size_t oi = 0; oi < no; ++oi)
            rin[ig].push_back(oi == 0 ? in[ig] : be.rot(in[ig], P.offsets[oi].shift(g.u_w)));

    auto enc = [&](u64 og, u64 ig, u64 d, size_t oi, fe sc) {
        return [&, og, ig, d, oi, sc]() {
            if constexpr (std::is_same_v<Ct, PackedVector>) {
                fvec v = P.encode(og, ig, d, oi);
                if (sc != 1 && F) v = F->scale(v, sc);
                return PackedVector{std::move(v), 0};
            } else {
                return 0;
            }
        };
    };
    auto align = [&](const Ct& c, u64 d) { return d == 0 ? c : be.rot(c, (long)(d * g.plane())); };

    std::vector<std::vector<Ct>> out(scales.size());
    for (size_t si = 0; si < scales.size(); ++si) {
        const fe sc = scales[si];
        for (u64 og = 0; og < nog; ++og) {
            std::optional<Ct> total;
            auto acc = [&](std::optional<Ct>& a, const Ct& v) { a = a ? be.add(*a, v) : v; };
            if (P.method == ConvMethod::gazelle) {
                for (u64 ig = 0; ig < nig; ++ig) {
                    std::optional<Ct> block;
                    for (u64 d = 0; d < cn; ++d) {
                        std::optional<Ct> part;
                        for (size_t oi = 0; oi < no; ++oi) acc(part, be.sc_mult_lazy(enc(og, ig, d, oi, sc), rin[ig][oi]));
                        acc(block, align(*part, d));
                    }
                    acc(total, *block);
                }
            } else {
                // first add everything that shares a diagonal, then rotate once
                for (u64 d = 0; d < cn; ++d) {
                    std::optional<Ct> part;
                    for (u64 ig = 0; ig < nig; ++ig)
                        for (size_t oi = 0; oi < no; ++oi) acc(part, be.sc_mult_lazy(enc(og, ig, d, oi, sc), rin[ig][oi]));
                    acc(total, align(*part, d));
                }
            }
            out[si].push_back(*total);
        }
    }
    return out;
}

// Direct same-padding cross-correlation.
inline Tensor conv_plain(const Field& F, const ConvGeometry& g, const Kernels& K, const Tensor& t) {
    Tensor out(g.c_o, fvec(g.plane(), 0));
    const long ph = (long)(g.k_h - 1) / 2, pw = (long)(g.k_w - 1) / 2;
    for (u64 o = 0; o < g.c_o; ++o)
        for (long y = 0; y < (long)g.u_h; ++y)
            for (long x = 0; x < (long)g.u_w; ++x) {
                fe acc = 0;
                for (u64 c = 0; c < g.c_i; ++c)
                    for (long ky = 0; ky < (long)g.k_h; ++ky)
                        for (long kx = 0; kx < (long)g.k_w; ++kx) {
                            long sy = y + ky - ph, sx = x + kx - pw;
                            if (sy < 0 || sx < 0 || sy >= (long)g.u_h || sx >= (long)g.u_w) continue;
                            acc = F.add(acc, F.mul(K[o][c][ky][kx], t[c][sy * g.u_w + sx]));
                        }
                out[o][y * g.u_w + x] = acc;
            }
    return out;
}

}  // namespace simc
