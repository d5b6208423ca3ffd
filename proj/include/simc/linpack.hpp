#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"
#include "prg.hpp"
#include "slothe.hpp"

namespace simc {

enum class MatVecMethod { naive, hybrid, simc2 };

inline const char* to_string(MatVecMethod m) {
    switch (m) {
        case MatVecMethod::naive: return "naive";
        case MatVecMethod::hybrid: return "hybrid";
        default: return "simc2";
    }
}
inline MatVecMethod matvec_method_from(const std::string& s) {
    if (s == "naive") return MatVecMethod::naive;
    if (s == "hybrid" || s == "simc" || s == "gazelle") return MatVecMethod::hybrid;
    if (s == "simc2" || s == "ours") return MatVecMethod::simc2;
    throw std::invalid_argument("unknown matvec method: " + s);
}

inline u64 next_pow2(u64 x) {
    u64 r = 1;
    while (r < x) r <<= 1;
    return r;
}

using Matrix = std::vector<fvec>;  // row-major, n_o rows of n_i

struct MatVecCost {
    u64 rotations = 0, sc_mults = 0, adds = 0, output_ciphertexts = 0;
    bool operator==(const MatVecCost&) const = default;
};

// Shape-only part of a plan: enough to count, nothing to compute with.
struct MatVecShape {
    MatVecMethod method = MatVecMethod::simc2;
    u64 n_i = 0, n_o = 0;  // as given
    u64 Ni = 0, No = 0;    // padded to powers of two
    u64 n = 0;
    u64 l = 1;       // simc2 row-group size
    u64 copies = 1;  // replicas of t in the input ciphertext
    u64 D = 1;       // hybrid: diagonals; simc2: encodings per slab
    u64 slabs = 1;   // simc2 output ciphertexts
    u64 seg() const { return Ni / l; }
};

inline u64 default_l(u64 Ni, u64 No, u64 n) { return std::max<u64>(1, Ni * No / n); }

inline MatVecShape matvec_shape(MatVecMethod m, u64 n_i, u64 n_o, u64 n, u64 l = 0) {
    if (!is_pow2(n)) throw std::invalid_argument("n must be a power of two");
    if (n_i == 0 || n_o == 0) throw std::invalid_argument("empty matrix");
    MatVecShape s;
    s.method = m;
    s.n_i = n_i; s.n_o = n_o; s.n = n;
    s.Ni = next_pow2(n_i); s.No = next_pow2(n_o);
    if (s.Ni > n) throw std::invalid_argument("n_i exceeds the slot count");
    switch (m) {
        case MatVecMethod::naive:
            s.copies = 1;
            s.D = s.No;
            break;
        case MatVecMethod::hybrid:
            if (s.No > n) throw std::invalid_argument("n_o exceeds the slot count");
            if (s.Ni % s.No != 0) throw std::invalid_argument("hybrid packing needs n_o | n_i");
            s.copies = std::min<u64>(n / s.Ni, s.No);
            s.D = s.No / s.copies;
            break;
        case MatVecMethod::simc2: {
            s.l = l ? l : default_l(s.Ni, s.No, n);
            if (!is_pow2(s.l) || s.l > s.No || s.No % s.l || s.Ni % s.l)
                throw std::invalid_argument("invalid l=" + std::to_string(s.l));
            s.copies = n / s.Ni;
            u64 groups = s.No / s.l;
            s.slabs = (groups + s.copies - 1) / s.copies;
            s.D = s.l;
            break;
        }
    }
    return s;
}

// Closed-form counts for the layouts above.  For simc2 with more than one
// output slab the sc/add counts are S*l and S*(l-1); with one slab this is
// exactly (l-1, n_i n_o/n, n_i n_o/n - 1).
inline MatVecCost predict_matvec_cost(const MatVecShape& s) {
    MatVecCost c;
    switch (s.method) {
        case MatVecMethod::naive:
            c.rotations = s.No * log2_exact(s.Ni);
            c.sc_mults = s.No;
            c.adds = c.rotations;
            c.output_ciphertexts = s.No;
            break;
        case MatVecMethod::hybrid:
            c.rotations = log2_exact(s.n / s.No) + s.D - 1;
            c.sc_mults = s.D;
            c.adds = c.rotations;
            c.output_ciphertexts = 1;
            break;
        case MatVecMethod::simc2:
            c.rotations = s.l - 1;
            c.sc_mults = s.slabs * s.l;
            c.adds = s.slabs * (s.l - 1);
            c.output_ciphertexts = s.slabs;
            break;
    }
    return c;
}
inline MatVecCost predict_matvec_cost(MatVecMethod m, u64 n_i, u64 n_o, u64 n, u64 l = 0) {
    return predict_matvec_cost(matvec_shape(m, n_i, n_o, n, l));
}

struct MatVecPlan : MatVecShape {
    std::vector<fvec> encoded;  // naive: per row; hybrid: per diagonal; simc2: slab*l + k

    // hybrid staggered input: copy j holds t rotated left by j*D
    u64 hybrid_col(u64 q) const { return ((q % Ni) + (q / Ni) * D) % Ni; }
};

inline MatVecPlan plan_matvec(MatVecMethod m, const Matrix& N, u64 n, u64 l = 0) {
    if (N.empty()) throw std::invalid_argument("empty matrix");
    u64 n_o = N.size(), n_i = N[0].size();
    for (auto& row : N)
        if (row.size() != n_i) throw std::invalid_argument("ragged matrix");
    MatVecPlan P;
    static_cast<MatVecShape&>(P) = matvec_shape(m, n_i, n_o, n, l);
    auto at = [&](u64 r, u64 c) -> fe { return (r < n_o && c < n_i) ? N[r][c] : 0; };

    switch (m) {
        case MatVecMethod::naive:
            P.encoded.assign(P.No, fvec(n, 0));
            for (u64 r = 0; r < P.No; ++r)
                for (u64 c = 0; c < P.Ni; ++c) P.encoded[r][c] = at(r, c);
            break;
        case MatVecMethod::hybrid:
            P.encoded.assign(P.D, fvec(n, 0));
            for (u64 k = 0; k < P.D; ++k)
                for (u64 i = 0; i < n; ++i) {
                    u64 q = (i + k) % n;
                    if (q / P.Ni >= P.copies) continue;
                    P.encoded[k][i] = at(i % P.No, P.hybrid_col(q));
                }
            break;
        case MatVecMethod::simc2: {
            u64 s = P.seg(), L = P.l;
            P.encoded.assign(P.slabs * L, fvec(n, 0));
            for (u64 sl = 0; sl < P.slabs; ++sl)
                for (u64 j = 0; j < P.copies; ++j) {
                    u64 g = sl * P.copies + j;
                    if (g * L >= P.No) break;
                    for (u64 k = 0; k < L; ++k)
                        for (u64 r = 0; r < L; ++r) {
                            u64 row = g * L + r, segi = (r + k) % L;
                            for (u64 m2 = 0; m2 < s; ++m2)
                                P.encoded[sl * L + k][j * P.Ni + r * s + m2] = at(row, segi * s + m2);
                        }
                }
            break;
        }
    }
    return P;
}

// Client-side input layout for a plan (before encryption).
inline fvec pack_matvec_input(const MatVecShape& P, const fvec& t) {
    if (t.size() != P.n_i) throw std::invalid_argument("input length mismatch");
    fvec v(P.n, 0);
    for (u64 j = 0; j < P.copies; ++j)
        for (u64 m = 0; m < P.Ni; ++m) {
            u64 src = P.method == MatVecMethod::hybrid ? (m + j * P.D) % P.Ni : m;
            v[j * P.Ni + m] = src < P.n_i ? t[src] : 0;
        }
    return v;
}

// Homomorphic program.  `scales` lets one set of input rotations serve several
// weight matrices that differ by a public/server scalar (N and alpha*N).
// Returns one output batch per scale.
template <class Backend, class Ct = typename Backend::Ct>
std::vector<std::vector<Ct>> apply_matvec(Backend& be, const MatVecPlan& P, const Ct& in,
                                          const fvec& scales = {1}, const Field* F = nullptr) {
    if (be.slots() != P.n) throw std::invalid_argument("plan/backend slot count mismatch");
    auto enc = [&](u64 idx, fe sc) {
        return [&, idx, sc]() {
            if constexpr (std::is_same_v<Ct, PackedVector>) {
                const fvec& e = P.encoded.at(idx);
                if (sc == 1 || !F) return PackedVector{e, 0};
                return PackedVector{F->scale(e, sc), 0};
            } else {
                return 0;
            }
        };
    };
    std::vector<std::vector<Ct>> out(scales.size());
    switch (P.method) {
        case MatVecMethod::naive: {
            int folds = log2_exact(P.Ni);
            for (size_t si = 0; si < scales.size(); ++si)
                for (u64 r = 0; r < P.No; ++r) {
                    Ct acc = be.sc_mult_lazy(enc(r, scales[si]), in);
                    for (int f = 1; f <= folds; ++f) acc = be.add(acc, be.rot(acc, (long)(P.Ni >> f)));
                    out[si].push_back(acc);
                }
            break;
        }
        case MatVecMethod::hybrid: {
            std::vector<Ct> rots{in};
            for (u64 k = 1; k < P.D; ++k) rots.push_back(be.rot(in, (long)k));
            int folds = log2_exact(P.n / P.No);
            for (size_t si = 0; si < scales.size(); ++si) {
                Ct acc = be.sc_mult_lazy(enc(0, scales[si]), rots[0]);
                for (u64 k = 1; k < P.D; ++k) acc = be.add(acc, be.sc_mult_lazy(enc(k, scales[si]), rots[k]));
                for (int f = 1; f <= folds; ++f) acc = be.add(acc, be.rot(acc, (long)(P.n >> f)));
                out[si].push_back(acc);
            }
            break;
        }
        case MatVecMethod::simc2: {
            std::vector<Ct> rots{in};
            for (u64 k = 1; k < P.l; ++k) rots.push_back(be.rot(in, (long)(k * P.seg())));
            for (size_t si = 0; si < scales.size(); ++si)
                for (u64 sl = 0; sl < P.slabs; ++sl) {
                    Ct acc = be.sc_mult_lazy(enc(sl * P.l, scales[si]), rots[0]);
                    for (u64 k = 1; k < P.l; ++k)
                        acc = be.add(acc, be.sc_mult_lazy(enc(sl * P.l + k, scales[si]), rots[k]));
                    out[si].push_back(acc);
                }
            break;
        }
    }
    return out;
}

// Plaintext fold of decrypted results (or masks) into the n_o output vector.
inline fvec collapse_share(const Field& F, const std::vector<fvec>& vs, const MatVecShape& P) {
    fvec u(P.n_o, 0);
    switch (P.method) {
        case MatVecMethod::naive:
            if (vs.size() != P.No) throw std::invalid_argument("collapse: expected n_o vectors");
            for (u64 r = 0; r < P.n_o; ++r) u[r] = vs[r].at(0);
            break;
        case MatVecMethod::hybrid:
            if (vs.size() != 1) throw std::invalid_argument("collapse: expected one vector");
            for (u64 r = 0; r < P.n_o; ++r) u[r] = vs[0].at(r);
            break;
        case MatVecMethod::simc2: {
            if (vs.size() != P.slabs) throw std::invalid_argument("collapse: slab count mismatch");
            u64 s = P.seg();
            for (u64 sl = 0; sl < P.slabs; ++sl) {
                if (vs[sl].size() != P.n) throw std::invalid_argument("collapse: slot length mismatch");
                for (u64 j = 0; j < P.copies; ++j)
                    for (u64 r = 0; r < P.l; ++r) {
                        u64 row = (sl * P.copies + j) * P.l + r;
                        if (row >= P.n_o) continue;
                        fe acc = 0;
                        u64 base = j * P.Ni + r * s;
                        for (u64 m = 0; m < s; ++m) acc = F.add(acc, vs[sl][base + m]);
                        u[row] = acc;
                    }
            }
            break;
        }
    }
    return u;
}

// Subtract a fresh uniform mask from each result; the masks are the server's
// share, the masked ciphertexts go to the client.
struct MaskedBatch {
    std::vector<PackedVector> cts;
    std::vector<fvec> masks;
};
inline MaskedBatch mask_and_share(const SlotBackend& be, const std::vector<PackedVector>& cts, Prg* rng) {
    MaskedBatch mb;
    for (auto& c : cts) {
        fvec m = rng ? rng->uniform_vec(be.field().p(), be.slots()) : fvec(be.slots(), 0);
        mb.cts.push_back(be.rerandomize(be.sub(c, PackedVector{m, 0})));
        mb.masks.push_back(std::move(m));
    }
    return mb;
}

inline fvec matvec_plain(const Field& F, const Matrix& N, const fvec& t) {
    fvec u(N.size(), 0);
    for (size_t r = 0; r < N.size(); ++r) u[r] = F.dot(N[r], t);
    return u;
}

}  // namespace simc
