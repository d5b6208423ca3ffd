#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace simc {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

// 44-bit prime 1073741793*2^14 - 1.  (p+1)/2 has exactly 13 trailing zeros,
// which is what makes the sign comparator cheap.
inline constexpr u64 kDefaultPrime = 17592185536511ull;
inline constexpr int kDefaultLambda = 128;

inline u64 mulmod(u64 a, u64 b, u64 m) { return (u64)((u128)a * b % m); }

inline u64 powmod(u64 b, u64 e, u64 m) {
    u64 r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1) r = mulmod(r, b, m);
        b = mulmod(b, b, m);
        e >>= 1;
    }
    return r;
}

// deterministic for all 64-bit n with these witnesses
inline bool is_prime(u64 n) {
    if (n < 2) return false;
    for (u64 q : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
        if (n % q == 0) return n == q;
    }
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) { d >>= 1; ++s; }
    for (u64 a : {2ull, 325ull, 9375ull, 28178ull, 450775ull, 9780504ull, 1795265022ull}) {
        u64 x = powmod(a, d, n);
        if (x == 0 || x == 1 || x == n - 1) continue;
        bool comp = true;
        for (int r = 1; r < s; ++r) {
            x = mulmod(x, x, n);
            if (x == n - 1) { comp = false; break; }
        }
        if (comp) return false;
    }
    return true;
}

inline int ceil_log2(u64 x) {
    int k = 0;
    while (k < 64 && (u64(1) << k) < x) ++k;
    return k;
}

struct FieldParams {
    u64 p = kDefaultPrime;
    int kappa = 44;
    int lambda = kDefaultLambda;

    FieldParams() = default;
    explicit FieldParams(u64 modulus, int lam = kDefaultLambda) : p(modulus), kappa(ceil_log2(modulus)), lambda(lam) {
        if (!is_prime(p)) throw std::invalid_argument("modulus " + std::to_string(p) + " is not prime");
        if (kappa > 63) throw std::invalid_argument("modulus too wide");
        if (lambda < 2 * kappa) throw std::invalid_argument("lambda must be >= 2*kappa");
    }
    u64 half() const { return (p + 1) / 2; }
};

// Elements are plain u64 in [0, p); the Field carries the modulus.
using fe = u64;
using fvec = std::vector<fe>;

struct Field {
    FieldParams prm;

    Field() : prm(kDefaultPrime) {}
    explicit Field(u64 p, int lambda = kDefaultLambda) : prm(p, lambda) {}
    explicit Field(const FieldParams& fp) : prm(fp) {}

    u64 p() const { return prm.p; }
    int kappa() const { return prm.kappa; }

    fe add(fe a, fe b) const { u64 s = a + b; return s >= prm.p ? s - prm.p : s; }
    fe sub(fe a, fe b) const { return a >= b ? a - b : a + prm.p - b; }
    fe neg(fe a) const { return a == 0 ? 0 : prm.p - a; }
    fe mul(fe a, fe b) const { return mulmod(a, b, prm.p); }
    fe inv(fe a) const {
        if (a % prm.p == 0) throw std::domain_error("inverse of zero");
        return powmod(a, prm.p - 2, prm.p);
    }
    fe reduce(u64 x) const { return x % prm.p; }

    fe from_signed(std::int64_t s) const {
        std::int64_t m = s % (std::int64_t)prm.p;
        return m < 0 ? (fe)(m + (std::int64_t)prm.p) : (fe)m;
    }
    std::int64_t to_signed(fe a) const {
        return a < prm.half() ? (std::int64_t)a : (std::int64_t)a - (std::int64_t)prm.p;
    }
    int sign_of(fe a) const { return a < prm.half() ? 1 : 0; }
    fe relu(fe a) const { return sign_of(a) ? a : 0; }

    // little-endian: bits[0] is the LSB
    std::vector<int> bits(fe x) const {
        std::vector<int> b(prm.kappa);
        for (int i = 0; i < prm.kappa; ++i) b[i] = (x >> i) & 1;
        return b;
    }
    fe recompose(const std::vector<int>& b) const {
        fe acc = 0;
        for (size_t i = 0; i < b.size(); ++i)
            if (b[i]) acc = add(acc, powmod(2, i, prm.p));
        return acc;
    }

    fvec add(const fvec& a, const fvec& b) const {
        fvec r(a.size());
        for (size_t i = 0; i < a.size(); ++i) r[i] = add(a[i], b[i]);
        return r;
    }
    fvec sub(const fvec& a, const fvec& b) const {
        fvec r(a.size());
        for (size_t i = 0; i < a.size(); ++i) r[i] = sub(a[i], b[i]);
        return r;
    }
    fvec scale(const fvec& a, fe s) const {
        fvec r(a.size());
        for (size_t i = 0; i < a.size(); ++i) r[i] = mul(a[i], s);
        return r;
    }
    fe dot(const fvec& a, const fvec& b) const {
        fe acc = 0;
        for (size_t i = 0; i < a.size(); ++i) acc = add(acc, mul(a[i], b[i]));
        return acc;
    }
};

inline void put_u64(std::vector<std::uint8_t>& out, u64 v) {
    for (int i = 0; i < 8; ++i) out.push_back((std::uint8_t)(v >> (8 * i)));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((std::uint8_t)(v >> (8 * i)));
}
inline u64 get_u64(const std::uint8_t* p) {
    u64 v = 0;
    for (int i = 0; i < 8; ++i) v |= (u64)p[i] << (8 * i);
    return v;
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (std::uint32_t)p[i] << (8 * i);
    return v;
}

// Sequential reader over a byte payload; throws on underrun.
struct Reader {
    const std::uint8_t* p;
    size_t n, off = 0;
    explicit Reader(const std::vector<std::uint8_t>& v) : p(v.data()), n(v.size()) {}
    void need(size_t k) const {
        if (off + k > n) throw std::runtime_error("truncated payload");
    }
    u64 u64_() { need(8); u64 v = get_u64(p + off); off += 8; return v; }
    std::uint32_t u32_() { need(4); auto v = get_u32(p + off); off += 4; return v; }
    std::uint8_t u8_() { need(1); return p[off++]; }
    void bytes(void* dst, size_t k) { need(k); std::memcpy(dst, p + off, k); off += k; }
    bool done() const { return off == n; }
};

inline void put_fvec(std::vector<std::uint8_t>& out, const fvec& v) {
    put_u32(out, (std::uint32_t)v.size());
    for (fe x : v) put_u64(out, x);
}
inline fvec get_fvec(Reader& r) {
    std::uint32_t n = r.u32_();
    r.need((size_t)n * 8);
    fvec v(n);
    for (auto& x : v) x = r.u64_();
    return v;
}

}  // namespace simc
