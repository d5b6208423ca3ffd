#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "field.hpp"
#include "prg.hpp"

namespace simc {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrame = 64u << 20;
inline constexpr size_t kFrameHeader = 6;

enum class Msg : std::uint8_t {
    HELLO = 1,
    MODEL_META,
    CLIENT_CT,
    ZK_STUB,
    MASKED_RESULT_CTS,
    GC_TABLE,
    GARBLED_INPUTS,
    OT_SENDER_SETUP,
    OT_RECEIVER_KEYS,
    OT_SENDER_PAYLOAD,
    LABEL_CTS,
    OPEN_GAMMA_LAMBDA,
    TRIPLE_CTS,
    TRIPLE_RESULT_CTS,
    CHECK_VECTORS,
    Q_SHARE,
    VERDICT,
    OUTPUT_SHARE,
    HE_PUBKEY,
    kLast
};

enum class Phase : std::uint8_t { setup = 0, triples, linear, gc, ot, auth1, auth2, check, output, kCount };

inline const char* to_string(Phase p) {
    static const char* names[] = {"setup", "triples", "linear", "gc", "ot", "auth1", "auth2", "check", "output"};
    return (size_t)p < (size_t)Phase::kCount ? names[(size_t)p] : "unknown";
}

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Frame {
    Msg type = Msg::HELLO;
    Phase phase = Phase::setup;
    Bytes payload;
    size_t wire_size() const { return kFrameHeader + payload.size(); }
};

inline Bytes encode_frame(const Frame& f) {
    if (f.payload.size() > kMaxFrame) throw TransportError("frame exceeds 64 MiB");
    Bytes out;
    out.reserve(f.wire_size());
    put_u32(out, (std::uint32_t)f.payload.size());
    out.push_back((std::uint8_t)f.type);
    out.push_back((std::uint8_t)f.phase);
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

inline void check_header(std::uint32_t len, std::uint8_t type, std::uint8_t phase) {
    if (len > kMaxFrame) throw TransportError("oversized frame");
    if (type == 0 || type >= (std::uint8_t)Msg::kLast) throw ProtocolError("unknown message type " + std::to_string(type));
    if (phase >= (std::uint8_t)Phase::kCount) throw ProtocolError("unknown phase tag");
}

inline Frame decode_frame(const Bytes& b) {
    if (b.size() < kFrameHeader) throw TransportError("malformed frame header");
    std::uint32_t len = get_u32(b.data());
    check_header(len, b[4], b[5]);
    if (b.size() != kFrameHeader + len) throw TransportError("frame length mismatch");
    return Frame{(Msg)b[4], (Phase)b[5], Bytes(b.begin() + kFrameHeader, b.end())};
}

struct PhaseBytes {
    std::array<u64, (size_t)Phase::kCount> sent{}, received{};
    // payload bytes (no frame header) per message type
    std::array<u64, (size_t)Msg::kLast> msg_sent{}, msg_received{};
    u64 payload(Msg m) const { return msg_sent[(size_t)m] + msg_received[(size_t)m]; }
    u64 total_sent() const { u64 s = 0; for (auto x : sent) s += x; return s; }
    u64 total_received() const { u64 s = 0; for (auto x : received) s += x; return s; }
};

// Framing, accounting and transcript hashing live here; subclasses move bytes.
class Channel {
public:
    Channel() {
        sodium_once();
        crypto_generichash_init(&hash_, nullptr, 0, 32);
    }
    virtual ~Channel() = default;

    void send(Msg t, Phase ph, Bytes payload) {
        Frame f{t, ph, std::move(payload)};
        Bytes wire = encode_frame(f);
        std::lock_guard<std::mutex> lk(send_mu_);
        write_bytes(wire);
        bytes_.sent[(size_t)ph] += wire.size();
        bytes_.msg_sent[(size_t)t] += wire.size() - kFrameHeader;
        absorb('S', wire);
    }
    Frame recv() {
        std::lock_guard<std::mutex> lk(recv_mu_);
        Bytes hdr = read_bytes(kFrameHeader);
        std::uint32_t len = get_u32(hdr.data());
        check_header(len, hdr[4], hdr[5]);
        Bytes body = len ? read_bytes(len) : Bytes{};
        Frame f{(Msg)hdr[4], (Phase)hdr[5], std::move(body)};
        bytes_.received[(size_t)f.phase] += f.wire_size();
        bytes_.msg_received[(size_t)f.type] += f.payload.size();
        hdr.insert(hdr.end(), f.payload.begin(), f.payload.end());
        absorb('R', hdr);
        return f;
    }
    Bytes expect(Msg t) {
        Frame f = recv();
        if (f.type != t)
            throw ProtocolError("expected message " + std::to_string((int)t) + ", got " + std::to_string((int)f.type));
        return std::move(f.payload);
    }

    const PhaseBytes& bytes() const { return bytes_; }
    // running digest of every frame in both directions, in local order
    std::string transcript_hex() {
        crypto_generichash_state copy = hash_;
        std::uint8_t d[32];
        crypto_generichash_final(&copy, d, 32);
        char hex[65];
        sodium_bin2hex(hex, sizeof hex, d, 32);
        return hex;
    }
    virtual void close() {}

protected:
    virtual void write_bytes(const Bytes& b) = 0;
    virtual Bytes read_bytes(size_t n) = 0;

private:
    void absorb(char dir, const Bytes& b) {
        crypto_generichash_update(&hash_, (const std::uint8_t*)&dir, 1);
        crypto_generichash_update(&hash_, b.data(), b.size());
    }
    std::mutex send_mu_, recv_mu_;
    PhaseBytes bytes_;
    crypto_generichash_state hash_;
};

// Byte pipe between two threads of one process.
class InprocChannel : public Channel {
    struct Pipe {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::uint8_t> q;
        bool closed = false;
    };

public:
    static std::pair<std::unique_ptr<InprocChannel>, std::unique_ptr<InprocChannel>> pair() {
        auto a = std::make_shared<Pipe>(), b = std::make_shared<Pipe>();
        return {std::unique_ptr<InprocChannel>(new InprocChannel(a, b)), std::unique_ptr<InprocChannel>(new InprocChannel(b, a))};
    }
    ~InprocChannel() override { close(); }
    void close() override {
        for (auto& p : {out_, in_}) {
            std::lock_guard<std::mutex> lk(p->mu);
            p->closed = true;
            p->cv.notify_all();
        }
    }

protected:
    void write_bytes(const Bytes& b) override {
        std::lock_guard<std::mutex> lk(out_->mu);
        if (out_->closed) throw TransportError("channel closed");
        out_->q.insert(out_->q.end(), b.begin(), b.end());
        out_->cv.notify_all();
    }
    Bytes read_bytes(size_t n) override {
        std::unique_lock<std::mutex> lk(in_->mu);
        in_->cv.wait(lk, [&] { return in_->q.size() >= n || in_->closed; });
        if (in_->q.size() < n) throw TransportError("channel closed");
        Bytes out(in_->q.begin(), in_->q.begin() + n);
        in_->q.erase(in_->q.begin(), in_->q.begin() + n);
        return out;
    }

private:
    InprocChannel(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in) : out_(std::move(out)), in_(std::move(in)) {}
    std::shared_ptr<Pipe> out_, in_;
};

class TcpChannel : public Channel {
public:
    static std::unique_ptr<TcpChannel> listen(int port, int* bound_port = nullptr) {
        int ls = ::socket(AF_INET, SOCK_STREAM, 0);
        if (ls < 0) throw TransportError("socket() failed");
        int one = 1;
        ::setsockopt(ls, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        a.sin_addr.s_addr = htonl(INADDR_ANY);
        a.sin_port = htons((std::uint16_t)port);
        if (::bind(ls, (sockaddr*)&a, sizeof a) < 0 || ::listen(ls, 1) < 0) {
            ::close(ls);
            throw TransportError("cannot listen on port " + std::to_string(port));
        }
        if (bound_port) {
            socklen_t len = sizeof a;
            ::getsockname(ls, (sockaddr*)&a, &len);
            *bound_port = ntohs(a.sin_port);
        }
        return std::unique_ptr<TcpChannel>(new TcpChannel(ls, true));
    }
    static std::unique_ptr<TcpChannel> connect(const std::string& host, int port, int retries = 50) {
        addrinfo hints{}, *res = nullptr;
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
            throw TransportError("cannot resolve " + host);
        for (int i = 0; i <= retries; ++i) {
            int s = ::socket(AF_INET, SOCK_STREAM, 0);
            if (s >= 0 && ::connect(s, res->ai_addr, res->ai_addrlen) == 0) {
                ::freeaddrinfo(res);
                return std::unique_ptr<TcpChannel>(new TcpChannel(s, false));
            }
            if (s >= 0) ::close(s);
            ::usleep(100000);
        }
        ::freeaddrinfo(res);
        throw TransportError("cannot connect to " + host + ":" + std::to_string(port));
    }
    // blocks until the peer connects (listening side only)
    void accept() {
        if (!listening_) return;
        int s = ::accept(fd_, nullptr, nullptr);
        if (s < 0) throw TransportError("accept() failed");
        ::close(fd_);
        fd_ = s;
        listening_ = false;
        nodelay();
    }
    ~TcpChannel() override { close(); }
    void close() override {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

protected:
    void write_bytes(const Bytes& b) override {
        accept();
        size_t off = 0;
        while (off < b.size()) {
            ssize_t k = ::send(fd_, b.data() + off, b.size() - off, MSG_NOSIGNAL);
            if (k <= 0) throw TransportError("send failed");
            off += (size_t)k;
        }
    }
    Bytes read_bytes(size_t n) override {
        accept();
        Bytes b(n);
        size_t off = 0;
        while (off < n) {
            ssize_t k = ::recv(fd_, b.data() + off, n - off, 0);
            if (k <= 0) throw TransportError("connection closed");
            off += (size_t)k;
        }
        return b;
    }

private:
    TcpChannel(int fd, bool listening) : fd_(fd), listening_(listening) {
        if (!listening) nodelay();
    }
    void nodelay() {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    int fd_ = -1;
    bool listening_ = false;
};

// Session hello: version byte + role byte each way.
inline void session_hello(Channel& ch, std::uint8_t role) {
    ch.send(Msg::HELLO, Phase::setup, Bytes{kProtocolVersion, role});
    Bytes peer = ch.expect(Msg::HELLO);
    if (peer.size() != 2 || peer[0] != kProtocolVersion) throw ProtocolError("protocol version mismatch");
    if (peer[1] == role) throw ProtocolError("both endpoints claim the same role");
}

}  // namespace simc
