#pragma once

#include <array>
#include <utility>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpcroute/ring.hpp"

namespace mpcroute {

// Frame on the wire: [tag:1][length:8 LE][payload]. The 9-byte header is
// counted in the byte totals. Lockstep steps (exchange) carry a 4-byte LE
// step number as a payload header so desync fails deterministically.
enum class MsgTag : u8 {
    Hello = 1,    // handshake / run parameters
    Open = 2,     // beaver mask openings (ring elements)
    Bits = 3,     // packed boolean-share words
    Tensor = 4,   // wire-format shared tensor
    Result = 5,   // final logits shares to the client
    IndexOpen = 6 // revealed-mode selection opening
};

bool known_tag(u8 t);

struct Message {
    u8 tag = 0;
    std::vector<u8> payload;
};

struct StatCounters {
    u64 bytes_sent = 0;
    u64 bytes_received = 0;
    u64 rounds = 0;

    StatCounters operator-(const StatCounters& o) const {
        return {bytes_sent - o.bytes_sent, bytes_received - o.bytes_received,
                rounds - o.rounds};
    }
    StatCounters& operator+=(const StatCounters& o) {
        bytes_sent += o.bytes_sent;
        bytes_received += o.bytes_received;
        rounds += o.rounds;
        return *this;
    }
    bool operator==(const StatCounters&) const = default;
};

// Global totals plus a per-phase breakdown. Phase totals always sum to the
// attributed global totals.
struct CommStats {
    StatCounters total;
    std::map<std::string, StatCounters> phases;

    void attribute(const std::string& phase, const StatCounters& delta) {
        phases[phase] += delta;
        total += delta;
    }
    StatCounters phase_sum() const {
        StatCounters s;
        for (const auto& [k, v] : phases) s += v;
        return s;
    }
};

// Blocking byte stream between two endpoints.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send_bytes(const void* data, std::size_t n) = 0;
    virtual void recv_bytes(void* data, std::size_t n) = 0; // ConnectionError on close
    virtual void close() {}
};

// Mutex+cv byte queue pair for same-process simulation.
class InProcChannel final : public Channel {
public:
    struct Pipe {
        std::mutex m;
        std::condition_variable cv;
        std::deque<u8> buf;
        bool closed = false;
    };

    InProcChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
        : in_(std::move(in)), out_(std::move(out)) {}
    ~InProcChannel() override { close(); }

    static std::pair<std::unique_ptr<InProcChannel>, std::unique_ptr<InProcChannel>>
    make_pair();

    void send_bytes(const void* data, std::size_t n) override;
    void recv_bytes(void* data, std::size_t n) override;
    void close() override;

private:
    std::shared_ptr<Pipe> in_, out_;
};

// Plain TCP with TCP_NODELAY.
class SocketChannel final : public Channel {
public:
    explicit SocketChannel(int fd) : fd_(fd) {}
    ~SocketChannel() override { close(); }
    SocketChannel(const SocketChannel&) = delete;
    SocketChannel& operator=(const SocketChannel&) = delete;

    static std::unique_ptr<SocketChannel> listen_accept(u16 port);
    static std::unique_ptr<SocketChannel> connect_to(const std::string& host,
                                                     u16 port,
                                                     int retries = 50);

    void send_bytes(const void* data, std::size_t n) override;
    void recv_bytes(void* data, std::size_t n) override;
    void close() override;

private:
    int fd_ = -1;
};

// Incremental SHA-256 (OpenSSL EVP) used for transcript and artifact hashes.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;
    Sha256(Sha256&& o) noexcept : ctx_(o.ctx_) { o.ctx_ = nullptr; }
    Sha256& operator=(Sha256&& o) noexcept {
        std::swap(ctx_, o.ctx_);
        return *this;
    }

    void update(const void* data, std::size_t n);
    std::array<u8, 32> finish() const; // copies state; hash can keep running

    static std::array<u8, 32> digest(std::span<const u8> data);

private:
    void* ctx_ = nullptr;
};

std::string hex(std::span<const u8> bytes);

// Framing, byte/round accounting, step sequencing and transcript hashing on
// top of a Channel. One endpoint per transport; strictly sequential use.
class Transport {
public:
    // `lead` fixes who sends first inside exchange() (party 0 leads).
    Transport(std::unique_ptr<Channel> ch, bool lead)
        : ch_(std::move(ch)), lead_(lead) {}

    void send(MsgTag tag, std::span<const u8> payload);
    Message recv();
    Message recv_expect(MsgTag tag);

    // Symmetric simultaneous send/recv of one protocol step. Counts exactly
    // one round on both sides. The payload is prefixed with the step number.
    std::vector<u8> exchange(MsgTag tag, std::span<const u8> body);

    const StatCounters& stats() const { return stats_; }
    // Delta since the previous take; used for per-phase attribution.
    StatCounters take_delta() {
        StatCounters d = stats_ - mark_;
        mark_ = stats_;
        return d;
    }

    std::array<u8, 32> transcript_digest() const { return transcript_.finish(); }

    void close() { ch_->close(); }

private:
    void write_frame(MsgTag tag, std::span<const u8> head, std::span<const u8> body);

    std::unique_ptr<Channel> ch_;
    bool lead_;
    StatCounters stats_;
    StatCounters mark_;
    u32 send_step_ = 0;
    u32 recv_step_ = 0;
    Sha256 transcript_;
};

// little-endian scalar packing helpers
inline void put_u64(std::vector<u8>& out, u64 v) {
    for (int i = 0; i < 8; i++) out.push_back(static_cast<u8>(v >> (8 * i)));
}
inline void put_u32(std::vector<u8>& out, u32 v) {
    for (int i = 0; i < 4; i++) out.push_back(static_cast<u8>(v >> (8 * i)));
}
inline u64 get_u64(const u8* p) {
    u64 v = 0;
    for (int i = 0; i < 8; i++) v |= static_cast<u64>(p[i]) << (8 * i);
    return v;
}
inline u32 get_u32(const u8* p) {
    u32 v = 0;
    for (int i = 0; i < 4; i++) v |= static_cast<u32>(p[i]) << (8 * i);
    return v;
}

} // namespace mpcroute
