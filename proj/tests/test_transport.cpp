#include <doctest.h>

#include <thread>
#include <unistd.h>

#include "mpcroute/errors.hpp"
#include "mpcroute/transport.hpp"

using namespace mpcroute;

namespace {
std::pair<Transport, Transport> inproc_pair() {
    auto [c0, c1] = InProcChannel::make_pair();
    return {Transport(std::move(c0), true), Transport(std::move(c1), false)};
}
} // namespace

TEST_CASE("framing arithmetic: 9-byte header plus payload") {
    auto [t0, t1] = inproc_pair();
    const std::vector<u8> payload = {1, 2, 3, 4, 5};
    t0.send(MsgTag::Tensor, payload);
    CHECK(t0.stats().bytes_sent == 14);
    const Message m = t1.recv();
    CHECK(m.tag == static_cast<u8>(MsgTag::Tensor));
    CHECK(m.payload == payload);
    CHECK(t1.stats().bytes_received == 14);

    t0.send(MsgTag::Tensor, {});
    CHECK(t0.stats().bytes_sent == 14 + 9);
    CHECK(t1.recv().payload.empty());
    CHECK(t1.stats().bytes_received == 14 + 9);
}

TEST_CASE("unknown tag is a protocol error") {
    auto [raw0, raw1] = InProcChannel::make_pair();
    Transport t1(std::move(raw1), false);
    u8 frame[9] = {99, 0, 0, 0, 0, 0, 0, 0, 0};
    raw0->send_bytes(frame, sizeof(frame));
    CHECK_THROWS_AS((void)t1.recv(), ProtocolError);
}

TEST_CASE("exchange counts one round on both sides") {
    auto [t0, t1] = inproc_pair();
    const int n = 17;
    std::thread peer([&] {
        for (int i = 0; i < n; i++) {
            std::vector<u8> b{static_cast<u8>(i)};
            (void)t1.exchange(MsgTag::Open, b);
        }
    });
    for (int i = 0; i < n; i++) {
        std::vector<u8> b{static_cast<u8>(100 + i)};
        const auto got = t0.exchange(MsgTag::Open, b);
        CHECK(got == std::vector<u8>{static_cast<u8>(i)});
    }
    peer.join();
    CHECK(t0.stats().rounds == n);
    CHECK(t1.stats().rounds == n);
    CHECK(t0.stats().bytes_sent == t1.stats().bytes_received);
    CHECK(t1.stats().bytes_sent == t0.stats().bytes_received);
}

TEST_CASE("step desynchronization is detected") {
    auto [t0, t1] = inproc_pair();
    // forge a frame carrying step number 3 instead of the expected 0
    std::vector<u8> forged;
    put_u32(forged, 3);
    forged.push_back(0xab);
    t0.send(MsgTag::Open, forged);
    std::thread drain([&] {
        try {
            (void)t0.recv();
        } catch (...) {
        }
    });
    CHECK_THROWS_AS((void)t1.exchange(MsgTag::Open, std::vector<u8>{1}),
                    ProtocolError);
    t1.close();
    drain.join();
}

TEST_CASE("exchange after peer closed raises a connection error") {
    auto [t0, t1] = inproc_pair();
    t0.close();
    CHECK_THROWS_AS((void)t1.exchange(MsgTag::Open, std::vector<u8>{1}),
                    ConnectionError);
}

TEST_CASE("recv on closed channel raises a connection error") {
    auto [t0, t1] = inproc_pair();
    t1.close();
    CHECK_THROWS_AS((void)t0.recv(), ConnectionError);
}

namespace {

// Same deterministic script over any transport pair; returns both
// transcript digests.
std::pair<std::string, std::string> run_script(Transport& a, Transport& b) {
    std::thread peer([&] {
        for (u32 i = 0; i < 1000; i++) {
            std::vector<u8> body;
            put_u64(body, 1000 + i);
            (void)b.exchange(MsgTag::Open, body);
        }
    });
    for (u32 i = 0; i < 1000; i++) {
        std::vector<u8> body;
        put_u64(body, i);
        (void)a.exchange(MsgTag::Open, body);
    }
    peer.join();
    return {hex(a.transcript_digest()), hex(b.transcript_digest())};
}

} // namespace

TEST_CASE("in-process and socket backends are byte-identical") {
    auto [t0, t1] = inproc_pair();
    const auto inproc = run_script(t0, t1);

    const u16 port = static_cast<u16>(20000 + (getpid() % 10000));
    std::unique_ptr<SocketChannel> server;
    std::thread listener([&] { server = SocketChannel::listen_accept(port); });
    auto client = SocketChannel::connect_to("127.0.0.1", port);
    listener.join();
    Transport s0(std::move(server), true);
    Transport s1(std::move(client), false);
    const auto socket = run_script(s0, s1);

    CHECK(inproc.first == socket.first);
    CHECK(inproc.second == socket.second);
    CHECK(s0.stats().bytes_sent == t0.stats().bytes_sent);
    CHECK(s0.stats().rounds == t0.stats().rounds);
}

TEST_CASE("stat deltas accumulate per phase") {
    auto [t0, t1] = inproc_pair();
    CommStats stats;
    t0.send(MsgTag::Tensor, std::vector<u8>(5));
    stats.attribute("io", t0.take_delta());
    t0.send(MsgTag::Tensor, std::vector<u8>(11));
    stats.attribute("router", t0.take_delta());
    CHECK(stats.phases["io"].bytes_sent == 14);
    CHECK(stats.phases["router"].bytes_sent == 20);
    CHECK(stats.phase_sum() == stats.total);
    CHECK(stats.total.bytes_sent == t0.stats().bytes_sent);
    // drain
    (void)t1.recv();
    (void)t1.recv();
}

TEST_CASE("no traffic between snapshots gives a zero delta") {
    auto [t0, t1] = inproc_pair();
    (void)t0.take_delta();
    const StatCounters d = t0.take_delta();
    CHECK(d.bytes_sent == 0);
    CHECK(d.bytes_received == 0);
    CHECK(d.rounds == 0);
    (void)t1;
}
