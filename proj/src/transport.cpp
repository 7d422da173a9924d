#include "mpcroute/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <thread>

#include "mpcroute/errors.hpp"

namespace mpcroute {

bool known_tag(u8 t) {
    switch (static_cast<MsgTag>(t)) {
    case MsgTag::Hello:
    case MsgTag::Open:
    case MsgTag::Bits:
    case MsgTag::Tensor:
    case MsgTag::Result:
    case MsgTag::IndexOpen:
        return true;
    }
    return false;
}

// ---- InProcChannel ----

std::pair<std::unique_ptr<InProcChannel>, std::unique_ptr<InProcChannel>>
InProcChannel::make_pair() {
    auto a2b = std::make_shared<Pipe>();
    auto b2a = std::make_shared<Pipe>();
    auto a = std::make_unique<InProcChannel>(b2a, a2b);
    auto b = std::make_unique<InProcChannel>(a2b, b2a);
    return {std::move(a), std::move(b)};
}

void InProcChannel::send_bytes(const void* data, std::size_t n) {
    const u8* p = static_cast<const u8*>(data);
    {
        std::lock_guard<std::mutex> lk(out_->m);
        if (out_->closed) throw ConnectionError("send on closed channel");
        out_->buf.insert(out_->buf.end(), p, p + n);
    }
    out_->cv.notify_all();
}

void InProcChannel::recv_bytes(void* data, std::size_t n) {
    u8* p = static_cast<u8*>(data);
    std::unique_lock<std::mutex> lk(in_->m);
    in_->cv.wait(lk, [&] { return in_->buf.size() >= n || in_->closed; });
    if (in_->buf.size() < n) throw ConnectionError("peer closed channel");
    for (std::size_t i = 0; i < n; i++) {
        p[i] = in_->buf.front();
        in_->buf.pop_front();
    }
}

void InProcChannel::close() {
    for (auto& pipe : {in_, out_}) {
        if (!pipe) continue;
        {
            std::lock_guard<std::mutex> lk(pipe->m);
            pipe->closed = true;
        }
        pipe->cv.notify_all();
    }
}

// ---- SocketChannel ----

std::unique_ptr<SocketChannel> SocketChannel::listen_accept(u16 port) {
    int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd < 0) throw ConnectionError("socket() failed");
    int one = 1;
    ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        ::close(lfd);
        throw ConnectionError("bind() failed on port " + std::to_string(port));
    }
    if (::listen(lfd, 1) < 0) {
        ::close(lfd);
        throw ConnectionError("listen() failed");
    }
    int fd = ::accept(lfd, nullptr, nullptr);
    ::close(lfd);
    if (fd < 0) throw ConnectionError("accept() failed");
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_unique<SocketChannel>(fd);
}

std::unique_ptr<SocketChannel> SocketChannel::connect_to(const std::string& host,
                                                         u16 port, int retries) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
        throw ConnectionError("cannot resolve " + host);
    for (int attempt = 0;; attempt++) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) {
            ::freeaddrinfo(res);
            throw ConnectionError("socket() failed");
        }
        if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
            ::freeaddrinfo(res);
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
            return std::make_unique<SocketChannel>(fd);
        }
        ::close(fd);
        if (attempt >= retries) {
            ::freeaddrinfo(res);
            throw ConnectionError("connect to " + host + ":" + std::to_string(port) +
                                  " failed");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
}

void SocketChannel::send_bytes(const void* data, std::size_t n) {
    const u8* p = static_cast<const u8*>(data);
    while (n > 0) {
        ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
        if (w <= 0) throw ConnectionError("socket send failed");
        p += w;
        n -= static_cast<std::size_t>(w);
    }
}

void SocketChannel::recv_bytes(void* data, std::size_t n) {
    u8* p = static_cast<u8*>(data);
    while (n > 0) {
        ssize_t r = ::recv(fd_, p, n, 0);
        if (r == 0) throw ConnectionError("peer closed socket");
        if (r < 0) throw ConnectionError("socket recv failed");
        p += r;
        n -= static_cast<std::size_t>(r);
    }
}

void SocketChannel::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

// ---- Sha256 ----

Sha256::Sha256() {
    EVP_MD_CTX* c = EVP_MD_CTX_new();
    if (!c || EVP_DigestInit_ex(c, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 init failed");
    ctx_ = c;
}

Sha256::~Sha256() {
    if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256::update(const void* data, std::size_t n) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, n);
}

std::array<u8, 32> Sha256::finish() const {
    EVP_MD_CTX* copy = EVP_MD_CTX_new();
    if (!copy || EVP_MD_CTX_copy_ex(copy, static_cast<EVP_MD_CTX*>(ctx_)) != 1)
        throw std::runtime_error("sha256 copy failed");
    std::array<u8, 32> out{};
    unsigned len = 0;
    EVP_DigestFinal_ex(copy, out.data(), &len);
    EVP_MD_CTX_free(copy);
    return out;
}

std::array<u8, 32> Sha256::digest(std::span<const u8> data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.finish();
}

std::string hex(std::span<const u8> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (u8 b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

// ---- Transport ----

namespace {
constexpr std::size_t kMaxFrame = 1ULL << 30;
}

void Transport::write_frame(MsgTag tag, std::span<const u8> head,
                            std::span<const u8> body) {
    std::vector<u8> frame;
    frame.reserve(9 + head.size() + body.size());
    frame.push_back(static_cast<u8>(tag));
    put_u64(frame, head.size() + body.size());
    frame.insert(frame.end(), head.begin(), head.end());
    frame.insert(frame.end(), body.begin(), body.end());
    ch_->send_bytes(frame.data(), frame.size());
    transcript_.update(frame.data(), frame.size());
    stats_.bytes_sent += frame.size();
}

void Transport::send(MsgTag tag, std::span<const u8> payload) {
    write_frame(tag, {}, payload);
}

Message Transport::recv() {
    u8 header[9];
    ch_->recv_bytes(header, sizeof(header));
    transcript_.update(header, sizeof(header));
    Message msg;
    msg.tag = header[0];
    if (!known_tag(msg.tag))
        throw ProtocolError("unknown message tag " + std::to_string(msg.tag));
    const u64 len = get_u64(header + 1);
    if (len > kMaxFrame) throw ProtocolError("oversized frame");
    msg.payload.resize(len);
    if (len > 0) {
        ch_->recv_bytes(msg.payload.data(), len);
        transcript_.update(msg.payload.data(), len);
    }
    stats_.bytes_received += 9 + len;
    return msg;
}

Message Transport::recv_expect(MsgTag tag) {
    Message m = recv();
    if (m.tag != static_cast<u8>(tag))
        throw ProtocolError("expected tag " + std::to_string(static_cast<u8>(tag)) +
                            ", got " + std::to_string(m.tag));
    return m;
}

std::vector<u8> Transport::exchange(MsgTag tag, std::span<const u8> body) {
    std::vector<u8> head;
    put_u32(head, send_step_);
    send_step_++;

    Message peer;
    if (lead_) {
        write_frame(tag, head, body);
        peer = recv_expect(tag);
    } else {
        peer = recv_expect(tag);
        write_frame(tag, head, body);
    }
    if (peer.payload.size() < 4) throw ProtocolError("exchange frame missing step number");
    const u32 peer_step = get_u32(peer.payload.data());
    if (peer_step != recv_step_)
        throw ProtocolError("protocol desync: expected step " +
                            std::to_string(recv_step_) + ", peer sent " +
                            std::to_string(peer_step));
    recv_step_++;
    stats_.rounds += 1;
    return {peer.payload.begin() + 4, peer.payload.end()};
}

} // namespace mpcroute
