// SPDX-License-Identifier: Apache-2.0
#include "net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <unistd.h>

#include "semfuzz/errors.hpp"

namespace semfuzz::detail {

void Fd::reset(int fd) noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = fd;
}

std::uint16_t SockAddr::port() const noexcept {
    if (storage.ss_family == AF_INET) return ntohs(reinterpret_cast<const sockaddr_in*>(&storage)->sin_port);
    if (storage.ss_family == AF_INET6) return ntohs(reinterpret_cast<const sockaddr_in6*>(&storage)->sin6_port);
    return 0;
}

bool SockAddr::same_endpoint(const SockAddr& o) const noexcept {
    if (storage.ss_family != o.storage.ss_family || port() != o.port()) return false;
    if (storage.ss_family == AF_INET)
        return reinterpret_cast<const sockaddr_in*>(&storage)->sin_addr.s_addr ==
               reinterpret_cast<const sockaddr_in*>(&o.storage)->sin_addr.s_addr;
    if (storage.ss_family == AF_INET6)
        return std::memcmp(&reinterpret_cast<const sockaddr_in6*>(&storage)->sin6_addr,
                           &reinterpret_cast<const sockaddr_in6*>(&o.storage)->sin6_addr, 16) == 0;
    return false;
}

SockAddr resolve(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_flags = AI_NUMERICSERV;
    addrinfo* res = nullptr;
    auto service = std::to_string(port);
    int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
    if (rc != 0 || !res) throw IoError("cannot resolve '" + host + "': " + ::gai_strerror(rc));
    // Prefer IPv4 so "localhost" matches fixtures bound to 127.0.0.1.
    addrinfo* pick = res;
    for (auto* p = res; p; p = p->ai_next)
        if (p->ai_family == AF_INET) {
            pick = p;
            break;
        }
    SockAddr a;
    std::memcpy(&a.storage, pick->ai_addr, pick->ai_addrlen);
    a.len = static_cast<socklen_t>(pick->ai_addrlen);
    ::freeaddrinfo(res);
    return a;
}

namespace {

Fd bound_socket(const std::string& host, std::uint16_t port, int type) {
    auto addr = resolve(host, port);
    Fd fd(::socket(addr.storage.ss_family, type | SOCK_CLOEXEC, 0));
    if (!fd) throw IoError(std::string("socket: ") + std::strerror(errno));
    if (type == SOCK_STREAM) {
        int one = 1;
        ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    }
    if (::bind(fd.get(), addr.get(), addr.len) != 0) {
        int e = errno;
        auto where = host + ":" + std::to_string(port);
        if (e == EADDRINUSE) throw PortInUse(where + " is already in use");
        throw IoError("bind " + where + ": " + std::strerror(e));
    }
    return fd;
}

void set_nonblocking(int fd, bool on) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK));
}

IoStatus from_errno(int e) {
    switch (e) {
        case ECONNREFUSED: return IoStatus::Refused;
        case ECONNRESET:
        case EPIPE: return IoStatus::Reset;
        case ETIMEDOUT: return IoStatus::Timeout;
        default: return IoStatus::Failed;
    }
}

}  // namespace

Fd tcp_listen(const std::string& host, std::uint16_t port, int backlog) {
    auto fd = bound_socket(host, port, SOCK_STREAM);
    if (::listen(fd.get(), backlog) != 0) {
        int e = errno;
        if (e == EADDRINUSE) throw PortInUse(host + ":" + std::to_string(port) + " is already in use");
        throw IoError(std::string("listen: ") + std::strerror(e));
    }
    return fd;
}

Fd udp_bind(const std::string& host, std::uint16_t port) { return bound_socket(host, port, SOCK_DGRAM); }

Fd udp_socket_for(const SockAddr& peer) {
    Fd fd(::socket(peer.storage.ss_family, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (!fd) throw IoError(std::string("socket: ") + std::strerror(errno));
    return fd;
}

std::uint16_t local_port(int fd) {
    SockAddr a;
    a.len = sizeof a.storage;
    if (::getsockname(fd, a.get(), &a.len) != 0) return 0;
    return a.port();
}

int remaining_ms(Clock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

IoStatus tcp_connect(const SockAddr& to, Clock::time_point deadline, Fd& out) {
    Fd fd(::socket(to.storage.ss_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!fd) return IoStatus::Failed;
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_KEEPALIVE, &one, sizeof one);
    set_nonblocking(fd.get(), true);
    if (::connect(fd.get(), to.get(), to.len) != 0) {
        if (errno != EINPROGRESS) return from_errno(errno);
        pollfd p{fd.get(), POLLOUT, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc == 0) return IoStatus::Timeout;
        if (rc < 0) return IoStatus::Failed;
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) return from_errno(err);
    }
    set_nonblocking(fd.get(), false);
    out = std::move(fd);
    return IoStatus::Ok;
}

IoStatus send_all(int fd, std::span<const std::uint8_t> data, Clock::time_point deadline) {
    std::size_t off = 0;
    while (off < data.size()) {
        pollfd p{fd, POLLOUT, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc == 0) return IoStatus::Timeout;
        if (rc < 0) return IoStatus::Failed;
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            return from_errno(errno);
        }
        off += static_cast<std::size_t>(n);
    }
    return IoStatus::Ok;
}

IoStatus recv_some(int fd, std::string& out, Clock::time_point deadline) {
    for (;;) {
        pollfd p{fd, POLLIN, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc == 0) return IoStatus::Timeout;
        if (rc < 0) {
            if (errno == EINTR) continue;
            return IoStatus::Failed;
        }
        char buf[8192];
        ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            return from_errno(errno);
        }
        if (n == 0) return IoStatus::Closed;
        out.append(buf, static_cast<std::size_t>(n));
        return IoStatus::Ok;
    }
}

bool wait_readable(int fd, int timeout_ms) {
    pollfd p{fd, POLLIN, 0};
    return ::poll(&p, 1, timeout_ms) > 0;
}

void abort_connection(Fd& fd) {
    if (!fd) return;
    linger l{1, 0};
    ::setsockopt(fd.get(), SOL_SOCKET, SO_LINGER, &l, sizeof l);
    fd.reset();
}

}  // namespace semfuzz::detail
