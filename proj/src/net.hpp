// SPDX-License-Identifier: Apache-2.0
//
// Thin POSIX socket helpers shared by the campaign runner and the fixtures.
#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <sys/socket.h>

namespace semfuzz::detail {

using Clock = std::chrono::steady_clock;

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd_(o.release()) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) reset(o.release());
        return *this;
    }
    ~Fd() { reset(); }

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    int release() noexcept {
        int f = fd_;
        fd_ = -1;
        return f;
    }
    void reset(int fd = -1) noexcept;

private:
    int fd_ = -1;
};

struct SockAddr {
    sockaddr_storage storage{};
    socklen_t len = 0;

    const sockaddr* get() const noexcept { return reinterpret_cast<const sockaddr*>(&storage); }
    sockaddr* get() noexcept { return reinterpret_cast<sockaddr*>(&storage); }
    std::uint16_t port() const noexcept;
    bool same_endpoint(const SockAddr& o) const noexcept;
};

/// Numeric hosts or names resolvable through getaddrinfo. Throws IoError.
SockAddr resolve(const std::string& host, std::uint16_t port);

/// Throw PortInUse when the address is taken, IoError otherwise.
Fd tcp_listen(const std::string& host, std::uint16_t port, int backlog = 64);
Fd udp_bind(const std::string& host, std::uint16_t port);
Fd udp_socket_for(const SockAddr& peer);

std::uint16_t local_port(int fd);

enum class IoStatus { Ok, Timeout, Refused, Reset, Closed, Failed };

int remaining_ms(Clock::time_point deadline);

/// Non-blocking connect bounded by the deadline.
IoStatus tcp_connect(const SockAddr& to, Clock::time_point deadline, Fd& out);
IoStatus send_all(int fd, std::span<const std::uint8_t> data, Clock::time_point deadline);

/// Waits for readability until the deadline, then reads once into `out`
/// (appending). Ok means at least one byte arrived.
IoStatus recv_some(int fd, std::string& out, Clock::time_point deadline);

bool wait_readable(int fd, int timeout_ms);

/// Closing with SO_LINGER 0 makes the peer see a reset.
void abort_connection(Fd& fd);

}  // namespace semfuzz::detail
