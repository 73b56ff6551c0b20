// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/fixtures.hpp"

#include <atomic>
#include <list>
#include <mutex>
#include <thread>

#include "fixture_dns.hpp"
#include "net.hpp"
#include "semfuzz/errors.hpp"

namespace semfuzz {

namespace {

constexpr int kPollSliceMs = 50;

struct BugName {
    BugId id;
    std::string_view name;
    Protocol protocol;
};

constexpr BugName kBugs[] = {
    {BugId::PskNotLastAccepted, "psk-not-last-accepted", Protocol::Tls13},
    {BugId::ClWhitespaceAccepted, "cl-whitespace-accepted", Protocol::Http1},
    {BugId::DnsExtraRecordCached, "dns-extra-record-cached", Protocol::Dns},
    {BugId::AcceptEncodingCrashSim, "accept-encoding-crash-sim", Protocol::Http1},
};

// Connection or query threads, joined when finished or at shutdown.
class WorkerSet {
public:
    template <class Fn>
    void spawn(Fn fn) {
        std::lock_guard lock(mu_);
        reap_locked();
        auto done = std::make_shared<std::atomic<bool>>(false);
        threads_.push_back({std::thread([fn = std::move(fn), done]() mutable {
                                fn();
                                *done = true;
                            }),
                            done});
    }

    void join_all() {
        std::list<Entry> all;
        {
            std::lock_guard lock(mu_);
            all.swap(threads_);
        }
        for (auto& e : all) e.thread.join();
    }

private:
    struct Entry {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };

    void reap_locked() {
        for (auto it = threads_.begin(); it != threads_.end();) {
            if (*it->done) {
                it->thread.join();
                it = threads_.erase(it);
            } else {
                ++it;
            }
        }
    }

    std::mutex mu_;
    std::list<Entry> threads_;
};

class TcpFixture final : public Fixture {
public:
    explicit TcpFixture(const FixtureConfig& cfg) : cfg_(cfg) {
        listener_ = detail::tcp_listen(cfg.host, cfg.port);
        port_ = detail::local_port(listener_.get());
        acceptor_ = std::thread([this] { accept_loop(); });
    }
    ~TcpFixture() override { shutdown(); }

    std::uint16_t port() const noexcept override { return port_; }
    bool crashed() const noexcept override { return crashed_; }
    const FixtureConfig& config() const noexcept override { return cfg_; }

    void shutdown() override {
        std::lock_guard once(shutdown_mu_);
        if (stopped_.exchange(true)) return;
        if (acceptor_.joinable()) acceptor_.join();
        workers_.join_all();
        listener_.reset();
    }

private:
    void accept_loop() {
        while (!stopped_) {
            if (crashed_) {
                // A crashed server no longer listens.
                listener_.reset();
                return;
            }
            if (!detail::wait_readable(listener_.get(), kPollSliceMs)) continue;
            int c = ::accept4(listener_.get(), nullptr, nullptr, SOCK_CLOEXEC);
            if (c < 0) continue;
            workers_.spawn([this, c] {
                detail::Fd fd(c);
                serve_connection(fd);
            });
        }
    }

    FixtureStep step(std::string_view buf, bool eof) const {
        return cfg_.protocol == Protocol::Tls13 ? tls_fixture_step(buf, eof, cfg_.bugs)
                                                : http_fixture_step(buf, eof, cfg_.bugs);
    }

    void serve_connection(detail::Fd& fd) {
        std::string buf;
        auto idle_deadline = detail::Clock::now() + std::chrono::milliseconds(cfg_.read_timeout_ms);
        for (;;) {
            if (stopped_ || crashed_) return;
            bool eof = false;
            if (detail::wait_readable(fd.get(), kPollSliceMs)) {
                char tmp[4096];
                ssize_t n = ::recv(fd.get(), tmp, sizeof tmp, 0);
                if (n < 0) return;
                if (n == 0) eof = true;
                else buf.append(tmp, static_cast<std::size_t>(n));
            } else if (detail::Clock::now() >= idle_deadline) {
                return;
            } else {
                continue;
            }
            auto s = step(buf, eof);
            switch (s.kind) {
                case FixtureStep::Kind::NeedMore: continue;
                case FixtureStep::Kind::Close: return;
                case FixtureStep::Kind::Crash:
                    crashed_ = true;
                    detail::abort_connection(fd);
                    return;
                case FixtureStep::Kind::Reply: {
                    auto* p = reinterpret_cast<const std::uint8_t*>(s.reply.data());
                    detail::send_all(fd.get(), {p, s.reply.size()},
                                     detail::Clock::now() + std::chrono::milliseconds(cfg_.read_timeout_ms));
                    ::shutdown(fd.get(), SHUT_WR);
                    // Drain briefly so the close does not turn into a reset.
                    std::string ignored;
                    detail::recv_some(fd.get(), ignored, detail::Clock::now() + std::chrono::milliseconds(100));
                    return;
                }
            }
        }
    }

    FixtureConfig cfg_;
    detail::Fd listener_;
    std::uint16_t port_ = 0;
    std::thread acceptor_;
    std::mutex shutdown_mu_;
    WorkerSet workers_;
    std::atomic<bool> stopped_{false};
    std::atomic<bool> crashed_{false};
};

class DnsFixture final : public Fixture {
public:
    explicit DnsFixture(const FixtureConfig& cfg)
        : cfg_(cfg), core_(cfg.bugs.count(BugId::DnsExtraRecordCached) > 0) {
        if (!cfg.upstream_host.empty()) upstream_ = detail::resolve(cfg.upstream_host, cfg.upstream_port);
        sock_ = detail::udp_bind(cfg.host, cfg.port);
        port_ = detail::local_port(sock_.get());
        loop_ = std::thread([this] { serve_loop(); });
    }
    ~DnsFixture() override { shutdown(); }

    std::uint16_t port() const noexcept override { return port_; }
    bool crashed() const noexcept override { return false; }
    const FixtureConfig& config() const noexcept override { return cfg_; }

    void shutdown() override {
        std::lock_guard once(shutdown_mu_);
        if (stopped_.exchange(true)) return;
        if (loop_.joinable()) loop_.join();
        workers_.join_all();
        sock_.reset();
    }

private:
    bool resolver() const { return upstream_.has_value(); }

    void serve_loop() {
        std::vector<std::uint8_t> buf(65535);
        while (!stopped_) {
            if (!detail::wait_readable(sock_.get(), kPollSliceMs)) continue;
            detail::SockAddr from;
            from.len = sizeof from.storage;
            ssize_t n = ::recvfrom(sock_.get(), buf.data(), buf.size(), 0, from.get(), &from.len);
            if (n < 0) continue;
            std::vector<std::uint8_t> query(buf.begin(), buf.begin() + n);
            if (!resolver()) {
                if (auto reply = dns_authoritative_reply(query)) send_to(from, *reply);
                continue;
            }
            // Forwarding blocks on the upstream, so each query gets its own thread.
            workers_.spawn([this, from, query = std::move(query)] {
                auto reply = core_.handle(query, [this](const auto& fq, const auto& accept) {
                    return forward(fq, accept);
                });
                if (reply) send_to(from, *reply);
            });
        }
    }

    void send_to(const detail::SockAddr& to, const std::vector<std::uint8_t>& data) {
        ::sendto(sock_.get(), data.data(), data.size(), 0, to.get(), to.len);
    }

    std::optional<std::vector<std::uint8_t>> forward(const std::vector<std::uint8_t>& query,
                                                     const std::function<bool(const detail::DnsMsg&)>& accept) {
        auto s = detail::udp_socket_for(*upstream_);
        if (::sendto(s.get(), query.data(), query.size(), 0, upstream_->get(), upstream_->len) < 0)
            return std::nullopt;
        auto deadline = detail::Clock::now() + std::chrono::milliseconds(cfg_.upstream_timeout_ms);
        std::vector<std::uint8_t> buf(65535);
        while (!stopped_) {
            int wait = std::min(detail::remaining_ms(deadline), kPollSliceMs);
            if (wait <= 0) return std::nullopt;
            if (!detail::wait_readable(s.get(), wait)) continue;
            detail::SockAddr from;
            from.len = sizeof from.storage;
            ssize_t n = ::recvfrom(s.get(), buf.data(), buf.size(), 0, from.get(), &from.len);
            if (n < 0 || !from.same_endpoint(*upstream_)) continue;
            std::vector<std::uint8_t> resp(buf.begin(), buf.begin() + n);
            detail::DnsMsg m;
            if (!detail::dns_parse(resp, m)) {
                // Only a response to our question may end the wait.
                if (n >= 2 && resp[0] == query[0] && resp[1] == query[1]) return resp;
                continue;
            }
            if (accept(m)) return resp;
        }
        return std::nullopt;
    }

    FixtureConfig cfg_;
    detail::DnsResolverCore core_;
    std::optional<detail::SockAddr> upstream_;
    detail::Fd sock_;
    std::uint16_t port_ = 0;
    std::thread loop_;
    std::mutex shutdown_mu_;
    WorkerSet workers_;
    std::atomic<bool> stopped_{false};
};

}  // namespace

std::string_view to_string(BugId b) noexcept {
    for (const auto& n : kBugs)
        if (n.id == b) return n.name;
    return "?";
}

BugId bug_from_string(std::string_view s) {
    for (const auto& n : kBugs)
        if (n.name == s) return n.id;
    throw ConfigError("unknown bug '" + std::string(s) + "'");
}

std::vector<BugId> all_bugs() {
    std::vector<BugId> out;
    for (const auto& n : kBugs) out.push_back(n.id);
    return out;
}

Protocol bug_protocol(BugId b) noexcept {
    for (const auto& n : kBugs)
        if (n.id == b) return n.protocol;
    return Protocol::Dns;
}

std::unique_ptr<Fixture> serve(const FixtureConfig& cfg) {
    for (auto b : cfg.bugs)
        if (bug_protocol(b) != cfg.protocol)
            throw ConfigError(std::string(to_string(b)) + " is not a " + std::string(to_string(cfg.protocol)) +
                              " bug");
    switch (cfg.protocol) {
        case Protocol::Dns: return std::make_unique<DnsFixture>(cfg);
        case Protocol::Http1:
        case Protocol::Tls13: return std::make_unique<TcpFixture>(cfg);
        default: throw ConfigError("no fixture for " + std::string(to_string(cfg.protocol)));
    }
}

}  // namespace semfuzz
