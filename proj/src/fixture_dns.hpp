// SPDX-License-Identifier: Apache-2.0
//
// DNS message handling for the reference fixtures, independent of the codec.
// Names are kept in uncompressed wire form (length-prefixed labels).
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semfuzz::detail {

struct DnsRr {
    std::string owner;
    std::uint16_t type = 0;
    std::uint16_t cls = 1;
    std::uint32_t ttl = 0;
    /// Names inside CNAME/NS/PTR/MX/SOA data are expanded.
    std::string rdata;
};

struct DnsQuestion {
    std::string name;
    std::uint16_t type = 0;
    std::uint16_t cls = 1;
};

struct DnsMsg {
    std::uint16_t id = 0;
    std::uint16_t flags = 0;
    std::vector<DnsQuestion> qd;
    std::vector<DnsRr> an, ns, ar;

    bool qr() const { return flags & 0x8000; }
    int opcode() const { return (flags >> 11) & 0xf; }
    int rcode() const { return flags & 0xf; }
};

/// Strict: every section must parse and the datagram must be consumed exactly.
bool dns_parse(std::span<const std::uint8_t> wire, DnsMsg& out);
std::vector<std::uint8_t> dns_build(const DnsMsg& m);

std::string dns_name_wire(std::string_view dotted);
std::string dns_name_lower(std::string_view wire);

/// Checks shared by both fixture roles. Returns a reply for queries that must
/// be refused outright, nullopt with `drop` set for datagrams to ignore.
std::optional<std::vector<std::uint8_t>> dns_screen_query(std::span<const std::uint8_t> wire, DnsMsg& query,
                                                          bool& drop, bool recursion_available);

DnsMsg dns_reply_skeleton(const DnsMsg& query, int rcode, bool authoritative, bool recursion_available);

class DnsResolverCore {
public:
    /// Sends the forwarded query and returns the first response the predicate
    /// accepts, or nullopt at the deadline.
    using Forward = std::function<std::optional<std::vector<std::uint8_t>>(
        const std::vector<std::uint8_t>& query, const std::function<bool(const DnsMsg&)>& accept)>;

    explicit DnsResolverCore(bool cache_all_answers) : cache_all_(cache_all_answers) {}

    std::optional<std::vector<std::uint8_t>> handle(std::span<const std::uint8_t> wire, const Forward& forward);
    void flush();
    std::size_t cached_records() const;

private:
    using Key = std::pair<std::string, std::uint16_t>;
    bool cache_all_;
    mutable std::mutex mu_;
    std::map<Key, std::vector<DnsRr>> cache_;
    std::atomic<std::uint16_t> next_id_{0x1000};
};

}  // namespace semfuzz::detail
