// SPDX-License-Identifier: Apache-2.0
#include "fixture_dns.hpp"

#include <set>

#include "semfuzz/fixtures.hpp"

namespace semfuzz::detail {

namespace {

using Wire = std::vector<std::uint8_t>;

constexpr std::uint16_t kA = 1, kNs = 2, kCname = 5, kSoa = 6, kPtr = 12, kMx = 15, kTxt = 16,
                        kAaaa = 28, kOpt = 41, kIxfr = 251, kAxfr = 252, kAny = 255;
constexpr int kFormErr = 1, kServFail = 2, kNxDomain = 3, kNotImp = 4, kRefused = 5;

struct Cursor {
    std::span<const std::uint8_t> d;
    std::size_t pos = 0;
    bool ok = true;

    std::uint32_t uint(int n) {
        if (d.size() - pos < static_cast<std::size_t>(n)) {
            ok = false;
            pos = d.size();
            return 0;
        }
        std::uint32_t v = 0;
        for (int i = 0; i < n; ++i) v = (v << 8) | d[pos++];
        return v;
    }

    // Follows compression pointers, which must point strictly backwards.
    std::string name() {
        std::string out;
        std::size_t p = pos;
        bool jumped = false;
        std::size_t limit = pos;
        for (int hops = 0; hops < 128; ++hops) {
            if (p >= d.size()) break;
            std::uint8_t len = d[p];
            if ((len & 0xc0) == 0xc0) {
                if (p + 1 >= d.size()) break;
                std::size_t target = ((len & 0x3f) << 8) | d[p + 1];
                if (!jumped) pos = p + 2;
                if (target >= limit) break;
                jumped = true;
                limit = target;
                p = target;
                continue;
            }
            if (len & 0xc0) break;
            if (len == 0) {
                out.push_back('\0');
                if (!jumped) pos = p + 1;
                if (out.size() > 255) break;
                return out;
            }
            if (p + 1 + len > d.size()) break;
            out.append(reinterpret_cast<const char*>(d.data() + p), len + 1);
            p += len + 1;
        }
        ok = false;
        pos = d.size();
        return {};
    }
};

bool parse_rr(Cursor& c, DnsRr& rr) {
    rr.owner = c.name();
    rr.type = static_cast<std::uint16_t>(c.uint(2));
    rr.cls = static_cast<std::uint16_t>(c.uint(2));
    rr.ttl = c.uint(4);
    auto rdlen = c.uint(2);
    if (!c.ok || c.d.size() - c.pos < rdlen) return false;
    auto end = c.pos + rdlen;
    Cursor body{c.d, c.pos};
    switch (rr.type) {
        case kCname:
        case kNs:
        case kPtr: rr.rdata = body.name(); break;
        case kMx: {
            auto pref = body.uint(2);
            rr.rdata = {static_cast<char>(pref >> 8), static_cast<char>(pref & 0xff)};
            rr.rdata += body.name();
            break;
        }
        case kSoa: {
            rr.rdata = body.name();
            rr.rdata += body.name();
            if (body.ok && end - body.pos == 20)
                rr.rdata.append(reinterpret_cast<const char*>(c.d.data() + body.pos), 20);
            body.pos += 20;
            break;
        }
        default:
            rr.rdata.assign(reinterpret_cast<const char*>(c.d.data() + c.pos), rdlen);
            body.pos = end;
    }
    if (!body.ok || body.pos != end) return false;
    c.pos = end;
    return true;
}

void put16(Wire& w, std::uint32_t v) {
    w.push_back(static_cast<std::uint8_t>(v >> 8));
    w.push_back(static_cast<std::uint8_t>(v));
}

void put_bytes(Wire& w, std::string_view s) { w.insert(w.end(), s.begin(), s.end()); }

void put_rr(Wire& w, const DnsRr& rr) {
    put_bytes(w, rr.owner);
    put16(w, rr.type);
    put16(w, rr.cls);
    put16(w, rr.ttl >> 16);
    put16(w, rr.ttl & 0xffff);
    put16(w, rr.rdata.size());
    put_bytes(w, rr.rdata);
}

DnsRr rr(std::string_view owner, std::uint16_t type, std::uint32_t ttl, std::string rdata) {
    return {dns_name_wire(owner), type, 1, ttl, std::move(rdata)};
}

std::string raw(std::initializer_list<int> bytes) {
    std::string s;
    for (int b : bytes) s.push_back(static_cast<char>(b));
    return s;
}

std::string mx(int pref, std::string_view host) {
    return raw({pref >> 8, pref & 0xff}) + dns_name_wire(host);
}

std::string txt(std::string_view s) { return static_cast<char>(s.size()) + std::string(s); }

std::string soa(std::string_view mname, std::string_view rname) {
    return dns_name_wire(mname) + dns_name_wire(rname) +
           raw({0x78, 0xa3, 0xf1, 0x75,    // serial 2024010101
                0, 0, 0x1c, 0x20,          // refresh 7200
                0, 0, 0x0e, 0x10,          // retry 3600
                0, 0x12, 0x75, 0,          // expire 1209600
                0, 0, 0x01, 0x2c});        // minimum 300
}

struct Zone {
    std::string apex;
    std::vector<DnsRr> records;
};

const std::vector<Zone>& zones() {
    static const std::vector<Zone> z = [] {
        std::vector<Zone> out;
        out.push_back({dns_name_wire("example.com"),
                       {rr("example.com", kSoa, 900, soa("ns1.example.com", "hostmaster.example.com")),
                        rr("example.com", kNs, 86400, dns_name_wire("a.iana-servers.net")),
                        rr("example.com", kNs, 86400, dns_name_wire("b.iana-servers.net")),
                        rr("www.example.com", kA, 300, raw({93, 184, 216, 34})),
                        rr("ipv6.example.com", kAaaa, 120,
                           raw({0x20, 0x01, 0x0d, 0xb8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1})),
                        rr("shop.example.com", kCname, 60, dns_name_wire("cdn.example.net"))}});
        out.push_back({dns_name_wire("example.net"),
                       {rr("example.net", kSoa, 900, soa("ns1.example.net", "hostmaster.example.net")),
                        rr("cdn.example.net", kA, 60, raw({198, 51, 100, 7})),
                        rr("cdn.example.net", kA, 60, raw({198, 51, 100, 8})),
                        rr("_dmarc.example.net", kTxt, 3600, txt("v=DMARC1; p=none"))}});
        out.push_back({dns_name_wire("example.org"),
                       {rr("example.org", kSoa, 900, soa("ns1.example.org", "hostmaster.example.org")),
                        rr("example.org", kMx, 3600, mx(10, "mail.example.org")),
                        rr("example.org", kMx, 3600, mx(20, "backup.example.org")),
                        rr("mail.example.org", kA, 3600, raw({192, 0, 2, 25}))}});
        return out;
    }();
    return z;
}

bool is_under(const std::string& name, const std::string& apex) {
    return name.size() >= apex.size() && name.compare(name.size() - apex.size(), apex.size(), apex) == 0 &&
           (name.size() == apex.size() ||
            // the suffix must start at a label boundary
            [&] {
                std::size_t p = 0;
                while (p < name.size() - apex.size()) p += static_cast<std::uint8_t>(name[p]) + 1;
                return p == name.size() - apex.size();
            }());
}

const Zone* zone_for(const std::string& lname) {
    const Zone* best = nullptr;
    for (const auto& z : zones())
        if (is_under(lname, z.apex) && (!best || z.apex.size() > best->apex.size())) best = &z;
    return best;
}

}  // namespace

std::string dns_name_wire(std::string_view dotted) {
    std::string out;
    while (!dotted.empty()) {
        auto dot = dotted.find('.');
        auto label = dotted.substr(0, dot);
        out.push_back(static_cast<char>(label.size()));
        out += label;
        if (dot == std::string_view::npos) break;
        dotted.remove_prefix(dot + 1);
    }
    out.push_back('\0');
    return out;
}

std::string dns_name_lower(std::string_view wire) {
    std::string out(wire);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

bool dns_parse(std::span<const std::uint8_t> wire, DnsMsg& out) {
    Cursor c{wire};
    out = {};
    out.id = static_cast<std::uint16_t>(c.uint(2));
    out.flags = static_cast<std::uint16_t>(c.uint(2));
    auto qd = c.uint(2), an = c.uint(2), ns = c.uint(2), ar = c.uint(2);
    if (!c.ok) return false;
    for (std::uint32_t i = 0; i < qd; ++i) {
        DnsQuestion q;
        q.name = c.name();
        q.type = static_cast<std::uint16_t>(c.uint(2));
        q.cls = static_cast<std::uint16_t>(c.uint(2));
        if (!c.ok) return false;
        out.qd.push_back(std::move(q));
    }
    for (auto [count, section] : {std::pair{an, &out.an}, std::pair{ns, &out.ns}, std::pair{ar, &out.ar}})
        for (std::uint32_t i = 0; i < count; ++i) {
            DnsRr r;
            if (!parse_rr(c, r)) return false;
            section->push_back(std::move(r));
        }
    return c.ok && c.pos == wire.size();
}

std::vector<std::uint8_t> dns_build(const DnsMsg& m) {
    Wire w;
    put16(w, m.id);
    put16(w, m.flags);
    put16(w, m.qd.size());
    put16(w, m.an.size());
    put16(w, m.ns.size());
    put16(w, m.ar.size());
    for (const auto& q : m.qd) {
        put_bytes(w, q.name);
        put16(w, q.type);
        put16(w, q.cls);
    }
    for (const auto* sec : {&m.an, &m.ns, &m.ar})
        for (const auto& r : *sec) put_rr(w, r);
    return w;
}

DnsMsg dns_reply_skeleton(const DnsMsg& query, int rcode, bool authoritative, bool recursion_available) {
    DnsMsg r;
    r.id = query.id;
    r.flags = static_cast<std::uint16_t>(0x8000 | (query.flags & 0x7800) | (query.flags & 0x0100) |
                                         (authoritative ? 0x0400 : 0) | (recursion_available ? 0x0080 : 0) |
                                         (rcode & 0xf));
    r.qd = query.qd;
    for (const auto& a : query.ar)
        if (a.type == kOpt) r.ar.push_back(DnsRr{std::string(1, '\0'), kOpt, 1232, 0, {}});
    return r;
}

std::optional<std::vector<std::uint8_t>> dns_screen_query(std::span<const std::uint8_t> wire, DnsMsg& query,
                                                          bool& drop, bool recursion_available) {
    drop = false;
    if (wire.size() < 12 || (wire[2] & 0x80)) {
        drop = true;
        return std::nullopt;
    }
    if (!dns_parse(wire, query)) {
        DnsMsg header;
        header.id = static_cast<std::uint16_t>((wire[0] << 8) | wire[1]);
        header.flags = static_cast<std::uint16_t>((wire[2] << 8) | wire[3]);
        return dns_build(dns_reply_skeleton(header, kFormErr, false, recursion_available));
    }
    auto refuse = [&](int rcode) { return dns_build(dns_reply_skeleton(query, rcode, false, recursion_available)); };
    if (query.opcode() != 0) return refuse(kNotImp);
    if (query.qd.size() != 1 || !query.an.empty() || !query.ns.empty()) return refuse(kFormErr);
    int opts = 0;
    for (const auto& a : query.ar)
        if (a.type == kOpt) {
            if (++opts > 1 || a.owner != std::string(1, '\0')) return refuse(kFormErr);
        }
    const auto& q = query.qd[0];
    if (q.cls != 1 || q.type == kAxfr || q.type == kIxfr) return refuse(kRefused);
    return std::nullopt;
}

std::optional<std::vector<std::uint8_t>> DnsResolverCore::handle(std::span<const std::uint8_t> wire,
                                                                 const Forward& forward) {
    DnsMsg q;
    bool drop = false;
    if (auto early = dns_screen_query(wire, q, drop, true)) return early;
    if (drop) return std::nullopt;

    const auto& question = q.qd[0];
    auto qname = dns_name_lower(question.name);
    if (qname == dns_name_wire(kDnsFlushName)) {
        flush();
        return dns_build(dns_reply_skeleton(q, 0, false, true));
    }

    {
        std::lock_guard lock(mu_);
        std::vector<DnsRr> answers;
        auto cur = qname;
        for (int hops = 0; hops < 8; ++hops) {
            auto hit = cache_.find({cur, question.type});
            if (hit != cache_.end()) {
                answers.insert(answers.end(), hit->second.begin(), hit->second.end());
                auto reply = dns_reply_skeleton(q, 0, false, true);
                reply.an = std::move(answers);
                return dns_build(reply);
            }
            auto alias = cache_.find({cur, kCname});
            if (alias == cache_.end() || question.type == kCname) break;
            answers.insert(answers.end(), alias->second.begin(), alias->second.end());
            cur = dns_name_lower(alias->second.front().rdata);
        }
    }

    DnsMsg fq;
    fq.id = next_id_.fetch_add(1);
    fq.flags = 0x0100;
    fq.qd.push_back(question);
    auto accept = [&](const DnsMsg& r) {
        return r.id == fq.id && r.qr() && r.qd.size() == 1 && dns_name_lower(r.qd[0].name) == qname &&
               r.qd[0].type == question.type && r.qd[0].cls == question.cls;
    };
    auto upstream = forward(dns_build(fq), accept);
    DnsMsg resp;
    if (!upstream || !dns_parse(*upstream, resp)) return dns_build(dns_reply_skeleton(q, kServFail, false, true));
    if (resp.rcode() != 0) {
        auto reply = dns_reply_skeleton(q, resp.rcode(), false, true);
        reply.ns = resp.ns;
        return dns_build(reply);
    }

    // Records are trusted only for the queried name and the aliases it leads to.
    std::set<std::string> chain = {qname};
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& a : resp.an)
            if (a.type == kCname && chain.count(dns_name_lower(a.owner)) &&
                chain.insert(dns_name_lower(a.rdata)).second)
                grew = true;
    }
    auto reply = dns_reply_skeleton(q, 0, false, true);
    std::map<Key, std::vector<DnsRr>> fresh;
    for (const auto& a : resp.an) {
        bool related = chain.count(dns_name_lower(a.owner)) > 0;
        if (!related && !cache_all_) continue;
        reply.an.push_back(a);
        fresh[{dns_name_lower(a.owner), a.type}].push_back(a);
    }
    {
        std::lock_guard lock(mu_);
        for (auto& [k, v] : fresh) cache_[k] = std::move(v);
    }
    return dns_build(reply);
}

void DnsResolverCore::flush() {
    std::lock_guard lock(mu_);
    cache_.clear();
}

std::size_t DnsResolverCore::cached_records() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, v] : cache_) n += v.size();
    return n;
}

}  // namespace semfuzz::detail

namespace semfuzz {

std::optional<WireBytes> dns_authoritative_reply(std::span<const std::uint8_t> wire) {
    using namespace detail;
    DnsMsg q;
    bool drop = false;
    if (auto early = dns_screen_query(wire, q, drop, false)) return early;
    if (drop) return std::nullopt;

    const auto& question = q.qd[0];
    auto name = dns_name_lower(question.name);
    const Zone* zone = zone_for(name);
    if (!zone) return dns_build(dns_reply_skeleton(q, kRefused, false, false));

    auto reply = dns_reply_skeleton(q, 0, true, false);
    auto soa_of = [](const Zone& z) { return z.records.front(); };
    for (int hops = 0; hops < 8; ++hops) {
        bool exists = false;
        const DnsRr* alias = nullptr;
        std::size_t before = reply.an.size();
        for (const auto& r : zone->records) {
            if (dns_name_lower(r.owner) != name) continue;
            exists = true;
            if (r.type == question.type || question.type == kAny) reply.an.push_back(r);
            else if (r.type == kCname) alias = &r;
        }
        if (!exists) {
            bool below = false;
            for (const auto& r : zone->records)
                if (is_under(dns_name_lower(r.owner), name)) below = true;
            if (hops == 0) {
                if (!below) reply.flags = static_cast<std::uint16_t>((reply.flags & ~0xf) | kNxDomain);
                reply.ns.push_back(soa_of(*zone));
            }
            break;
        }
        if (reply.an.size() > before || !alias) {
            if (reply.an.size() == before && hops == 0) reply.ns.push_back(soa_of(*zone));
            break;
        }
        reply.an.push_back(*alias);
        name = dns_name_lower(alias->rdata);
        zone = zone_for(name);
        if (!zone) break;
    }
    return dns_build(reply);
}

}  // namespace semfuzz
