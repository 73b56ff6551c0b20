// SPDX-License-Identifier: Apache-2.0
//
// The only library translation unit that pulls in httplib's TLS client.

#include "httplib.h"

#include <openssl/evp.h>

#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "semfuzz/llm.hpp"

namespace semfuzz {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("CryptoError", "SHA-256 failed");
    return to_hex(std::span<const std::uint8_t>(digest, len));
}

HttpPost default_http_post() {
    return [](const std::string& url, const std::string& body,
              const std::map<std::string, std::string>& headers, int timeout_ms) -> HttpReply {
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw TransportError("bad URL '" + url + "'");
        auto path_start = url.find('/', scheme_end + 3);
        auto origin = url.substr(0, path_start);
        auto path = path_start == std::string::npos ? std::string("/") : url.substr(path_start);

        httplib::Client cli(origin);
        cli.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
        cli.set_read_timeout(std::chrono::milliseconds(timeout_ms));
        cli.set_write_timeout(std::chrono::milliseconds(timeout_ms));
        httplib::Headers h;
        for (const auto& [k, v] : headers)
            if (k != "Content-Type") h.emplace(k, v);
        auto res = cli.Post(path, h, body, "application/json");
        if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
        return HttpReply{res->status, res->body};
    };
}

}  // namespace semfuzz
