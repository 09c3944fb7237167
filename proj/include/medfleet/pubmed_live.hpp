// SPDX-License-Identifier: Apache-2.0
//
// httplib-backed transport for EutilsClient, split out so the core client and
// parser build without the HTTP stack.
#pragma once

#include <httplib.h>

#include <stdexcept>
#include <string>

#include "medfleet/pubmed.hpp"

namespace medfleet {

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(double timeout_s = 30.0) : timeout_s_(timeout_s) {}

    Response get(const std::string& origin, const std::string& target) override {
        httplib::Client client(origin);
        client.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
        client.set_read_timeout(std::chrono::duration<double>(timeout_s_));
        client.set_follow_location(true);
        auto res = client.Get(target);
        if (!res)
            throw std::runtime_error("transport error for " + origin + target + ": " +
                                     httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    double timeout_s_;
};

}  // namespace medfleet
