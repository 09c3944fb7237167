// SPDX-License-Identifier: Apache-2.0
//
// Live HTTP completion client (OpenAI-style chat endpoint). Kept out of
// distill.hpp so the pipeline and its tests build without the HTTP stack.
#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "medfleet/detail/clock.hpp"
#include "medfleet/distill.hpp"

namespace medfleet {

class LiveCompletionClient : public CompletionClient {
public:
    struct Options {
        std::string endpoint;  // full URL, e.g. https://host/v1/chat/completions
        std::string api_key;
        std::string model = "gpt-3.5-turbo";
        int max_attempts = 3;          // total tries, retrying 429/5xx/transport errors
        double backoff_base_s = 0.5;   // doubles per retry
        double timeout_s = 60.0;
        detail::Clock* clock = &detail::system_clock();
    };

    static Options options_from_env() {
        Options opts;
        if (const char* e = std::getenv("MEDFLEET_COMPLETION_ENDPOINT")) opts.endpoint = e;
        if (const char* k = std::getenv("MEDFLEET_COMPLETION_API_KEY")) opts.api_key = k;
        return opts;
    }

    explicit LiveCompletionClient(Options opts) : opts_(std::move(opts)) {
        if (opts_.endpoint.empty())
            throw CompletionError("no completion endpoint configured "
                                  "(set MEDFLEET_COMPLETION_ENDPOINT)");
        auto scheme_end = opts_.endpoint.find("://");
        auto path_begin = scheme_end == std::string::npos
                              ? opts_.endpoint.find('/')
                              : opts_.endpoint.find('/', scheme_end + 3);
        if (path_begin == std::string::npos) {
            base_ = opts_.endpoint;
            path_ = "/";
        } else {
            base_ = opts_.endpoint.substr(0, path_begin);
            path_ = opts_.endpoint.substr(path_begin);
        }
    }

    Completion complete(const PromptMessages& prompt) override {
        ordered_json body;
        body["model"] = opts_.model;
        body["messages"] = ordered_json::array();
        body["messages"].push_back({{"role", "system"}, {"content", prompt.system}});
        body["messages"].push_back({{"role", "user"}, {"content", prompt.user}});
        const std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
            if (attempt > 1)
                opts_.clock->sleep_for(opts_.backoff_base_s * static_cast<double>(1 << (attempt - 2)));
            httplib::Client client(base_);
            client.set_read_timeout(std::chrono::duration<double>(opts_.timeout_s));
            client.set_connection_timeout(std::chrono::duration<double>(opts_.timeout_s));
            httplib::Headers headers;
            if (!opts_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + opts_.api_key);
            auto res = client.Post(path_, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw CompletionError("completion endpoint returned HTTP " +
                                      std::to_string(res->status));
            return parse_response(res->body);
        }
        throw CompletionError("completion request failed after " +
                              std::to_string(opts_.max_attempts) + " attempts: " + last_error);
    }

private:
    static Completion parse_response(const std::string& body) {
        auto j = ordered_json::parse(body, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object())
            throw CompletionError("completion endpoint returned invalid JSON");
        Completion out;
        try {
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (auto usage = j.find("usage"); usage != j.end()) {
                out.usage.prompt_tokens = usage->value("prompt_tokens", 0);
                out.usage.completion_tokens = usage->value("completion_tokens", 0);
            }
        } catch (const ordered_json::exception& e) {
            throw CompletionError(std::string("unexpected completion payload: ") + e.what());
        }
        return out;
    }

    Options opts_;
    std::string base_;
    std::string path_;
};

}  // namespace medfleet
