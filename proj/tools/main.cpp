// SPDX-License-Identifier: Apache-2.0
#include <memory>

#include "medfleet/cli.hpp"
#include "medfleet/distill_live.hpp"
#include "medfleet/pubmed_live.hpp"

int main(int argc, char** argv) {
    medfleet::cli::RunEnv env;
    env.transport_factory = [] {
        return std::unique_ptr<medfleet::HttpTransport>(new medfleet::HttplibTransport());
    };
    env.live_completion_factory = [](const medfleet::Config&) {
        return std::unique_ptr<medfleet::CompletionClient>(
            new medfleet::LiveCompletionClient(medfleet::LiveCompletionClient::options_from_env()));
    };
    return medfleet::cli::run(argc, argv, env);
}
