#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "gridrl/config.hpp"

namespace gridrl {

// Client seam for an external judge. POSTs {id, prompt_text, grid,
// vocab_digest} to <endpoint>/score and expects {id, score} back with
// score in [0, 1]. Transport failures are retried up to the configured
// budget, then surface as RemoteError; the local oracle is never silently
// substituted.
class RemoteRewardClient {
public:
    RemoteRewardClient(const RewardConfig& cfg, std::string vocab_digest);
    ~RemoteRewardClient();
    RemoteRewardClient(const RemoteRewardClient&) = delete;
    RemoteRewardClient& operator=(const RemoteRewardClient&) = delete;

    double score(const std::string& prompt_text, const std::vector<int>& grid_tokens);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace gridrl
