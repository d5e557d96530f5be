#include "gridrl/remote_reward.hpp"

#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

// simple counting semaphore; bounds concurrent in-flight requests
class Gate {
public:
    explicit Gate(int slots) : slots_(slots) {}
    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard lk(mu_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int slots_;
};

}  // namespace

struct RemoteRewardClient::Impl {
    RewardConfig cfg;
    std::string base_url;
    std::string vocab_digest;
    std::atomic<uint64_t> next_id{1};
    Gate gate;

    explicit Impl(const RewardConfig& c, std::string digest)
        : cfg(c), vocab_digest(std::move(digest)), gate(std::max(1, c.max_inflight)) {
        if (cfg.endpoint.empty()) throw ConfigError("reward endpoint not configured");
        base_url = cfg.endpoint;
        if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
            base_url = "http://" + base_url;
        }
    }
};

RemoteRewardClient::RemoteRewardClient(const RewardConfig& cfg, std::string vocab_digest)
    : impl_(std::make_unique<Impl>(cfg, std::move(vocab_digest))) {}

RemoteRewardClient::~RemoteRewardClient() = default;

double RemoteRewardClient::score(const std::string& prompt_text,
                                 const std::vector<int>& grid_tokens) {
    const uint64_t id = impl_->next_id.fetch_add(1);
    nlohmann::json request{{"id", id},
                           {"prompt_text", prompt_text},
                           {"grid", grid_tokens},
                           {"vocab_digest", impl_->vocab_digest}};
    const std::string body = request.dump();

    std::string last_error = "no attempt made";
    const int attempts = std::max(1, impl_->cfg.retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20 * attempt));
        }
        impl_->gate.acquire();
        httplib::Client client(impl_->base_url);
        client.set_connection_timeout(0, impl_->cfg.timeout_ms * 1000);
        client.set_read_timeout(0, impl_->cfg.timeout_ms * 1000);
        auto res = client.Post("/score", body, "application/json");
        impl_->gate.release();
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "unexpected status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json response;
        try {
            response = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw RemoteError(std::string("malformed judge response: ") + e.what());
        }
        if (!response.contains("id") || response["id"].get<uint64_t>() != id) {
            throw RemoteError("judge response id mismatch");
        }
        if (!response.contains("score")) throw RemoteError("judge response missing score");
        const double s = response["score"].get<double>();
        if (!(s >= 0.0 && s <= 1.0)) {
            throw RemoteError("judge score out of range: " + std::to_string(s));
        }
        return s;
    }
    throw RemoteError("remote reward failed after " + std::to_string(attempts) +
                      " attempts: " + last_error);
}

}  // namespace gridrl
