#pragma once
// Test scaffolding: scratch directories, scripted transports, error capture.

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>

#include "cutstudio/error.hpp"
#include "cutstudio/gateway.hpp"

namespace support {

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cutstudio-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Transport answering from a handler; counts calls.
class ScriptedTransport final : public cutstudio::gateway::Transport {
 public:
  using Handler = std::function<cutstudio::gateway::HttpResponse(const cutstudio::gateway::HttpRequest&)>;
  explicit ScriptedTransport(Handler h) : handler_(std::move(h)) {}

  cutstudio::gateway::HttpResponse post(const cutstudio::gateway::HttpRequest& req) override {
    ++calls;
    {
      std::lock_guard lock(mu_);
      last_body = req.body;
    }
    return handler_(req);
  }

  std::atomic<int> calls{0};
  std::string last_body;

 private:
  Handler handler_;
  std::mutex mu_;
};

/// Transport that fails every call, as a dead network would.
inline std::shared_ptr<ScriptedTransport> dead_network() {
  return std::make_shared<ScriptedTransport>([](const auto&) -> cutstudio::gateway::HttpResponse {
    cutstudio::fail(cutstudio::ErrorCode::ProviderError, "network disabled in tests");
  });
}

inline cutstudio::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const cutstudio::Error& e) {
    return e.code();
  }
  throw std::logic_error("expected an error");
}

inline std::function<void(std::chrono::duration<double>)> no_sleep(std::vector<double>* record = nullptr) {
  return [record](std::chrono::duration<double> d) {
    if (record) record->push_back(d.count());
  };
}

}  // namespace support
