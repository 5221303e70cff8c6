#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>

#include "volmo/text_util.hpp"

namespace volmo::testing {

inline std::filesystem::path data_dir() { return VOLMO_TEST_DATA; }

inline std::string read_data(const std::string& rel) { return text::read_file((data_dir() / rel).string()); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("volmo-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// httplib server on an ephemeral localhost port, stopped on destruction.
class LocalServer {
 public:
  LocalServer() : server_(std::make_unique<httplib::Server>()) {}
  ~LocalServer() { stop(); }

  httplib::Server& operator*() { return *server_; }
  httplib::Server* operator->() { return server_.get(); }

  void start() {
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  void stop() {
    if (thread_.joinable()) {
      server_->stop();
      thread_.join();
    }
  }
  int port() const { return port_; }
  std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

/// A localhost port with nothing listening on it.
inline int closed_port() {
  httplib::Server s;
  const int port = s.bind_to_any_port("127.0.0.1");
  return port;  // socket closes when `s` goes out of scope
}

}  // namespace volmo::testing
