#include "textcausal/bridge.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace textcausal {

using json = nlohmann::json;

class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string>& argv) {
    if (argv.empty()) throw BridgeError("bridge: empty command");
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) throw BridgeError("bridge: pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw BridgeError("bridge: fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    std::signal(SIGPIPE, SIG_IGN);
  }

  ~ChildProcess() {
    if (write_fd_ >= 0) close(write_fd_);
    if (read_fd_ >= 0) close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      if (waitpid(pid_, &status, WNOHANG) == 0) {
        kill(pid_, SIGTERM);
        waitpid(pid_, &status, 0);
      }
    }
  }

  void write_line(const std::string& line) {
    std::string data = line + "\n";
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      const ssize_t n = ::write(write_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BridgeError(std::string("bridge: write failed: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    while (true) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        return line;
      }
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw BridgeError("bridge: process closed its output stream");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close_input() {
    if (write_fd_ >= 0) close(write_fd_);
    write_fd_ = -1;
  }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::string buffer_;
};

BridgeLm::BridgeLm(std::vector<std::string> argv) : child_(std::make_unique<ChildProcess>(argv)) {
  json req = {{"id", next_id_++}, {"kind", "handshake"}};
  json resp;
  try {
    resp = json::parse(round_trip(req.dump()));
  } catch (const json::exception& e) {
    throw BridgeError(std::string("bridge: malformed handshake response: ") + e.what());
  }
  if (resp.value("status", "") != "ok") {
    throw BridgeError("bridge: handshake failed: " + resp.value("message", std::string("no message")));
  }
  if (resp.value("version", "") != kBridgeProtocolVersion) {
    throw BridgeError("bridge: unsupported protocol version '" + resp.value("version", std::string()) + "'");
  }
  vocab_ = Vocab(resp.at("vocab").get<std::vector<std::string>>());
  if (resp.contains("end_token") && resp["end_token"].is_string()) {
    end_token_ = vocab_.id(resp["end_token"].get<std::string>());
  }
}

BridgeLm::~BridgeLm() {
  try {
    shutdown();
  } catch (...) {
  }
}

void BridgeLm::shutdown() {
  std::lock_guard lock(mutex_);
  if (!child_) return;
  try {
    json req = {{"id", next_id_++}, {"kind", "shutdown"}};
    child_->write_line(req.dump());
    child_->read_line();
  } catch (const BridgeError&) {
  }
  child_->close_input();
  child_.reset();
}

std::string BridgeLm::round_trip(const std::string& request) const {
  if (!child_) throw BridgeError("bridge: process already shut down");
  child_->write_line(request);
  return child_->read_line();
}

std::size_t BridgeLm::requests_sent() const {
  std::lock_guard lock(mutex_);
  return next_id_ - 1;
}

TokenDistribution BridgeLm::next(std::span<const TokenId> context) const {
  std::string key;
  key.reserve(context.size() * 4);
  for (TokenId t : context) {
    key.append(reinterpret_cast<const char*>(&t), sizeof(t));
  }
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  const std::uint64_t id = next_id_++;
  json req = {{"id", id}, {"kind", "next"}, {"context", std::vector<TokenId>(context.begin(), context.end())}};
  json resp;
  try {
    resp = json::parse(round_trip(req.dump()));
  } catch (const json::exception& e) {
    throw BridgeError("bridge: malformed response at context position " + std::to_string(context.size()) + ": " +
                      e.what());
  } catch (const BridgeError& e) {
    throw BridgeError(std::string(e.what()) + " (context position " + std::to_string(context.size()) + ")");
  }
  if (resp.value("status", "") != "ok") {
    throw BridgeError("bridge: request failed at context position " + std::to_string(context.size()) + ": " +
                      resp.value("message", std::string("no message")));
  }
  if (resp.value("id", std::uint64_t{0}) != id) {
    throw BridgeError("bridge: response id out of order at context position " + std::to_string(context.size()));
  }
  auto probs = resp.at("probs").get<std::vector<double>>();
  if (probs.size() != vocab_.size()) {
    throw BridgeError("bridge: distribution length " + std::to_string(probs.size()) + " != vocab size " +
                      std::to_string(vocab_.size()));
  }
  TokenDistribution dist;
  try {
    dist = clamp_normalize(probs);
  } catch (const std::invalid_argument& e) {
    throw BridgeError(std::string("bridge: invalid distribution: ") + e.what());
  }
  cache_.emplace(std::move(key), dist);
  return dist;
}

}  // namespace textcausal
