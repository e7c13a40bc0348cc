#pragma once

// Client side of the language-model bridge: spawns an external process and
// talks newline-delimited JSON over its stdin/stdout.
//
//   -> {"id":1,"kind":"handshake"}
//   <- {"id":1,"status":"ok","version":"1","vocab":["a","b",...],"end_token":"</s>"}
//   -> {"id":2,"kind":"next","context":[3,1,4]}
//   <- {"id":2,"status":"ok","probs":[0.1,0.2,...]}
//   -> {"id":3,"kind":"shutdown"}
//   <- {"id":3,"status":"ok"}
//
// Failed requests answer {"id":..,"status":"error","message":..,"request":..}.

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "textcausal/language_model.hpp"

namespace textcausal {

class BridgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kBridgeProtocolVersion = "1";

class ChildProcess;

class BridgeLm final : public SequentialLm {
 public:
  // argv[0] is resolved through PATH. Performs the handshake; throws
  // BridgeError if the process cannot start or speaks another version.
  explicit BridgeLm(std::vector<std::string> argv);
  ~BridgeLm() override;

  BridgeLm(const BridgeLm&) = delete;
  BridgeLm& operator=(const BridgeLm&) = delete;

  [[nodiscard]] const Vocab& vocab() const override { return vocab_; }
  [[nodiscard]] TokenDistribution next(std::span<const TokenId> context) const override;
  [[nodiscard]] std::optional<TokenId> end_token() const override { return end_token_; }
  [[nodiscard]] bool concurrent_queries() const override { return false; }

  [[nodiscard]] std::size_t requests_sent() const;

  void shutdown();

 private:
  std::string round_trip(const std::string& request) const;

  mutable std::mutex mutex_;
  std::unique_ptr<ChildProcess> child_;
  Vocab vocab_;
  std::optional<TokenId> end_token_;
  mutable std::uint64_t next_id_ = 1;
  mutable std::unordered_map<std::string, TokenDistribution> cache_;
};

}  // namespace textcausal
