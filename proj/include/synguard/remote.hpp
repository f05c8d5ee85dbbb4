#pragma once

// Client side of the newline-delimited JSON logit protocol.
//
//   -> {"op":"hello"}                 <- {"vocab_size":N,"vocab_tag":"..."}
//   -> {"op":"logits","context":[..]} <- {"logits":[N reals]}
//   -> {"op":"bye"}
//
// Endpoints are either "tcp:HOST:PORT" or "exec:SHELL COMMAND" (the command's
// stdin/stdout carry the protocol).

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "synguard/lm.hpp"

namespace synguard {

/// A bidirectional line channel; one implementation per transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  /// Throws ProviderError on EOF or timeout.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

std::unique_ptr<LineChannel> open_channel(const std::string& endpoint);

class RemoteModel final : public LanguageModel {
 public:
  /// Performs the handshake; throws ProviderError if the advertised vocabulary
  /// size or tag differs from the expected ones. An empty expected tag skips
  /// the tag comparison.
  RemoteModel(std::unique_ptr<LineChannel> channel, std::size_t expected_vocab_size,
              std::string expected_tag,
              std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~RemoteModel() override;

  RemoteModel(const RemoteModel&) = delete;
  RemoteModel& operator=(const RemoteModel&) = delete;

  std::size_t vocab_size() const override { return vocab_size_; }
  std::string vocab_tag() const override { return vocab_tag_; }
  LogitVector next_logits(std::span<const TokenId> context) const override;

 private:
  std::unique_ptr<LineChannel> channel_;
  std::size_t vocab_size_ = 0;
  std::string vocab_tag_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
};

std::unique_ptr<RemoteModel> connect_remote(const std::string& endpoint, const Vocabulary& vocab);

}  // namespace synguard
