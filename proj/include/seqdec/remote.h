#ifndef SEQDEC_REMOTE_H_
#define SEQDEC_REMOTE_H_

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "seqdec/scorer.h"

namespace seqdec {

// Wire protocol: newline-delimited JSON over a reliable byte stream.
//
//   request:  {"id": uint, "context": string, "prefix": [token, ...]}
//   response: {"id": uint, "logprobs": {token: float64 | null, ...}}
//
// The prefix carries BOS as its first token string. A zero probability is
// sent as null since JSON has no infinity.

struct ScoreRequest {
  std::uint64_t id = 0;
  std::string context;
  std::vector<std::string> prefix;
};

std::string encode_request(const ScoreRequest& req);
ScoreRequest parse_request(const std::string& line);  // throws TransportError

std::string encode_response(std::uint64_t id, const Vocabulary& vocab,
                            const LogProbRow& row);

// Validates id echo, exact V̄ coverage and normalization within `tolerance`.
LogProbRow parse_response(const std::string& line, std::uint64_t expected_id,
                          const Vocabulary& vocab, double tolerance = 1e-6);

// Bidirectional line-oriented byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // nullopt on orderly EOF. Throws TransportError on timeout or I/O failure.
  virtual std::optional<std::string> receive_line(
      std::chrono::milliseconds timeout) = 0;
};

// Owns a connected file descriptor (socket or pipe pair).
class FdChannel final : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd);
  explicit FdChannel(int fd) : FdChannel(fd, fd) {}
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send_line(const std::string& line) override;
  std::optional<std::string> receive_line(
      std::chrono::milliseconds timeout) override;

  // Half-close the write side so the peer observes EOF.
  void shutdown_write();

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

// "host:port" over TCP.
std::unique_ptr<FdChannel> connect_tcp(const std::string& address);

// Connected stream pair in one process (AF_UNIX socketpair).
std::pair<std::unique_ptr<FdChannel>, std::unique_ptr<FdChannel>>
make_channel_pair();

// Scorer backed by a peer speaking the wire protocol. One request is in
// flight at a time; concurrent callers are serialized.
class RemoteScorer final : public Scorer {
 public:
  RemoteScorer(Vocabulary vocab, std::unique_ptr<LineChannel> channel,
               std::chrono::milliseconds timeout = std::chrono::seconds(30));

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogProbRow next_logprobs(std::string_view context,
                           std::span<const TokenId> prefix) const override;

 private:
  Vocabulary vocab_;
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mu_;
  mutable std::uint64_t next_id_ = 1;
};

// Peer loop: answers requests with `scorer` until EOF. Returns the number of
// requests served.
std::uint64_t serve_scorer(const Scorer& scorer, LineChannel& channel);

}  // namespace seqdec

#endif  // SEQDEC_REMOTE_H_
