#include "seqdec/remote.h"

#include <cerrno>
#include <cmath>
#include <cstring>

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace seqdec {
namespace {

[[noreturn]] void fail(const std::string& what) { throw TransportError(what); }

std::string errno_message(const char* op) {
  return std::string(op) + ": " + std::strerror(errno);
}

}  // namespace

std::string encode_request(const ScoreRequest& req) {
  nlohmann::json j;
  j["id"] = req.id;
  j["context"] = req.context;
  j["prefix"] = req.prefix;
  return j.dump();
}

ScoreRequest parse_request(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("request is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() ||
      !j.contains("context") || !j["context"].is_string() ||
      !j.contains("prefix") || !j["prefix"].is_array()) {
    fail("request lacks id/context/prefix");
  }
  ScoreRequest req;
  req.id = j["id"].get<std::uint64_t>();
  req.context = j["context"].get<std::string>();
  for (const auto& t : j["prefix"]) {
    if (!t.is_string()) fail("request prefix entries must be strings");
    req.prefix.push_back(t.get<std::string>());
  }
  return req;
}

std::string encode_response(std::uint64_t id, const Vocabulary& vocab,
                            const LogProbRow& row) {
  nlohmann::json lp = nlohmann::json::object();
  for (TokenId t : vocab.extension_tokens()) {
    double v = row[static_cast<std::size_t>(t)];
    if (std::isinf(v)) {
      lp[vocab.token(t)] = nullptr;
    } else {
      lp[vocab.token(t)] = v;
    }
  }
  nlohmann::json j;
  j["id"] = id;
  j["logprobs"] = std::move(lp);
  return j.dump();
}

LogProbRow parse_response(const std::string& line, std::uint64_t expected_id,
                          const Vocabulary& vocab, double tolerance) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned()) {
    fail("response lacks an unsigned id");
  }
  if (j["id"].get<std::uint64_t>() != expected_id) {
    fail("response id " + j["id"].dump() + " does not echo request id " +
         std::to_string(expected_id));
  }
  if (!j.contains("logprobs") || !j["logprobs"].is_object()) {
    fail("response lacks a logprobs object");
  }
  const auto& lp = j["logprobs"];
  LogProbRow row(vocab.size(), kNegInf);
  for (const auto& [name, value] : lp.items()) {
    auto id = vocab.find(name);
    if (!id || !vocab.is_extension(*id)) {
      fail("response scores token '" + name + "' outside the extension set");
    }
    if (value.is_null()) continue;
    if (!value.is_number()) fail("log-probability of '" + name + "' is not a number");
    double v = value.get<double>();
    if (std::isnan(v) || v > 0.0) {
      fail("log-probability of '" + name + "' is not <= 0");
    }
    row[static_cast<std::size_t>(*id)] = v;
  }
  for (TokenId t : vocab.extension_tokens()) {
    if (!lp.contains(vocab.token(t))) {
      fail("response is missing token '" + vocab.token(t) + "'");
    }
  }
  double mass = row_mass(vocab, row);
  if (std::abs(mass - 1.0) > tolerance) {
    fail("response row is not normalized (mass " + std::to_string(mass) + ")");
  }
  return row;
}

// ---------------------------------------------------------------------------

FdChannel::FdChannel(int read_fd, int write_fd)
    : read_fd_(read_fd), write_fd_(write_fd) {}

FdChannel::~FdChannel() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
}

void FdChannel::send_line(const std::string& line) {
  std::string out = line;
  out.push_back('\n');
  std::size_t sent = 0;
  while (sent < out.size()) {
    ssize_t n = ::send(write_fd_, out.data() + sent, out.size() - sent,
                       MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) {
      n = ::write(write_fd_, out.data() + sent, out.size() - sent);
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(errno_message("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdChannel::receive_line(
    std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) fail("timed out waiting for peer");
    pollfd pfd{read_fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      fail(errno_message("poll"));
    }
    if (rc == 0) fail("timed out waiting for peer");
    char chunk[4096];
    ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(errno_message("read"));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      fail("peer closed the stream mid-line");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void FdChannel::shutdown_write() { ::shutdown(write_fd_, SHUT_WR); }

std::unique_ptr<FdChannel> connect_tcp(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    fail("endpoint must be host:port, got '" + address + "'");
  }
  std::string host = address.substr(0, colon);
  std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    fail("cannot resolve " + address + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) fail("cannot connect to " + address);
  return std::make_unique<FdChannel>(fd);
}

std::pair<std::unique_ptr<FdChannel>, std::unique_ptr<FdChannel>>
make_channel_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    fail(errno_message("socketpair"));
  }
  return {std::make_unique<FdChannel>(fds[0]),
          std::make_unique<FdChannel>(fds[1])};
}

// ---------------------------------------------------------------------------

RemoteScorer::RemoteScorer(Vocabulary vocab,
                           std::unique_ptr<LineChannel> channel,
                           std::chrono::milliseconds timeout)
    : vocab_(std::move(vocab)), channel_(std::move(channel)), timeout_(timeout) {}

LogProbRow RemoteScorer::next_logprobs(std::string_view context,
                                       std::span<const TokenId> prefix) const {
  check_prefix(vocab_, prefix);
  ScoreRequest req;
  req.context = std::string(context);
  for (TokenId t : prefix) req.prefix.push_back(vocab_.token(t));

  std::lock_guard<std::mutex> lock(mu_);
  req.id = next_id_++;
  channel_->send_line(encode_request(req));
  auto line = channel_->receive_line(timeout_);
  if (!line) fail("peer closed the stream before answering");
  return parse_response(*line, req.id, vocab_);
}

std::uint64_t serve_scorer(const Scorer& scorer, LineChannel& channel) {
  const Vocabulary& vocab = scorer.vocabulary();
  std::uint64_t served = 0;
  for (;;) {
    auto line = channel.receive_line(std::chrono::hours(24));
    if (!line) return served;
    ScoreRequest req = parse_request(*line);
    std::vector<TokenId> prefix;
    for (const auto& name : req.prefix) {
      auto id = vocab.find(name);
      if (!id) fail("request names unknown token '" + name + "'");
      prefix.push_back(*id);
    }
    channel.send_line(
        encode_response(req.id, vocab, scorer.next_logprobs(req.context, prefix)));
    ++served;
  }
}

}  // namespace seqdec
