#include <chrono>
#include <cmath>
#include <thread>

#include <gtest/gtest.h>

#include "seqdec/decode.h"
#include "seqdec/remote.h"
#include "support/reference.h"

namespace seqdec {
namespace {

using namespace std::chrono_literals;
using testing::tiny3;

TEST(Protocol, RequestRoundTrip) {
  ScoreRequest req{7, "the dog", {"BOS", "a"}};
  ScoreRequest back = parse_request(encode_request(req));
  EXPECT_EQ(back.id, 7u);
  EXPECT_EQ(back.context, "the dog");
  EXPECT_EQ(back.prefix, req.prefix);
  EXPECT_THROW(parse_request("{"), TransportError);
  EXPECT_THROW(parse_request(R"({"id":1,"context":""})"), TransportError);
}

TEST(Protocol, ResponseRoundTripIsBitExact) {
  TableModel m = random_table_model(5, 3, 42);
  const Vocabulary& v = m.vocabulary();
  Hypothesis h = Hypothesis::initial(v);
  LogProbRow row = m.next_logprobs("", h.tokens);
  LogProbRow back = parse_response(encode_response(3, v, row), 3, v);
  EXPECT_EQ(back, row);
}

TEST(Protocol, ZeroProbabilityTravelsAsNull) {
  TableModel m = testing::one_hot_model("a");
  const Vocabulary& v = m.vocabulary();
  LogProbRow row = m.next_logprobs("", Hypothesis::initial(v).tokens);
  std::string line = encode_response(1, v, row);
  EXPECT_NE(line.find("null"), std::string::npos);
  EXPECT_EQ(parse_response(line, 1, v), row);
}

TEST(Protocol, ResponseValidation) {
  Vocabulary v = tiny3().vocabulary();
  auto bad = [&](const std::string& line) {
    EXPECT_THROW(parse_response(line, 1, v), TransportError) << line;
  };
  const double la = std::log(0.5), lb = std::log(0.4), le = std::log(0.1);
  auto row = [&](double a, double b, double e) {
    nlohmann::json j;
    j["id"] = 1;
    j["logprobs"] = {{"a", a}, {"b", b}, {"EOS", e}};
    return j.dump();
  };
  EXPECT_NO_THROW(parse_response(row(la, lb, le), 1, v));
  bad("not json");
  bad(R"({"id":2,"logprobs":{"a":-0.69314718,"b":-0.91629073,"EOS":-2.30258509}})");
  bad(R"({"id":1,"logprobs":{"a":-0.69314718,"b":-0.91629073}})");
  bad(R"({"id":1,"logprobs":{"a":-0.69314718,"b":-0.91629073,"EOS":-2.30258509,"BOS":-1}})");
  bad(R"({"id":1,"logprobs":{"a":-0.69314718,"b":-0.91629073,"EOS":"x"}})");
  bad(row(0.1, lb, le));
  bad(row(la, la, la));  // mass 1.5
  bad(R"({"id":1})");
}

TEST(Protocol, ToleranceIsOneInAMillion) {
  Vocabulary v = tiny3().vocabulary();
  auto line = [&](double pa) {
    nlohmann::json j;
    j["id"] = 1;
    j["logprobs"] = {{"a", std::log(pa)}, {"b", std::log(0.4)}, {"EOS", std::log(0.1)}};
    return j.dump();
  };
  EXPECT_NO_THROW(parse_response(line(0.5 + 5e-7), 1, v));
  EXPECT_THROW(parse_response(line(0.5 + 5e-6), 1, v), TransportError);
}

class Loopback : public ::testing::Test {
 protected:
  void SetUp() override {
    auto [client, server] = make_channel_pair();
    server_ = std::move(server);
    peer_ = std::thread([this] { served_ = serve_scorer(model_, *server_); });
    remote_ = std::make_unique<RemoteScorer>(model_.vocabulary(), std::move(client), 5s);
  }
  void TearDown() override {
    remote_.reset();  // closes the client end; the peer sees EOF
    peer_.join();
  }

  TableModel model_ = tiny3();
  std::unique_ptr<FdChannel> server_;
  std::unique_ptr<RemoteScorer> remote_;
  std::thread peer_;
  std::uint64_t served_ = 0;
};

TEST_F(Loopback, RowsMatchInProcessScoring) {
  const Vocabulary& v = model_.vocabulary();
  TokenId a = *v.find("a"), b = *v.find("b");
  for (const std::vector<TokenId>& p :
       {std::vector<TokenId>{v.bos()}, {v.bos(), a}, {v.bos(), b, a}}) {
    EXPECT_EQ(remote_->next_logprobs("", p), model_.next_logprobs("", p));
  }
}

TEST_F(Loopback, DecodesAreIdentical) {
  for (Strategy s : {Strategy::kGreedy, Strategy::kBeam, Strategy::kLbs,
                     Strategy::kLhbs, Strategy::kExhaustive}) {
    DecodeConfig c;
    c.strategy = s;
    c.beam_width = 2;
    c.lookahead_depth = 2;
    c.max_len = 3;
    DecodeResult local = decode(model_, {"0", ""}, c);
    DecodeResult remote = decode(*remote_, {"0", ""}, c);
    EXPECT_EQ(local.best, remote.best);
    EXPECT_EQ(local.scorer_calls, remote.scorer_calls);
  }
}

TEST_F(Loopback, RejectsMalformedPrefixLocally) {
  std::vector<TokenId> bad{0};
  EXPECT_THROW(remote_->next_logprobs("", bad), ContractViolation);
}

TEST(RemoteScorer, TimesOutOnSilentPeer) {
  auto [client, server] = make_channel_pair();
  TableModel m = tiny3();
  RemoteScorer remote(m.vocabulary(), std::move(client), 50ms);
  EXPECT_THROW(remote.next_logprobs("", Hypothesis::initial(m.vocabulary()).tokens),
               TransportError);
}

TEST(RemoteScorer, PeerClosing) {
  auto [client, server] = make_channel_pair();
  TableModel m = tiny3();
  RemoteScorer remote(m.vocabulary(), std::move(client), 1s);
  server.reset();
  EXPECT_THROW(remote.next_logprobs("", Hypothesis::initial(m.vocabulary()).tokens),
               TransportError);
}

TEST(RemoteScorer, BadPeerAnswer) {
  auto [client, server] = make_channel_pair();
  TableModel m = tiny3();
  std::thread peer([&] {
    server->receive_line(1s);
    server->send_line(R"({"id":99,"logprobs":{}})");
  });
  RemoteScorer remote(m.vocabulary(), std::move(client), 1s);
  EXPECT_THROW(remote.next_logprobs("", Hypothesis::initial(m.vocabulary()).tokens),
               TransportError);
  peer.join();
}

TEST(Connect, BadEndpoints) {
  EXPECT_THROW(connect_tcp("no-port"), TransportError);
  EXPECT_THROW(connect_tcp("127.0.0.1:1"), TransportError);
}

}  // namespace
}  // namespace seqdec
