#include "seqdec/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "seqdec/decode.h"
#include "seqdec/metrics.h"
#include "seqdec/oracle.h"
#include "seqdec/remote.h"
#include "seqdec/scorer.h"

namespace seqdec {
namespace {

struct RunConfig {
  std::string strategy = "beam";
  std::string k = "1";
  std::string d = "0";
  std::size_t max_len = 20;
  std::string mode = "practical";
  std::string scorer = "table";
  std::string model;
  std::string endpoint;
  std::string input;
  std::string output;
  std::uint64_t seed = 0;
  std::size_t vocab_size = 4;
  std::optional<std::uint64_t> budget;
  bool enumerate = false;
  std::size_t order = 2;
  double alpha = 1.0;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, const char* flag,
                                     std::size_t min_value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < static_cast<long long>(min_value)) {
      throw InputError(std::string(flag) + ": invalid value '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw InputError(std::string(flag) + ": no value given");
  return out;
}

std::uint64_t resolve_budget(const RunConfig& cfg) {
  if (cfg.budget) return *cfg.budget;
  if (const char* env = std::getenv("SEQDEC_BUDGET")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InputError("SEQDEC_BUDGET is not an integer");
    }
  }
  return kDefaultNodeBudget;
}

std::unique_ptr<Scorer> make_scorer(const RunConfig& cfg) {
  if (cfg.scorer == "table" || cfg.scorer == "ngram") {
    if (cfg.model.empty()) throw InputError("--model is required for --scorer " + cfg.scorer);
    return load_model(cfg.scorer, cfg.model);
  }
  if (cfg.scorer == "remote") {
    if (cfg.endpoint.empty()) throw InputError("--endpoint is required for --scorer remote");
    if (cfg.model.empty()) {
      throw InputError("--model (a file holding the vocabulary) is required for --scorer remote");
    }
    std::ifstream in(cfg.model);
    if (!in) throw InputError("cannot open model file: " + cfg.model);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed JSON in ") + cfg.model + ": " + e.what());
    }
    Vocabulary vocab = vocabulary_from_json(j);
    return std::make_unique<RemoteScorer>(std::move(vocab), connect_tcp(cfg.endpoint));
  }
  if (cfg.scorer == "random") {
    return std::make_unique<TableModel>(
        random_table_model(cfg.vocab_size, cfg.max_len, cfg.seed));
  }
  throw InputError("unknown --scorer '" + cfg.scorer + "'");
}

std::vector<DecodeInput> read_inputs(const std::string& path) {
  if (path.empty()) return {DecodeInput{"0", ""}};
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input: " + path);
  std::vector<DecodeInput> inputs;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw InputError(path + ":" + std::to_string(lineno) + ": not JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("context") ||
        !j["context"].is_string()) {
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected {\"id\", \"context\"}");
    }
    DecodeInput input;
    input.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    input.context = j["context"].get<std::string>();
    if (!ids.insert(input.id).second) {
      throw InputError(path + ":" + std::to_string(lineno) + ": duplicate id " + input.id);
    }
    inputs.push_back(std::move(input));
  }
  return inputs;
}

nlohmann::json token_strings(const Vocabulary& vocab,
                             const std::vector<TokenId>& tokens) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 1; i < tokens.size(); ++i) out.push_back(vocab.token(tokens[i]));
  return out;
}

// Writes to a sibling temp file and renames on success, so a failed run never
// leaves a partial output behind.
class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback)
      : path_(path), fallback_(fallback) {}

  std::ostream& stream() { return buffer_; }

  void commit() {
    if (path_.empty()) {
      fallback_ << buffer_.str();
      return;
    }
    const std::string tmp = path_ + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw InputError("cannot write output: " + path_);
      f << buffer_.str();
      if (!f.flush()) throw InputError("cannot write output: " + path_);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path_, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw InputError("cannot write output: " + path_);
    }
  }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ostringstream buffer_;
};

DecodeConfig base_config(const RunConfig& cfg) {
  DecodeConfig c;
  c.max_len = cfg.max_len;
  auto mode = parse_mode(cfg.mode);
  if (!mode) throw InputError("--mode must be raw or practical");
  c.mode = *mode;
  c.node_budget = resolve_budget(cfg);
  if (c.max_len < 1) throw InputError("--max-len must be >= 1");
  return c;
}

int cmd_decode(const RunConfig& cfg, std::ostream& out) {
  DecodeConfig config = base_config(cfg);
  auto strategy = parse_strategy(cfg.strategy);
  if (!strategy) throw InputError("unknown --strategy '" + cfg.strategy + "'");
  config.strategy = *strategy;
  config.beam_width = parse_sizes(cfg.k, "--k", 1).front();
  config.lookahead_depth = parse_sizes(cfg.d, "--d", 0).front();
  auto inputs = read_inputs(cfg.input);
  auto scorer = make_scorer(cfg);
  const Vocabulary& vocab = scorer->vocabulary();

  OutputSink sink(cfg.output, out);
  for (const auto& input : inputs) {
    DecodeResult r = decode(*scorer, input, config);
    nlohmann::json rec;
    rec["id"] = input.id;
    rec["tokens"] = token_strings(vocab, r.best.tokens);
    rec["score"] = r.best.cum_logprob;
    rec["nll"] = r.metrics.nll;
    rec["ppl"] = r.metrics.perplexity;
    rec["uid_error"] = r.metrics.uid_error;
    rec["length"] = r.metrics.length;
    rec["scorer_calls"] = r.metrics.scorer_calls;
    rec["wall_time_ms"] = r.metrics.wall_time_ms;
    rec["strategy"] = std::string(to_string(config.strategy));
    rec["k"] = config.beam_width;
    rec["d"] = config.lookahead_depth;
    sink.stream() << rec.dump() << '\n';
  }
  sink.commit();
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  DecodeConfig base = base_config(cfg);
  std::vector<Strategy> strategies;
  for (const auto& name : split_list(cfg.strategy)) {
    auto s = parse_strategy(name);
    if (!s) throw InputError("unknown --strategy '" + name + "'");
    strategies.push_back(*s);
  }
  if (std::find(strategies.begin(), strategies.end(), Strategy::kBeam) ==
      strategies.end()) {
    throw InputError("compare: --strategy must include the beam baseline");
  }
  auto ks = parse_sizes(cfg.k, "--k", 1);
  auto ds = parse_sizes(cfg.d, "--d", 0);

  std::vector<DecodeConfig> configs;
  for (std::size_t k : ks) {
    for (Strategy s : strategies) {
      const bool sweeps_d = s == Strategy::kLbs;
      for (std::size_t d : sweeps_d ? ds : std::vector<std::size_t>{0}) {
        DecodeConfig c = base;
        c.strategy = s;
        c.beam_width = k;
        c.lookahead_depth = d;
        configs.push_back(c);
      }
    }
  }
  auto inputs = read_inputs(cfg.input);
  if (cfg.input.empty() || inputs.empty()) throw InputError("compare: empty corpus");
  auto scorer = make_scorer(cfg);
  auto rows = compare_strategies(*scorer, inputs, configs);

  OutputSink sink(cfg.output, out);
  write_comparison_csv(sink.stream(), rows);
  sink.commit();
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  if (cfg.input.empty()) throw InputError("--input (training text) is required");
  std::ifstream in(cfg.input);
  if (!in) throw InputError("cannot open input: " + cfg.input);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  NgramModel model = train_ngram(lines, cfg.order, cfg.alpha);

  OutputSink sink(cfg.output, out);
  sink.stream() << model.to_json().dump(2) << '\n';
  sink.commit();
  return kExitOk;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  DecodeConfig config = base_config(cfg);
  auto inputs = read_inputs(cfg.input);
  auto scorer = make_scorer(cfg);
  const Vocabulary& vocab = scorer->vocabulary();

  OutputSink sink(cfg.output, out);
  for (const auto& input : inputs) {
    if (cfg.enumerate) {
      EnumerationResult all = enumerate_all(*scorer, input.context,
                                            config.max_len, config.node_budget);
      for (const auto& s : all.all_complete) {
        nlohmann::json rec;
        rec["id"] = input.id;
        rec["tokens"] = token_strings(vocab, s.tokens);
        rec["score"] = s.logprob;
        rec["p"] = std::exp(s.logprob);
        sink.stream() << rec.dump() << '\n';
      }
    } else {
      Hypothesis best = brute_force_map(*scorer, input.context, config.max_len,
                                        config.node_budget);
      nlohmann::json rec;
      rec["id"] = input.id;
      rec["tokens"] = token_strings(vocab, best.tokens);
      rec["score"] = best.cum_logprob;
      rec["p"] = std::exp(best.cum_logprob);
      sink.stream() << rec.dump() << '\n';
    }
  }
  sink.commit();
  return kExitOk;
}

void add_scoring_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--scorer", cfg.scorer, "table | ngram | remote | random");
  app->add_option("--model", cfg.model, "model JSON file");
  app->add_option("--endpoint", cfg.endpoint, "host:port of a remote scorer");
  app->add_option("--input", cfg.input, "JSONL inputs: {\"id\", \"context\"} per line");
  app->add_option("--output", cfg.output, "output path (default: stdout)");
  app->add_option("--max-len", cfg.max_len, "generated-token limit, EOS included");
  app->add_option("--mode", cfg.mode, "raw | practical");
  app->add_option("--seed", cfg.seed, "seed for --scorer random");
  app->add_option("--vocab-size", cfg.vocab_size, "|V̄| for --scorer random");
  app->add_option("--budget", cfg.budget, "node budget for exhaustive search");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Sequence decoding with beam, lookahead and lookbehind search"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* dec = app.add_subcommand("decode", "decode a JSONL corpus");
  add_scoring_flags(dec, cfg);
  dec->add_option("--strategy", cfg.strategy, "greedy | beam | lbs | lhbs | exhaustive");
  dec->add_option("--k", cfg.k, "beam width");
  dec->add_option("--d", cfg.d, "lookahead depth (lbs)");

  auto* cmp = app.add_subcommand("compare", "sweep strategies and write a CSV report");
  add_scoring_flags(cmp, cfg);
  cmp->add_option("--strategy", cfg.strategy, "comma-separated strategies; must include beam");
  cmp->add_option("--k", cfg.k, "comma-separated beam widths");
  cmp->add_option("--d", cfg.d, "comma-separated lookahead depths for lbs");

  auto* trn = app.add_subcommand("train", "train an add-alpha n-gram model");
  trn->add_option("--input", cfg.input, "training text, one sentence per line");
  trn->add_option("--output", cfg.output, "model JSON path (default: stdout)");
  trn->add_option("--order", cfg.order, "n-gram order");
  trn->add_option("--alpha", cfg.alpha, "smoothing constant (> 0)");

  auto* orc = app.add_subcommand("oracle", "brute-force MAP search on small instances");
  add_scoring_flags(orc, cfg);
  orc->add_flag("--enumerate", cfg.enumerate, "emit every complete sequence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }

  try {
    if (*dec) return cmd_decode(cfg, out);
    if (*cmp) return cmd_compare(cfg, out);
    if (*trn) return cmd_train(cfg, out);
    if (*orc) return cmd_oracle(cfg, out);
  } catch (const BudgetExceeded& e) {
    err << "seqdec: " << e.what() << '\n';
    return kExitBudget;
  } catch (const TransportError& e) {
    err << "seqdec: scorer transport failure: " << e.what() << '\n';
    return kExitTransport;
  } catch (const InputError& e) {
    err << "seqdec: " << e.what() << '\n';
    return kExitInput;
  } catch (const ContractViolation& e) {
    err << "seqdec: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace seqdec
