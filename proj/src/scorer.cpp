#include "seqdec/scorer.h"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <utility>

namespace seqdec {
namespace {

constexpr double kRowTolerance = 1e-9;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in " + path + ": " + e.what());
  }
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::vector<double> parse_prob_row(const Vocabulary& vocab,
                                   const nlohmann::json& obj,
                                   const std::string& where) {
  if (!obj.is_object()) throw InputError(where + ": row must be an object");
  std::vector<double> row(vocab.size(), 0.0);
  for (const auto& [name, value] : obj.items()) {
    auto id = vocab.find(name);
    if (!id) throw InputError(where + ": unknown token '" + name + "'");
    if (*id == vocab.bos()) {
      throw InputError(where + ": BOS cannot be an extension token");
    }
    if (!value.is_number()) {
      throw InputError(where + ": probability of '" + name +
                       "' is not a number");
    }
    row[static_cast<std::size_t>(*id)] = value.get<double>();
  }
  return row;
}

void validate_prob_row(const Vocabulary& vocab, const std::vector<double>& row,
                       const std::string& where) {
  if (row.size() != vocab.size()) {
    throw InputError(where + ": row has wrong width");
  }
  double total = 0.0;
  for (TokenId id : vocab.extension_tokens()) {
    double p = row[static_cast<std::size_t>(id)];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InputError(where + ": probability outside [0,1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kRowTolerance) {
    throw InputError(where + ": row sums to " + std::to_string(total));
  }
}

nlohmann::json prob_row_json(const Vocabulary& vocab,
                             const std::vector<double>& row) {
  nlohmann::json obj = nlohmann::json::object();
  for (TokenId id : vocab.extension_tokens()) {
    obj[vocab.token(id)] = row[static_cast<std::size_t>(id)];
  }
  return obj;
}

nlohmann::json vocabulary_json(const Vocabulary& vocab) {
  nlohmann::json regular = nlohmann::json::array();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto id = static_cast<TokenId>(i);
    if (id != vocab.bos() && id != vocab.eos()) {
      regular.push_back(vocab.token(id));
    }
  }
  return regular;
}

}  // namespace

void check_prefix(const Vocabulary& vocab, std::span<const TokenId> prefix) {
  if (prefix.empty() || prefix.front() != vocab.bos()) {
    throw ContractViolation("prefix must start with BOS");
  }
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (!vocab.is_extension(prefix[i]) || prefix[i] == vocab.eos()) {
      throw ContractViolation("prefix holds BOS/EOS or an unknown id at " +
                              std::to_string(i));
    }
  }
}

double row_mass(const Vocabulary& vocab, const LogProbRow& row) {
  double total = 0.0;
  for (TokenId id : vocab.extension_tokens()) {
    total += std::exp(row[static_cast<std::size_t>(id)]);
  }
  return total;
}

std::string context_key(const Vocabulary& vocab,
                        std::span<const TokenId> prefix) {
  std::string key;
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (i > 1) key.push_back(' ');
    key += vocab.token(prefix[i]);
  }
  return key;
}

Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("vocab") || !j["vocab"].is_array()) {
    throw InputError("model file: missing \"vocab\" array");
  }
  std::vector<std::string> regular;
  for (const auto& t : j["vocab"]) {
    if (!t.is_string()) throw InputError("model file: vocab entries must be strings");
    regular.push_back(t.get<std::string>());
  }
  std::string bos = j.value("bos", std::string("<s>"));
  std::string eos = j.value("eos", std::string("</s>"));
  try {
    return Vocabulary::with_markers(std::move(regular), std::move(bos),
                                    std::move(eos));
  } catch (const ContractViolation& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// TableModel

TableModel::TableModel(Vocabulary vocab,
                       std::map<std::string, std::vector<double>> rows,
                       std::vector<double> default_row)
    : vocab_(std::move(vocab)),
      rows_(std::move(rows)),
      default_row_(std::move(default_row)) {
  validate_prob_row(vocab_, default_row_, "default row");
  for (const auto& [key, row] : rows_) {
    validate_prob_row(vocab_, row, "row '" + key + "'");
    log_rows_.emplace(key, to_log(row));
  }
  log_default_ = to_log(default_row_);
}

LogProbRow TableModel::to_log(const std::vector<double>& probs) const {
  LogProbRow out(vocab_.size(), kNegInf);
  for (TokenId id : vocab_.extension_tokens()) {
    out[static_cast<std::size_t>(id)] =
        std::log(probs[static_cast<std::size_t>(id)]);
  }
  return out;
}

LogProbRow TableModel::next_logprobs(std::string_view /*context*/,
                                     std::span<const TokenId> prefix) const {
  check_prefix(vocab_, prefix);
  auto it = log_rows_.find(context_key(vocab_, prefix));
  return it == log_rows_.end() ? log_default_ : it->second;
}

TableModel TableModel::from_json(const nlohmann::json& j) {
  Vocabulary vocab = vocabulary_from_json(j);
  if (!j.contains("default")) throw InputError("table model: missing \"default\"");
  std::vector<double> def = parse_prob_row(vocab, j["default"], "default row");
  std::map<std::string, std::vector<double>> rows;
  if (j.contains("rows")) {
    if (!j["rows"].is_object()) throw InputError("table model: \"rows\" must be an object");
    for (const auto& [key, row] : j["rows"].items()) {
      for (const auto& w : split_words(key)) {
        auto id = vocab.find(w);
        if (!id || *id == vocab.bos() || *id == vocab.eos()) {
          throw InputError("table model: bad context key '" + key + "'");
        }
      }
      rows.emplace(key, parse_prob_row(vocab, row, "row '" + key + "'"));
    }
  }
  return TableModel(std::move(vocab), std::move(rows), std::move(def));
}

TableModel TableModel::load(const std::string& path) {
  return from_json(read_json_file(path));
}

nlohmann::json TableModel::to_json() const {
  nlohmann::json j;
  j["vocab"] = vocabulary_json(vocab_);
  j["bos"] = vocab_.token(vocab_.bos());
  j["eos"] = vocab_.token(vocab_.eos());
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [key, row] : rows_) rows[key] = prob_row_json(vocab_, row);
  j["rows"] = std::move(rows);
  j["default"] = prob_row_json(vocab_, default_row_);
  return j;
}

TableModel random_table_model(std::size_t extension_size, std::size_t depth,
                              std::uint64_t seed) {
  if (extension_size < 2) {
    throw ContractViolation("random_table_model: need at least one regular token");
  }
  std::vector<std::string> regular;
  for (std::size_t i = 0; i + 1 < extension_size; ++i) {
    regular.push_back("t" + std::to_string(i));
  }
  Vocabulary vocab = Vocabulary::with_markers(regular);
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gamma1(1.0);

  auto draw_row = [&] {
    std::vector<double> row(vocab.size(), 0.0);
    double total = 0.0;
    for (TokenId id : vocab.extension_tokens()) {
      // Keep rows away from zero so every path stays finite.
      double g = gamma1(rng) + 1e-3;
      row[static_cast<std::size_t>(id)] = g;
      total += g;
    }
    for (TokenId id : vocab.extension_tokens()) {
      row[static_cast<std::size_t>(id)] /= total;
    }
    return row;
  };

  std::map<std::string, std::vector<double>> rows;
  std::vector<std::vector<TokenId>> frontier{{vocab.bos()}};
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& prefix : frontier) {
      rows.emplace(context_key(vocab, prefix), draw_row());
      for (TokenId id : vocab.extension_tokens()) {
        if (id == vocab.eos()) continue;
        auto child = prefix;
        child.push_back(id);
        next.push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  auto def = draw_row();
  return TableModel(std::move(vocab), std::move(rows), std::move(def));
}

// ---------------------------------------------------------------------------
// NgramModel

NgramModel::NgramModel(Vocabulary vocab, std::size_t order, double alpha,
                       Counts counts)
    : vocab_(std::move(vocab)),
      order_(order),
      alpha_(alpha),
      counts_(std::move(counts)) {
  if (order_ < 1) throw InputError("ngram: order must be >= 1");
  if (!(alpha_ > 0.0)) throw InputError("ngram: alpha must be > 0");
  for (const auto& [key, row] : counts_) {
    std::uint64_t total = 0;
    for (const auto& [tok, n] : row) {
      auto id = vocab_.find(tok);
      if (!id || *id == vocab_.bos()) {
        throw InputError("ngram: unknown token '" + tok + "' in counts");
      }
      total += n;
    }
    totals_.emplace(key, total);
  }
}

std::string NgramModel::window_key(std::string_view context,
                                   std::span<const TokenId> prefix) const {
  const std::size_t width = order_ - 1;
  if (width == 0) return {};
  std::vector<std::string> window(width, vocab_.token(vocab_.bos()));
  for (auto& w : split_words(context)) window.push_back(std::move(w));
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    window.push_back(vocab_.token(prefix[i]));
  }
  std::string key;
  for (std::size_t i = window.size() - width; i < window.size(); ++i) {
    if (!key.empty()) key.push_back(' ');
    key += window[i];
  }
  return key;
}

double NgramModel::probability(const std::string& key, TokenId token) const {
  const double vbar = static_cast<double>(vocab_.extension_size());
  double count = 0.0;
  double total = 0.0;
  if (auto it = counts_.find(key); it != counts_.end()) {
    if (auto c = it->second.find(vocab_.token(token)); c != it->second.end()) {
      count = static_cast<double>(c->second);
    }
    total = static_cast<double>(totals_.find(key)->second);
  }
  return (count + alpha_) / (total + alpha_ * vbar);
}

LogProbRow NgramModel::next_logprobs(std::string_view context,
                                     std::span<const TokenId> prefix) const {
  check_prefix(vocab_, prefix);
  const std::string key = window_key(context, prefix);
  LogProbRow out(vocab_.size(), kNegInf);
  for (TokenId id : vocab_.extension_tokens()) {
    out[static_cast<std::size_t>(id)] = std::log(probability(key, id));
  }
  return out;
}

NgramModel NgramModel::from_json(const nlohmann::json& j) {
  Vocabulary vocab = vocabulary_from_json(j);
  if (!j.contains("order") || !j["order"].is_number_integer() ||
      j["order"].get<long long>() < 1) {
    throw InputError("ngram model: \"order\" must be a positive integer");
  }
  if (!j.contains("alpha") || !j["alpha"].is_number()) {
    throw InputError("ngram model: missing numeric \"alpha\"");
  }
  Counts counts;
  if (j.contains("counts")) {
    for (const auto& [key, row] : j["counts"].items()) {
      auto& dst = counts[key];
      for (const auto& [tok, n] : row.items()) {
        if (!n.is_number_unsigned()) {
          throw InputError("ngram model: counts must be non-negative integers");
        }
        dst[tok] = n.get<std::uint64_t>();
      }
    }
  }
  return NgramModel(std::move(vocab), j["order"].get<std::size_t>(),
                    j["alpha"].get<double>(), std::move(counts));
}

NgramModel NgramModel::load(const std::string& path) {
  return from_json(read_json_file(path));
}

nlohmann::json NgramModel::to_json() const {
  nlohmann::json j;
  j["vocab"] = vocabulary_json(vocab_);
  j["bos"] = vocab_.token(vocab_.bos());
  j["eos"] = vocab_.token(vocab_.eos());
  j["order"] = order_;
  j["alpha"] = alpha_;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [key, row] : counts_) {
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [tok, n] : row) r[tok] = n;
    counts[key] = std::move(r);
  }
  j["counts"] = std::move(counts);
  return j;
}

NgramModel train_ngram(const std::vector<std::string>& corpus,
                       std::size_t order, double alpha,
                       std::vector<std::string> vocab) {
  if (order < 1) throw InputError("ngram: order must be >= 1");
  if (!(alpha > 0.0)) throw InputError("ngram: alpha must be > 0");
  std::vector<std::vector<std::string>> lines;
  for (const auto& line : corpus) {
    auto words = split_words(line);
    if (!words.empty()) lines.push_back(std::move(words));
  }
  if (lines.empty()) throw InputError("ngram: empty training corpus");

  if (vocab.empty()) {
    std::set<std::string> seen;
    for (const auto& words : lines) seen.insert(words.begin(), words.end());
    vocab.assign(seen.begin(), seen.end());
  }
  Vocabulary v = Vocabulary::with_markers(std::move(vocab));
  const std::string& bos = v.token(v.bos());
  const std::string& eos = v.token(v.eos());

  NgramModel::Counts counts;
  for (const auto& words : lines) {
    std::vector<std::string> seq(order - 1, bos);
    for (const auto& w : words) {
      auto id = v.find(w);
      if (!id || *id == v.bos() || *id == v.eos()) {
        throw InputError("ngram: corpus word '" + w + "' not in vocabulary");
      }
      seq.push_back(w);
    }
    seq.push_back(eos);
    for (std::size_t i = order - 1; i < seq.size(); ++i) {
      std::string key;
      for (std::size_t j = i - (order - 1); j < i; ++j) {
        if (!key.empty()) key.push_back(' ');
        key += seq[j];
      }
      ++counts[key][seq[i]];
    }
  }
  return NgramModel(std::move(v), order, alpha, std::move(counts));
}

// ---------------------------------------------------------------------------

LogProbRow UniformScorer::next_logprobs(std::string_view /*context*/,
                                        std::span<const TokenId> prefix) const {
  check_prefix(vocab_, prefix);
  LogProbRow out(vocab_.size(), kNegInf);
  const double lp = -std::log(static_cast<double>(vocab_.extension_size()));
  for (TokenId id : vocab_.extension_tokens()) {
    out[static_cast<std::size_t>(id)] = lp;
  }
  return out;
}

std::unique_ptr<Scorer> load_model(std::string_view kind,
                                   const std::string& path) {
  if (kind == "table") return std::make_unique<TableModel>(TableModel::load(path));
  if (kind == "ngram") return std::make_unique<NgramModel>(NgramModel::load(path));
  throw InputError("unknown model kind: " + std::string(kind));
}

}  // namespace seqdec
