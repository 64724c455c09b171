#include "rumorgraph/oracle.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"
#include "rumorgraph/hashing.hpp"

namespace rumorgraph {

namespace {

constexpr const char* kDefaultRules =
    "1. Judge the source post, not the repliers' tone.\n"
    "2. Weigh corroboration and contradiction accumulated along the chain.\n"
    "3. A post is a rumor when its central claim is unverified or contradicted by "
    "the knowledge base.\n"
    "4. Reply with a bare number in [0,1]; no prose.";

constexpr const char* kDefaultStep1Template =
    "You are preparing a persistent knowledge base for rumor analysis.\n"
    "Research the source post below. Compile a brief, factual background "
    "analysis of the event: what is claimed, what is established, and any "
    "known discrepancies.\n\nRules:\n{rules}\n\nSource post:\n{subchain}\n\n"
    "Reply with the background analysis only.";

constexpr const char* kDefaultStep2Template =
    "You are scoring one reply chain from a propagation tree. Strictly adhere "
    "to the knowledge base below; judge how likely the SOURCE post (the first "
    "message of the chain) is a rumor.\n\nKnowledge base:\n{background}\n\n"
    "Rules:\n{rules}\n\nReply chain, root first, separated by [SEP]:\n{subchain}\n\n"
    "Reply with a single number between 0 and 1, the probability that the "
    "source post is a rumor. No other text.";

std::string read_file_or(const std::string& path, const char* fallback) {
  if (path.empty()) return fallback;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read template '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string substitute(std::string text, const std::string& placeholder, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
  }
  return text;
}

/// Next state and a uniform [0,1) draw from it.
double next_uniform(std::uint64_t& state) {
  state = splitmix64(state);
  return hash_to_unit(state);
}

}  // namespace

BiasProfile make_bias_profile(const std::string& name, std::uint64_t seed) {
  BiasProfile p;
  p.name = name;
  p.seed = seed;
  if (name == "oracle-perfect") {
    p.tpr_target = 1.0;
    p.tnr_target = 1.0;
    p.hi_band_min = 0.9;
    p.lo_band_max = 0.1;
  } else if (name == "conservative") {
    // Misses most rumors, keeps non-rumors clean.
    p.tpr_target = 0.155;
    p.tnr_target = 0.832;
    p.depth_decay = 0.05;
  } else if (name == "aggressive") {
    // Flags almost everything as a rumor.
    p.tpr_target = 0.90;
    p.tnr_target = 0.25;
  } else {
    p.name = "custom";
  }
  return p;
}

double mock_score(const BiasProfile& profile, int tree_label, int chain_depth,
                  const std::string& chain_key) {
  std::uint64_t state = fnv1a64(chain_key, profile.seed);
  double u = next_uniform(state);
  double v = next_uniform(state);

  bool correct = (tree_label == 1) ? (u < profile.tpr_target) : (u < profile.tnr_target);
  bool above = (tree_label == 1) ? correct : !correct;

  double theta = profile.calibration_theta;
  double score;
  if (above) {
    double lo = std::max(profile.hi_band_min, theta);
    score = lo + (1.0 - v) * (1.0 - lo);  // in (lo, 1]
  } else {
    double hi = std::min(profile.lo_band_max, theta);
    score = v * hi;  // in [0, hi)
    if (tree_label == 0 && profile.depth_decay > 0.0 && chain_depth > 1) {
      score *= std::pow(1.0 - profile.depth_decay, chain_depth - 1);
    }
  }

  if (profile.noise_std > 0.0) {
    double a = next_uniform(state);
    double b = next_uniform(state);
    double gaussian = std::sqrt(-2.0 * std::log(std::max(a, 1e-300))) *
                      std::cos(2.0 * 3.14159265358979323846 * b);
    score += profile.noise_std * gaussian;
  }
  return std::clamp(score, 0.0, 1.0);
}

double parse_probability(const std::string& response_text) {
  static const std::regex number_re(R"(([0-9]+(?:\.[0-9]+)?|\.[0-9]+)\s*(%)?)");
  auto begin = std::sregex_iterator(response_text.begin(), response_text.end(), number_re);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    double value = std::stod((*it)[1].str());
    if ((*it)[2].matched) value /= 100.0;
    if (value >= 0.0 && value <= 1.0) return value;
  }
  throw Error(ErrorCode::ParseFailure, "no probability in [0,1] found in reply: '" +
                                           response_text.substr(0, 120) + "'");
}

KnowledgeBase MockOracle::build_knowledge_base(const PropagationTree& tree) {
  const std::string& root_text = tree.root().text;
  std::uint64_t digest = fnv1a64(root_text, profile_.seed);
  std::ostringstream hex;
  hex << std::hex << digest;
  KnowledgeBase kb;
  kb.event_id = tree.event_id;
  kb.background_text = "mock-kb-" + hex.str();
  kb.created_at = "1970-01-01T00:00:00Z";
  return kb;
}

double MockOracle::score_subchain(const KnowledgeBase& kb, const PropagationTree& tree,
                                  const Subchain& chain) {
  (void)kb;
  return mock_score(profile_, tree.label, chain.depth(), tree.event_id + "/" + chain.target_id);
}

// ---------------------------------------------------------------------------
// Live client

LiveOracle::LiveOracle(OracleConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  step1_template_ = read_file_or(config_.step1_template_path, kDefaultStep1Template);
  step2_template_ = read_file_or(config_.step2_template_path, kDefaultStep2Template);
  rules_ = read_file_or(config_.rules_path, kDefaultRules);
  if (!config_.kb_path.empty() && std::filesystem::exists(config_.kb_path)) {
    std::ifstream in(config_.kb_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        auto doc = nlohmann::json::parse(line);
        KnowledgeBase kb;
        kb.event_id = doc.at("tree").get<std::string>();
        kb.background_text = doc.at("background").get<std::string>();
        kb.created_at = doc.value("created_at", "");
        kb_store_[kb.event_id] = std::move(kb);  // last writer wins
      } catch (const nlohmann::json::exception&) {
        // tolerate junk lines, same policy as the score cache
      }
    }
  }
}

std::string LiveOracle::complete(const std::string& prompt) {
  nlohmann::json body = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config_.temperature},
  };
  const std::string body_text = body.dump();

  int attempt = 0;
  while (true) {
    ChatResponse response = transport_->post(body_text);
    bool retryable = response.status == 0 || response.status == 429 || response.status >= 500;
    if (response.status == 200) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(response.body);
        std::string content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (content.empty()) throw Error(ErrorCode::EmptyResponse, "empty completion content");
        return content;
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ApiError, std::string("malformed completion body: ") + e.what());
      }
    }
    if (!retryable || attempt >= config_.max_retries) {
      throw Error(ErrorCode::ApiError,
                  "chat completion failed with status " + std::to_string(response.status) +
                      " after " + std::to_string(attempt + 1) + " attempt(s)");
    }
    double delay = config_.backoff_base_seconds * std::pow(2.0, attempt);
    if (delay > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    ++attempt;
  }
}

KnowledgeBase LiveOracle::build_knowledge_base(const PropagationTree& tree) {
  {
    std::lock_guard lock(kb_mutex_);
    auto it = kb_store_.find(tree.event_id);
    if (it != kb_store_.end()) return it->second;
  }

  const std::string& root_text = tree.root().text;
  if (root_text.empty()) {
    throw Error(ErrorCode::EmptyResponse, "root post of '" + tree.event_id + "' has no text");
  }
  std::string prompt = substitute(step1_template_, "{rules}", rules_);
  prompt = substitute(prompt, "{subchain}", root_text);
  std::string background = complete(prompt);
  if (background.empty()) throw Error(ErrorCode::EmptyResponse, "empty knowledge base reply");

  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&tt));

  KnowledgeBase kb;
  kb.event_id = tree.event_id;
  kb.background_text = background;
  kb.created_at = buf;

  std::lock_guard lock(kb_mutex_);
  kb_store_[kb.event_id] = kb;
  if (!config_.kb_path.empty()) {
    nlohmann::json doc = {
        {"tree", kb.event_id}, {"background", kb.background_text}, {"created_at", kb.created_at}};
    std::ofstream out(config_.kb_path, std::ios::app);
    if (out) out << doc.dump() << '\n';
  }
  return kb;
}

double LiveOracle::score_subchain(const KnowledgeBase& kb, const PropagationTree& tree,
                                  const Subchain& chain) {
  (void)tree;
  std::string prompt = substitute(step2_template_, "{background}", kb.background_text);
  prompt = substitute(prompt, "{rules}", rules_);
  prompt = substitute(prompt, "{subchain}", chain.joined_text);

  std::string reply = complete(prompt);
  try {
    return parse_probability(reply);
  } catch (const Error&) {
    // One re-ask on an unparsable reply, then give up.
    return parse_probability(complete(prompt));
  }
}

std::unique_ptr<Oracle> make_oracle(const OracleConfig& config) {
  if (config.kind == OracleKind::Mock) {
    return std::make_unique<MockOracle>(config.profile);
  }
  return std::make_unique<LiveOracle>(config, make_http_transport(config));
}

std::map<std::string, double> score_tree(Oracle& oracle, const PropagationTree& tree,
                                         ScoreCache* cache, int max_concurrency,
                                         ScoreTreeStats* stats) {
  if (max_concurrency < 1) {
    throw Error(ErrorCode::ConfigConflict, "max_concurrency must be >= 1");
  }
  std::map<std::string, double> scores;
  std::vector<Subchain> pending;
  for (Subchain& chain : enumerate_subchains(tree)) {
    std::optional<double> hit;
    if (cache) hit = cache->get({tree.event_id, chain.target_id, oracle.name()});
    if (hit) {
      scores[chain.target_id] = *hit;
      if (stats) ++stats->cache_hits;
    } else {
      pending.push_back(std::move(chain));
    }
  }
  if (pending.empty()) return scores;

  KnowledgeBase kb = oracle.build_knowledge_base(tree);
  if (stats) ++stats->kb_calls;

  std::vector<double> results(pending.size());
  const int workers = oracle.supports_parallel_requests()
                          ? std::min<int>(max_concurrency, static_cast<int>(pending.size()))
                          : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < pending.size(); ++i) {
      results[i] = oracle.score_subchain(kb, tree, pending[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= pending.size()) return;
          try {
            results[i] = oracle.score_subchain(kb, tree, pending[i]);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (std::size_t i = 0; i < pending.size(); ++i) {
    const std::string& node_id = pending[i].target_id;
    scores[node_id] = results[i];
    if (stats) ++stats->score_calls;
    if (cache) cache->put({tree.event_id, node_id, oracle.name()}, results[i]);
  }
  return scores;
}

}  // namespace rumorgraph
