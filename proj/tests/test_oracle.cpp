#include <doctest.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "rumorgraph/error.hpp"
#include "rumorgraph/oracle.hpp"
#include "test_util.hpp"

using namespace rumorgraph;
using nlohmann::json;

namespace {

std::string chat_body(const std::string& content) {
  json doc = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
  return doc.dump();
}

/// Scripted fake transport: replays queued responses, counts calls and
/// tracks the maximum number of simultaneous in-flight requests.
class FakeTransport final : public ChatTransport {
 public:
  std::vector<ChatResponse> script;
  std::atomic<int> calls{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  int delay_ms = 0;
  std::vector<std::string> request_bodies;
  std::mutex body_mutex;

  ChatResponse post(const std::string& body) override {
    int current = ++in_flight;
    int seen = max_in_flight.load();
    while (current > seen && !max_in_flight.compare_exchange_weak(seen, current)) {
    }
    if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    {
      std::lock_guard lock(body_mutex);
      request_bodies.push_back(body);
    }
    int index = calls.fetch_add(1);
    --in_flight;
    if (script.empty()) return {200, chat_body("0.5")};
    return script[std::min<std::size_t>(index, script.size() - 1)];
  }
};

OracleConfig live_config() {
  OracleConfig config;
  config.kind = OracleKind::Live;
  config.backoff_base_seconds = 0.0;  // no sleeping in tests
  return config;
}

}  // namespace

TEST_CASE("parse_probability: accepted shapes") {
  CHECK(parse_probability("0.85") == doctest::Approx(0.85));
  CHECK(parse_probability("the probability is 0.30.") == doctest::Approx(0.30));
  CHECK(parse_probability("Probability: 0.3") == doctest::Approx(0.3));
  CHECK(parse_probability("85%") == doctest::Approx(0.85));
  CHECK(parse_probability("I'd say 85% likely") == doctest::Approx(0.85));
  CHECK(parse_probability("1") == doctest::Approx(1.0));
  CHECK(parse_probability("0") == doctest::Approx(0.0));
  CHECK(parse_probability(".75") == doctest::Approx(0.75));
  // out-of-range numbers are skipped until an in-range one appears
  CHECK(parse_probability("rated 7/10, so 0.7") == doctest::Approx(0.7));
}

TEST_CASE("parse_probability: failures") {
  CHECK_THROWS_AS(parse_probability("cannot determine"), Error);
  CHECK_THROWS_AS(parse_probability(""), Error);
  CHECK_THROWS_AS(parse_probability("score: 42"), Error);
  try {
    parse_probability("no idea");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseFailure);
  }
}

TEST_CASE("mock_score: purity and range") {
  BiasProfile profile = make_bias_profile("aggressive", 7);
  double a = mock_score(profile, 1, 2, "tree/nodeX");
  double b = mock_score(profile, 1, 2, "tree/nodeX");
  CHECK(a == b);
  CHECK(a >= 0.0);
  CHECK(a <= 1.0);
  CHECK(mock_score(profile, 1, 2, "tree/nodeY") != a);  // key-sensitive
  BiasProfile reseeded = profile;
  reseeded.seed = 8;
  CHECK(mock_score(reseeded, 1, 2, "tree/nodeX") != a);  // seed-sensitive
}

TEST_CASE("mock_score: oracle-perfect bands") {
  BiasProfile profile = make_bias_profile("oracle-perfect", 3);
  for (int i = 0; i < 200; ++i) {
    double rumor = mock_score(profile, 1, 1 + i % 4, "k" + std::to_string(i));
    CHECK(rumor >= 0.9);
    CHECK(rumor <= 1.0);
    double clean = mock_score(profile, 0, 1 + i % 4, "k" + std::to_string(i));
    CHECK(clean >= 0.0);
    CHECK(clean <= 0.1);
  }
}

TEST_CASE("mock_score: conservative profile calibration (Monte Carlo)") {
  BiasProfile profile = make_bias_profile("conservative", 11);
  int above = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    if (mock_score(profile, 1, 1 + i % 3, "chain" + std::to_string(i)) >
        profile.calibration_theta) {
      ++above;
    }
  }
  double fraction = static_cast<double>(above) / n;
  CHECK(std::abs(fraction - profile.tpr_target) < 0.05);
}

TEST_CASE("mock_score: aggressive profile standalone accuracy (Monte Carlo)") {
  BiasProfile profile = make_bias_profile("aggressive", 13);
  const int n = 2500;
  int rumor_hits = 0, clean_hits = 0;
  for (int i = 0; i < n; ++i) {
    if (mock_score(profile, 1, 1 + i % 4, "r" + std::to_string(i)) > profile.calibration_theta) {
      ++rumor_hits;
    }
    if (mock_score(profile, 0, 1 + i % 4, "n" + std::to_string(i)) <= profile.calibration_theta) {
      ++clean_hits;
    }
  }
  CHECK(std::abs(static_cast<double>(rumor_hits) / n - 0.90) < 0.05);
  CHECK(std::abs(static_cast<double>(clean_hits) / n - 0.25) < 0.05);
}

TEST_CASE("mock_score: non-rumor expected score decreases with depth") {
  BiasProfile profile = make_bias_profile("conservative", 19);
  REQUIRE(profile.depth_decay == doctest::Approx(0.05));
  double mean[4] = {0, 0, 0, 0};
  const int n = 4000;
  for (int depth = 1; depth <= 3; ++depth) {
    for (int i = 0; i < n; ++i) {
      mean[depth] += mock_score(profile, 0, depth, "key" + std::to_string(i));
    }
    mean[depth] /= n;
  }
  CHECK(mean[1] > mean[2]);
  CHECK(mean[2] > mean[3]);
}

TEST_CASE("mock oracle: deterministic knowledge base digest") {
  MockOracle oracle(make_bias_profile("oracle-perfect", 0));
  PropagationTree tree = testutil::chain_tree({"X", "reply"});
  KnowledgeBase kb1 = oracle.build_knowledge_base(tree);
  KnowledgeBase kb2 = oracle.build_knowledge_base(tree);
  CHECK(kb1.background_text == kb2.background_text);
  CHECK(kb1.background_text.rfind("mock-kb-", 0) == 0);
  CHECK(kb1.event_id == tree.event_id);
}

TEST_CASE("live oracle: happy path parses the scripted probability") {
  auto transport = std::make_unique<FakeTransport>();
  transport->script = {{200, chat_body("kb text")}, {200, chat_body("0.85")}};
  FakeTransport* raw = transport.get();
  LiveOracle oracle(live_config(), std::move(transport));

  PropagationTree tree = testutil::chain_tree({"source post", "a reply"});
  KnowledgeBase kb = oracle.build_knowledge_base(tree);
  CHECK(kb.background_text == "kb text");
  double p = oracle.score_subchain(kb, tree, extract_subchain(tree, "n1"));
  CHECK(p == doctest::Approx(0.85));
  CHECK(raw->calls == 2);
  // step-2 prompt embeds the knowledge base and the joined chain
  json body = json::parse(raw->request_bodies[1]);
  std::string prompt = body["messages"][0]["content"];
  CHECK(prompt.find("kb text") != std::string::npos);
  CHECK(prompt.find("source post [SEP] a reply") != std::string::npos);
  CHECK(body["temperature"].get<double>() == 0.0);
}

TEST_CASE("live oracle: three 500s exhaust retries into ApiError") {
  auto transport = std::make_unique<FakeTransport>();
  transport->script = {{500, "boom"}};
  FakeTransport* raw = transport.get();
  OracleConfig config = live_config();
  config.max_retries = 3;
  LiveOracle oracle(config, std::move(transport));
  PropagationTree tree = testutil::chain_tree({"post", "reply"});
  try {
    oracle.build_knowledge_base(tree);
    FAIL("expected ApiError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ApiError);
  }
  CHECK(raw->calls == 4);  // initial try + 3 retries
}

TEST_CASE("live oracle: unparsable reply is re-asked once") {
  auto transport = std::make_unique<FakeTransport>();
  transport->script = {{200, chat_body("kb")},
                       {200, chat_body("cannot determine")},
                       {200, chat_body("0.4")}};
  FakeTransport* raw = transport.get();
  LiveOracle oracle(live_config(), std::move(transport));
  PropagationTree tree = testutil::chain_tree({"post", "reply"});
  KnowledgeBase kb = oracle.build_knowledge_base(tree);
  CHECK(oracle.score_subchain(kb, tree, extract_subchain(tree, "n1")) == doctest::Approx(0.4));
  CHECK(raw->calls == 3);

  // two unparsable replies in a row fail
  auto transport2 = std::make_unique<FakeTransport>();
  transport2->script = {{200, chat_body("nope")}};
  LiveOracle oracle2(live_config(), std::move(transport2));
  CHECK_THROWS_AS(oracle2.score_subchain(kb, tree, extract_subchain(tree, "n1")), Error);
}

TEST_CASE("score_tree: exactly one knowledge-base call per tree, one score per chain") {
  auto transport = std::make_unique<FakeTransport>();
  FakeTransport* raw = transport.get();
  LiveOracle oracle(live_config(), std::move(transport));
  PropagationTree tree = testutil::star_tree(6);

  ScoreTreeStats stats;
  auto scores = score_tree(oracle, tree, nullptr, 4, &stats);
  CHECK(scores.size() == 6);
  CHECK(stats.kb_calls == 1);
  CHECK(stats.score_calls == 6);
  CHECK(raw->calls == 7);
  for (const auto& [node, p] : scores) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("score_tree: warm cache means zero oracle calls") {
  testutil::TempDir dir("oracle_cache");
  ScoreCache cache(dir.path() / "scores.jsonl");
  PropagationTree tree = testutil::star_tree(4);

  {
    auto transport = std::make_unique<FakeTransport>();
    LiveOracle oracle(live_config(), std::move(transport));
    score_tree(oracle, tree, &cache, 2);
  }
  auto transport = std::make_unique<FakeTransport>();
  FakeTransport* raw = transport.get();
  LiveOracle oracle(live_config(), std::move(transport));
  ScoreTreeStats stats;
  auto scores = score_tree(oracle, tree, &cache, 2, &stats);
  CHECK(raw->calls == 0);  // no KB call, no scoring calls
  CHECK(stats.kb_calls == 0);
  CHECK(stats.cache_hits == 4);
  CHECK(scores.size() == 4);
}

TEST_CASE("score_tree: in-flight requests never exceed max_concurrency") {
  auto transport = std::make_unique<FakeTransport>();
  transport->delay_ms = 5;
  FakeTransport* raw = transport.get();
  LiveOracle oracle(live_config(), std::move(transport));
  PropagationTree tree = testutil::star_tree(24);

  score_tree(oracle, tree, nullptr, 3);
  CHECK(raw->max_in_flight.load() <= 3);
  CHECK(raw->calls == 25);

  // mock oracle is sequential regardless of the bound
  MockOracle mock(make_bias_profile("oracle-perfect", 0));
  auto scores = score_tree(mock, tree, nullptr, 100);
  CHECK(scores.size() == 24);
}

TEST_CASE("score_tree: every returned score is in [0,1] for all profiles") {
  for (const char* name : {"conservative", "aggressive", "oracle-perfect", "weird"}) {
    MockOracle oracle(make_bias_profile(name, 5));
    std::mt19937_64 rng(21);
    PropagationTree tree = testutil::random_tree(rng, 20, "range", 1);
    for (const auto& [node, p] : score_tree(oracle, tree, nullptr, 1)) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
  }
}

TEST_CASE("live oracle: knowledge bases persist across client restarts") {
  testutil::TempDir dir("kb_store");
  OracleConfig config = live_config();
  config.kb_path = (dir.path() / "kb.jsonl").string();
  PropagationTree tree = testutil::chain_tree({"the claim", "a reply"});

  {
    auto transport = std::make_unique<FakeTransport>();
    transport->script = {{200, chat_body("compiled background")}};
    FakeTransport* raw = transport.get();
    LiveOracle oracle(config, std::move(transport));
    KnowledgeBase kb = oracle.build_knowledge_base(tree);
    CHECK(kb.background_text == "compiled background");
    // second call within the same client: served from memory
    oracle.build_knowledge_base(tree);
    CHECK(raw->calls == 1);
  }
  // fresh client, same store: no transport call at all
  auto transport = std::make_unique<FakeTransport>();
  FakeTransport* raw = transport.get();
  LiveOracle oracle(config, std::move(transport));
  KnowledgeBase kb = oracle.build_knowledge_base(tree);
  CHECK(kb.background_text == "compiled background");
  CHECK(raw->calls == 0);
}

TEST_CASE("live oracle: template files override the built-in prompts") {
  testutil::TempDir dir("templates");
  {
    std::ofstream step1(dir.path() / "s1.txt");
    step1 << "CUSTOM1 {rules} || {subchain}";
    std::ofstream step2(dir.path() / "s2.txt");
    step2 << "CUSTOM2 {background} || {rules} || {subchain}";
    std::ofstream rules(dir.path() / "rules.txt");
    rules << "THE RULES";
  }
  OracleConfig config = live_config();
  config.step1_template_path = (dir.path() / "s1.txt").string();
  config.step2_template_path = (dir.path() / "s2.txt").string();
  config.rules_path = (dir.path() / "rules.txt").string();

  auto transport = std::make_unique<FakeTransport>();
  transport->script = {{200, chat_body("bg")}, {200, chat_body("0.5")}};
  FakeTransport* raw = transport.get();
  LiveOracle oracle(config, std::move(transport));
  PropagationTree tree = testutil::chain_tree({"root text", "reply"});
  KnowledgeBase kb = oracle.build_knowledge_base(tree);
  oracle.score_subchain(kb, tree, extract_subchain(tree, "n1"));

  json step1_body = json::parse(raw->request_bodies[0]);
  std::string prompt1 = step1_body["messages"][0]["content"];
  CHECK(prompt1 == "CUSTOM1 THE RULES || root text");
  json step2_body = json::parse(raw->request_bodies[1]);
  std::string prompt2 = step2_body["messages"][0]["content"];
  CHECK(prompt2 == "CUSTOM2 bg || THE RULES || root text [SEP] reply");
}
