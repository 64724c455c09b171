#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "rumorgraph/score_cache.hpp"
#include "rumorgraph/tree.hpp"

namespace rumorgraph {

/// Parameterized model of a scorer's systematic judgment tendency.
/// Scores are drawn from a band above or below calibration_theta, with the
/// band choice calibrated so that thresholding at calibration_theta
/// reproduces tpr_target / tnr_target exactly in expectation.
struct BiasProfile {
  std::string name = "custom";
  double tpr_target = 0.9;   // P(score > theta | rumor)
  double tnr_target = 0.9;   // P(score <= theta | non-rumor)
  double depth_decay = 0.0;  // per-hop drift of non-rumor in-band scores
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  double calibration_theta = 0.5;
  double hi_band_min = 0.5;  // above-threshold scores fall in (hi_band_min, 1]
  double lo_band_max = 0.5;  // below-threshold scores fall in [0, lo_band_max)
};

/// Named profiles: "conservative", "aggressive", "oracle-perfect".
/// Anything else returns a neutral custom profile.
BiasProfile make_bias_profile(const std::string& name, std::uint64_t seed);

/// Deterministic biased score, pure in (profile, label, depth, key).
double mock_score(const BiasProfile& profile, int tree_label, int chain_depth,
                  const std::string& chain_key);

/// First in-range probability in a reply: "0.85", "p = 0.3", "85%" all
/// work. Throws ParseFailure when no number in [0,1] is present.
double parse_probability(const std::string& response_text);

/// Per-event background analysis compiled in protocol step 1 and embedded
/// into every step-2 scoring prompt of that tree.
struct KnowledgeBase {
  std::string event_id;
  std::string background_text;
  std::string created_at;
};

enum class OracleKind { Mock, Live };

struct OracleConfig {
  OracleKind kind = OracleKind::Mock;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "RUMORGRAPH_API_KEY";
  int max_retries = 3;
  double timeout_seconds = 30.0;
  int max_concurrency = 100;
  double temperature = 0.0;
  double backoff_base_seconds = 1.0;  // doubles per retry
  BiasProfile profile;                // mock mode
  // Optional template overrides; empty means the shipped defaults.
  std::string step1_template_path;
  std::string step2_template_path;
  std::string rules_path;
  /// JSONL store of compiled knowledge bases, one {"tree","background",
  /// "created_at"} per line; reloaded on startup so a tree's background is
  /// compiled at most once across runs. Empty disables persistence.
  std::string kb_path;
};

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::string name() const = 0;
  virtual KnowledgeBase build_knowledge_base(const PropagationTree& tree) = 0;
  virtual double score_subchain(const KnowledgeBase& kb, const PropagationTree& tree,
                                const Subchain& chain) = 0;
  /// Live oracles score chains in parallel; the mock is sequential.
  virtual bool supports_parallel_requests() const { return false; }
};

class MockOracle final : public Oracle {
 public:
  explicit MockOracle(BiasProfile profile) : profile_(std::move(profile)) {}
  std::string name() const override { return "mock:" + profile_.name; }
  KnowledgeBase build_knowledge_base(const PropagationTree& tree) override;
  double score_subchain(const KnowledgeBase& kb, const PropagationTree& tree,
                        const Subchain& chain) override;
  const BiasProfile& profile() const { return profile_; }

 private:
  BiasProfile profile_;
};

/// Raw chat-completions transport; swapped for a fake in tests.
struct ChatResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse post(const std::string& request_body_json) = 0;
};

/// HTTPS/HTTP transport for OpenAI-compatible chat-completions endpoints.
std::unique_ptr<ChatTransport> make_http_transport(const OracleConfig& config);

/// Two-step protocol client: step 1 compiles the knowledge base from the
/// root post, step 2 scores each subchain against it with a numeric-only
/// reply instruction. Retries with exponential backoff; a reply that fails
/// probability parsing is re-asked once.
class LiveOracle final : public Oracle {
 public:
  LiveOracle(OracleConfig config, std::unique_ptr<ChatTransport> transport);
  std::string name() const override { return "live:" + config_.model; }
  KnowledgeBase build_knowledge_base(const PropagationTree& tree) override;
  double score_subchain(const KnowledgeBase& kb, const PropagationTree& tree,
                        const Subchain& chain) override;
  bool supports_parallel_requests() const override { return true; }

 private:
  std::string complete(const std::string& prompt);

  OracleConfig config_;
  std::unique_ptr<ChatTransport> transport_;
  std::string step1_template_;
  std::string step2_template_;
  std::string rules_;
  std::map<std::string, KnowledgeBase> kb_store_;  // event_id -> compiled kb
  std::mutex kb_mutex_;
};

std::unique_ptr<Oracle> make_oracle(const OracleConfig& config);

/// Scores every subchain of a tree, consulting the cache first. The
/// knowledge base is built once per tree and only when at least one chain
/// is uncached; chain scoring fans out up to max_concurrency in-flight
/// requests for parallel-capable oracles.
struct ScoreTreeStats {
  int kb_calls = 0;
  int score_calls = 0;
  int cache_hits = 0;
};

std::map<std::string, double> score_tree(Oracle& oracle, const PropagationTree& tree,
                                         ScoreCache* cache, int max_concurrency,
                                         ScoreTreeStats* stats = nullptr);

}  // namespace rumorgraph
