#pragma once
// Vector-backed knowledge bases. Embeddings are signed feature hashes of
// canonical token streams; similarity is cosine.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "arc/mdp.hpp"

namespace arc {

inline constexpr std::size_t kEmbeddingDim = 256;

struct EmbeddingVector {
    std::array<double, kEmbeddingDim> values{};

    bool operator==(const EmbeddingVector&) const = default;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Canonical token streams.
std::vector<std::string> tokenize_text(std::string_view text);
std::vector<std::string> state_tokens(const State& state, std::string_view prefix = "");

EmbeddingVector embed_tokens(const std::vector<std::string>& tokens);
EmbeddingVector embed(std::string_view text);
EmbeddingVector embed(const State& state);
EmbeddingVector embed(const StateHistory& history);
// Exemplar input key: a state history paired with an objective.
EmbeddingVector embed(const StateHistory& history, const Objective& objective);

enum class KnowledgeKind { Static, Dynamic };

enum class RecordTag { Service, Objective, ActionProfile, State, Exemplar };

const char* to_string(RecordTag tag);
RecordTag parse_record_tag(const std::string& name);

struct KnowledgeRecord {
    RecordTag tag = RecordTag::State;
    EmbeddingVector vector;
    std::string payload;
    // Exemplar output reward; 0 for other records.
    double reward = 0.0;
};

struct ImmutableKnowledge : std::logic_error {
    using std::logic_error::logic_error;
};

struct OrderingError : std::logic_error {
    using std::logic_error::logic_error;
};

class KnowledgeBase {
public:
    explicit KnowledgeBase(KnowledgeKind kind) : kind_(kind) {}

    KnowledgeKind kind() const { return kind_; }
    bool frozen() const { return frozen_; }
    // Static bases reject writes once frozen.
    void freeze() { frozen_ = true; }

    long add(KnowledgeRecord record);
    void insert(long id, KnowledgeRecord record);
    void erase(long id);

    const std::map<long, KnowledgeRecord>& records() const { return records_; }
    const KnowledgeRecord& at(long id) const { return records_.at(id); }
    std::size_t size() const { return records_.size(); }
    std::size_t count(RecordTag tag) const;

private:
    void check_writable() const;

    KnowledgeKind kind_;
    bool frozen_ = false;
    long next_id_ = 0;
    std::map<long, KnowledgeRecord> records_;
};

struct ScoredRecord {
    long id = 0;
    double score = 0.0;
};

// k highest-cosine records, descending, ties by ascending id.
std::vector<ScoredRecord> query_topk(const KnowledgeBase& kb, const EmbeddingVector& query, int k,
                                     std::optional<RecordTag> tag = std::nullopt);

// Appends `state` to the window (evicting beyond W) and mirrors it as a
// State record in the dynamic base, keeping at most W such records.
StateHistory push_state(KnowledgeBase& dkb, StateHistory history, State state, int window);

struct CotStep {
    int user = 0;
    ActionDecision decision;
    double reward = 0.0;
};

struct ReasoningExemplar {
    EmbeddingVector input;
    ObjectiveKind objective = ObjectiveKind::MinCost;
    long slot = 0;
    std::vector<CotStep> cot;
    double output = 0.0;
};

std::string serialize_exemplar(const ReasoningExemplar& exemplar);
ReasoningExemplar parse_exemplar(const std::string& payload, const EmbeddingVector& input);

// Stores an exemplar (output recomputed as the CoT reward sum).
long store_exemplar(KnowledgeBase& dkb, ReasoningExemplar exemplar);

struct ContrastiveSelection {
    std::vector<long> high;  // highest reward first
    std::vector<long> low;   // lowest reward first
    bool degenerate = false;
};

// Among the m most similar exemplars, the k highest- and k lowest-reward
// ones. With fewer than 2k candidates the set is split at its reward median
// and flagged degenerate.
ContrastiveSelection select_contrastive(const KnowledgeBase& dkb, const EmbeddingVector& query,
                                        int m, int k);

// Line-delimited persistence: id<TAB>tag<TAB>v0,...,v255<TAB>payload
void save_knowledge(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_knowledge(const std::string& path, KnowledgeKind kind);

// Service specifications, objective profiles and action profiles.
KnowledgeBase build_static_knowledge(const std::vector<ServiceSpec>& services);

}  // namespace arc
