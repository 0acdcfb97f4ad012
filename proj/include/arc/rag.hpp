#pragma once
// Objective tracking, QoE evaluation, prompts, experience augmentation and
// the chat-completions client.

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "arc/knowledge.hpp"

namespace arc {

struct StrategistCommand {
    std::string text;
    long slot = 0;
};

// Lowercased, punctuation replaced by spaces, whitespace collapsed.
std::string canonical_command(const std::string& text);

// Without a command the current objective stays active; otherwise the
// objective profile most similar to the command is activated.
Objective track_objective(const std::optional<StrategistCommand>& command, const Objective& current,
                          const KnowledgeBase& skb);

struct QoeResult {
    bool met = false;
    double score = 0.0;
};

// Offline evaluator: score = min(1, W*H / (1920*1080)) from the first WxH in
// the feedback; met iff score >= threshold.
QoeResult evaluate_qoe(const std::string& feedback, const ServiceSpec& service);

enum class ExemplarRanking { Contrastive, SimilarityOnly };

struct AllocationPrompt {
    std::string header;
    std::string history_digest;
    std::vector<int> user_ids;
    std::vector<std::string> users;
    std::vector<std::string> exemplars_high;
    std::vector<std::string> exemplars_low;
    bool degenerate = false;

    std::string serialize() const;
};

AllocationPrompt build_allocation_prompt(const StateHistory& history, const Objective& objective,
                                         const std::vector<User>& requesting,
                                         const std::vector<ServiceSpec>& services,
                                         const KnowledgeBase& skb, const KnowledgeBase& dkb, int k, int m,
                                         ExemplarRanking ranking = ExemplarRanking::Contrastive);

std::string describe_exemplar(long id, const ReasoningExemplar& exemplar);

struct UpdatePrompt {
    long slot = 0;
    std::vector<RewardRecord> records;

    std::string serialize() const;
};

// Stores the slot's chain of thought as a reasoning exemplar keyed by
// (history, objective).
long augment_experience(KnowledgeBase& dkb, const StateHistory& history, const Objective& objective,
                        const std::vector<CotStep>& cot);

inline constexpr const char* kChatFailure = "<chat failure>";

struct ChatEndpoint {
    // e.g. http://127.0.0.1:8000/v1/chat/completions
    std::string url;
    std::string api_key;
    std::string model = "default";

    bool configured() const { return !url.empty(); }
    // ARC_LLM_ENDPOINT, ARC_LLM_API_KEY, ARC_LLM_MODEL.
    static ChatEndpoint from_environment();
};

// One user message, temperature 0. Any transport, status, parse or
// deadline problem yields kChatFailure.
std::string chat_complete(const ChatEndpoint& endpoint, const std::string& prompt,
                          std::chrono::milliseconds deadline);

}  // namespace arc
