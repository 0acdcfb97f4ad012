#include "arc/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace arc {

namespace {

std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string state_digest(const State& s) {
    const StateLayout& L = s.layout;
    double compute = 0.0;
    for (int n = 0; n < L.num_nodes; ++n) compute += s.values[L.node_offset(n)];
    double links = 0.0;
    int present = 0;
    for (int a = 0; a < L.num_nodes; ++a) {
        for (int b = 0; b < L.num_nodes; ++b) {
            if (a == b) continue;
            const int o = L.link_offset(a, b);
            if (s.values[o] == 0.0) continue;
            ++present;
            links += s.values[o + 1];
        }
    }
    int requests = 0;
    for (int u = 0; u < L.num_users; ++u) requests += s.request_flag(u) > 0.5 ? 1 : 0;
    std::ostringstream os;
    os << "slot " << s.slot << ": requests " << requests << "/" << L.num_users << ", mean compute available "
       << fixed(L.num_nodes ? compute / L.num_nodes : 0.0) << ", links " << present
       << ", mean link capacity available " << fixed(present ? links / present : 0.0);
    return os.str();
}

void section(std::ostringstream& os, const char* title, const std::vector<std::string>& lines) {
    os << "## " << title << "\n";
    if (lines.empty()) os << "(none)\n";
    for (const auto& l : lines) os << l << "\n";
}

}  // namespace

std::string canonical_command(const std::string& text) {
    std::string out;
    bool space = false;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            if (space && !out.empty()) out.push_back(' ');
            space = false;
            out.push_back(static_cast<char>(std::tolower(u)));
        } else {
            space = true;
        }
    }
    return out;
}

Objective track_objective(const std::optional<StrategistCommand>& command, const Objective& current,
                          const KnowledgeBase& skb) {
    if (!command || canonical_command(command->text).empty()) return current;
    const auto top = query_topk(skb, embed(canonical_command(command->text)), 1, RecordTag::Objective);
    if (top.empty()) return current;
    return make_objective(parse_objective_kind(skb.at(top.front().id).payload));
}

QoeResult evaluate_qoe(const std::string& feedback, const ServiceSpec& service) {
    static const std::regex resolution(R"((\d{1,6})\s*[xX]\s*(\d{1,6}))");
    std::smatch m;
    if (!std::regex_search(feedback, m, resolution)) return {false, 0.0};
    const double pixels = std::stod(m[1].str()) * std::stod(m[2].str());
    const double score = std::min(1.0, pixels / (1920.0 * 1080.0));
    return {score >= service.qoe_threshold, score};
}

std::string AllocationPrompt::serialize() const {
    std::ostringstream os;
    os << header;
    os << "## State history\n" << history_digest;
    section(os, "Requesting users", users);
    section(os, "High-reward exemplars", exemplars_high);
    section(os, "Low-reward exemplars", exemplars_low);
    if (degenerate) os << "(exemplar selection degenerate: too few similar exemplars)\n";
    os << "## Output format\n"
          "Order the requesting users so that allocating them one by one in that order maximizes the "
          "total reward under the objective. Answer with one line of comma-separated user ids, for "
          "example: u3, u1, u2\n";
    return os.str();
}

std::string describe_exemplar(long id, const ReasoningExemplar& e) {
    std::ostringstream os;
    os << "exemplar " << id << " (objective " << to_string(e.objective) << ", total reward "
       << fixed(e.output) << "):";
    for (const auto& step : e.cot) {
        os << " [" << describe(step.decision) << ", reward " << fixed(step.reward) << "]";
    }
    return os.str();
}

AllocationPrompt build_allocation_prompt(const StateHistory& history, const Objective& objective,
                                         const std::vector<User>& requesting,
                                         const std::vector<ServiceSpec>& services,
                                         const KnowledgeBase& skb, const KnowledgeBase& dkb, int k, int m,
                                         ExemplarRanking ranking) {
    AllocationPrompt p;
    std::ostringstream header;
    header << "## Objective\n" << to_string(objective.kind) << ": " << objective.profile_text << "\n";
    header << "## Action profiles\n";
    std::vector<int> seen;
    for (const User& u : requesting) {
        if (std::find(seen.begin(), seen.end(), u.service) != seen.end()) continue;
        seen.push_back(u.service);
    }
    std::sort(seen.begin(), seen.end());
    for (int sid : seen) {
        const std::string prefix = "service " + std::to_string(sid) + ":";
        for (const auto& [id, r] : skb.records()) {
            if (r.tag == RecordTag::ActionProfile && r.payload.rfind(prefix, 0) == 0) header << r.payload << "\n";
        }
    }
    p.header = header.str();

    const std::size_t shown = std::min<std::size_t>(history.size(), 3);
    for (std::size_t i = history.size() - shown; i < history.size(); ++i) {
        p.history_digest += state_digest(history.states[i]) + "\n";
    }

    for (const User& u : requesting) {
        const ServiceSpec& s = find_service(services, u.service);
        double demand = 0.0;
        for (const auto& b : s.blocks) demand += b.compute_demand;
        p.user_ids.push_back(u.id);
        p.users.push_back("u" + std::to_string(u.id) + ": service " + std::to_string(s.id) + ", attach n" +
                          std::to_string(u.attach_node) + ", demand " + fixed(demand, 2) + " MIPS, rate " +
                          fixed(s.rate_requirement, 2) + " Mbps");
    }

    if (history.empty() || k < 1) {
        p.degenerate = true;
        return p;
    }
    const EmbeddingVector query = embed(history, objective);
    auto render = [&](long id) {
        const auto& r = dkb.at(id);
        return describe_exemplar(id, parse_exemplar(r.payload, r.vector));
    };
    if (ranking == ExemplarRanking::Contrastive) {
        const ContrastiveSelection sel = select_contrastive(dkb, query, std::max(m, 2 * k), k);
        p.degenerate = sel.degenerate;
        for (long id : sel.high) p.exemplars_high.push_back(render(id));
        for (long id : sel.low) p.exemplars_low.push_back(render(id));
    } else {
        const auto top = query_topk(dkb, query, 2 * k, RecordTag::Exemplar);
        p.degenerate = static_cast<int>(top.size()) < 2 * k;
        for (const auto& t : top) p.exemplars_high.push_back(render(t.id));
    }
    return p;
}

std::string UpdatePrompt::serialize() const {
    std::ostringstream os;
    os << "## Rewards for slot " << slot << "\n";
    for (const RewardRecord& r : records) {
        os << "u" << r.user << ": total " << fixed(r.total);
        for (const auto& [d, v] : r.per_action) os << "; " << describe(d) << " -> " << fixed(v);
        os << "\n";
    }
    return os.str();
}

long augment_experience(KnowledgeBase& dkb, const StateHistory& history, const Objective& objective,
                        const std::vector<CotStep>& cot) {
    if (cot.empty()) throw std::invalid_argument("augment_experience needs a nonempty chain of thought");
    ReasoningExemplar e;
    e.input = embed(history, objective);
    e.objective = objective.kind;
    e.slot = history.empty() ? 0 : history.latest().slot;
    e.cot = cot;
    return store_exemplar(dkb, std::move(e));
}

ChatEndpoint ChatEndpoint::from_environment() {
    ChatEndpoint e;
    if (const char* v = std::getenv("ARC_LLM_ENDPOINT")) e.url = v;
    if (const char* v = std::getenv("ARC_LLM_API_KEY")) e.api_key = v;
    if (const char* v = std::getenv("ARC_LLM_MODEL")) e.model = v;
    return e;
}

std::string chat_complete(const ChatEndpoint& endpoint, const std::string& prompt,
                          std::chrono::milliseconds deadline) {
    if (!endpoint.configured()) return kChatFailure;
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint.url, m, url_re)) return kChatFailure;
    const std::string base = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/v1/chat/completions";

    try {
        httplib::Client client(base);
        if (!client.is_valid()) return kChatFailure;
        const auto sec = std::chrono::duration_cast<std::chrono::seconds>(deadline);
        const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(deadline - sec);
        client.set_connection_timeout(sec.count(), usec.count());
        client.set_read_timeout(sec.count(), usec.count());
        client.set_write_timeout(sec.count(), usec.count());
        if (!endpoint.api_key.empty()) client.set_bearer_token_auth(endpoint.api_key);

        nlohmann::json body;
        body["model"] = endpoint.model;
        body["temperature"] = 0;
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
        const auto res = client.Post(path, body.dump(), "application/json");
        if (!res || res->status != 200) return kChatFailure;
        const auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception&) {
        return kChatFailure;
    }
}

}  // namespace arc
