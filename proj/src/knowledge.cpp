#include "arc/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace arc {

namespace {

using json = nlohmann::json;

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a",  "an",  "and", "are", "as",   "at",    "be",   "by",    "for", "in", "is",
        "it", "its", "of",  "on",  "or",   "that",  "the",  "their", "them", "to", "with",
        "all", "any", "this", "these", "those", "so", "then", "into"};
    return words;
}

void normalize(EmbeddingVector& v) {
    double sq = 0.0;
    for (double x : v.values) sq += x * x;
    if (sq == 0.0) {
        v.values.fill(0.0);
        v.values[0] = 1.0;
        return;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v.values) x *= inv;
}

int quantize(double v) { return static_cast<int>(std::lround(v * 10.0)); }

json decision_to_json(const ActionDecision& d) {
    json j;
    j["user"] = d.user;
    j["kind"] = to_string(d.kind);
    j["block"] = d.block;
    if (d.node) j["node"] = *d.node;
    j["path"] = d.path;
    j["compute"] = d.compute_amount;
    j["capacity"] = d.capacity_amount;
    j["action"] = d.action_index;
    return j;
}

ActionDecision decision_from_json(const json& j) {
    ActionDecision d;
    d.user = j.at("user").get<int>();
    d.kind = j.at("kind").get<std::string>() == "routing" ? ActionKind::Routing : ActionKind::Placement;
    d.block = j.at("block").get<int>();
    if (j.contains("node")) d.node = j.at("node").get<int>();
    d.path = j.at("path").get<std::vector<NodeId>>();
    d.compute_amount = j.at("compute").get<double>();
    d.capacity_amount = j.at("capacity").get<double>();
    d.action_index = j.at("action").get<int>();
    return d;
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\t' || c == '\r') c = ' ';
    }
    return s;
}

}  // namespace

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

std::vector<std::string> tokenize_text(std::string_view text) {
    std::vector<std::string> tokens;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        if (!stopwords().contains(word)) {
            tokens.push_back("w:" + word);
            const std::string padded = "^" + word + "$";
            for (std::size_t i = 0; i + 3 <= padded.size(); ++i) tokens.push_back("g:" + padded.substr(i, 3));
        }
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::vector<std::string> state_tokens(const State& state, std::string_view prefix) {
    std::vector<std::string> tokens;
    tokens.reserve(state.values.size());
    for (std::size_t i = 0; i < state.values.size(); ++i) {
        std::string t(prefix);
        t += "s";
        t += std::to_string(i);
        t += "=";
        t += std::to_string(quantize(state.values[i]));
        tokens.push_back(std::move(t));
    }
    return tokens;
}

EmbeddingVector embed_tokens(const std::vector<std::string>& tokens) {
    EmbeddingVector v;
    for (const auto& t : tokens) {
        const std::uint64_t h = fnv1a(t);
        const std::size_t bucket = h % kEmbeddingDim;
        v.values[bucket] += ((h >> 32) & 1U) ? 1.0 : -1.0;
    }
    normalize(v);
    return v;
}

EmbeddingVector embed(std::string_view text) { return embed_tokens(tokenize_text(text)); }

EmbeddingVector embed(const State& state) { return embed_tokens(state_tokens(state)); }

EmbeddingVector embed(const StateHistory& history) {
    std::vector<std::string> tokens;
    const std::size_t n = history.states.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto part = state_tokens(history.states[i], "t" + std::to_string(n - 1 - i) + ":");
        tokens.insert(tokens.end(), part.begin(), part.end());
    }
    return embed_tokens(tokens);
}

EmbeddingVector embed(const StateHistory& history, const Objective& objective) {
    const EmbeddingVector h = embed(history);
    const EmbeddingVector o = embed_tokens({std::string("objective=") + to_string(objective.kind)});
    EmbeddingVector out;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) out.values[i] = h.values[i] + o.values[i];
    normalize(out);
    return out;
}

const char* to_string(RecordTag tag) {
    switch (tag) {
        case RecordTag::Service: return "service";
        case RecordTag::Objective: return "objective";
        case RecordTag::ActionProfile: return "action_profile";
        case RecordTag::State: return "state";
        case RecordTag::Exemplar: return "exemplar";
    }
    return "?";
}

RecordTag parse_record_tag(const std::string& name) {
    for (RecordTag t : {RecordTag::Service, RecordTag::Objective, RecordTag::ActionProfile,
                        RecordTag::State, RecordTag::Exemplar}) {
        if (name == to_string(t)) return t;
    }
    throw std::invalid_argument("unknown record tag " + name);
}

void KnowledgeBase::check_writable() const {
    if (frozen_) throw ImmutableKnowledge("static knowledge base is read-only after load");
}

long KnowledgeBase::add(KnowledgeRecord record) {
    check_writable();
    const long id = next_id_++;
    records_.emplace(id, std::move(record));
    return id;
}

void KnowledgeBase::insert(long id, KnowledgeRecord record) {
    check_writable();
    records_[id] = std::move(record);
    next_id_ = std::max(next_id_, id + 1);
}

void KnowledgeBase::erase(long id) {
    check_writable();
    records_.erase(id);
}

std::size_t KnowledgeBase::count(RecordTag tag) const {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                  [&](const auto& r) { return r.second.tag == tag; }));
}

std::vector<ScoredRecord> query_topk(const KnowledgeBase& kb, const EmbeddingVector& query, int k,
                                     std::optional<RecordTag> tag) {
    if (k < 1) throw std::invalid_argument("query_topk needs k >= 1");
    std::vector<ScoredRecord> scored;
    for (const auto& [id, record] : kb.records()) {
        if (tag && record.tag != *tag) continue;
        scored.push_back({id, cosine(query, record.vector)});
    }
    auto better = [](const ScoredRecord& a, const ScoredRecord& b) {
        return a.score > b.score || (a.score == b.score && a.id < b.id);
    };
    const std::size_t keep = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(k));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<long>(keep), scored.end(), better);
    scored.resize(keep);
    return scored;
}

StateHistory push_state(KnowledgeBase& dkb, StateHistory history, State state, int window) {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (!history.empty() && state.slot <= history.latest().slot) {
        throw OrderingError("state slot " + std::to_string(state.slot) + " not after " +
                            std::to_string(history.latest().slot));
    }
    KnowledgeRecord record;
    record.tag = RecordTag::State;
    record.vector = embed(state);
    record.payload = "slot=" + std::to_string(state.slot);
    dkb.add(std::move(record));

    history.states.push_back(std::move(state));
    while (static_cast<int>(history.states.size()) > window) history.states.pop_front();

    std::vector<long> state_ids;
    for (const auto& [id, r] : dkb.records()) {
        if (r.tag == RecordTag::State) state_ids.push_back(id);
    }
    for (std::size_t i = 0; i + static_cast<std::size_t>(window) < state_ids.size(); ++i) {
        dkb.erase(state_ids[i]);
    }
    return history;
}

std::string serialize_exemplar(const ReasoningExemplar& e) {
    json j;
    j["objective"] = to_string(e.objective);
    j["slot"] = e.slot;
    j["output"] = e.output;
    json cot = json::array();
    for (const auto& step : e.cot) {
        json s;
        s["user"] = step.user;
        s["decision"] = decision_to_json(step.decision);
        s["reward"] = step.reward;
        cot.push_back(std::move(s));
    }
    j["cot"] = std::move(cot);
    return j.dump();
}

ReasoningExemplar parse_exemplar(const std::string& payload, const EmbeddingVector& input) {
    const json j = json::parse(payload);
    ReasoningExemplar e;
    e.input = input;
    e.objective = parse_objective_kind(j.at("objective").get<std::string>());
    e.slot = j.at("slot").get<long>();
    e.output = j.at("output").get<double>();
    for (const auto& s : j.at("cot")) {
        e.cot.push_back({s.at("user").get<int>(), decision_from_json(s.at("decision")),
                         s.at("reward").get<double>()});
    }
    return e;
}

long store_exemplar(KnowledgeBase& dkb, ReasoningExemplar exemplar) {
    double total = 0.0;
    for (const auto& step : exemplar.cot) total += step.reward;
    exemplar.output = total;
    KnowledgeRecord record;
    record.tag = RecordTag::Exemplar;
    record.vector = exemplar.input;
    record.reward = total;
    record.payload = serialize_exemplar(exemplar);
    return dkb.add(std::move(record));
}

ContrastiveSelection select_contrastive(const KnowledgeBase& dkb, const EmbeddingVector& query, int m,
                                        int k) {
    if (k < 1 || m < 2 * k) throw std::invalid_argument("select_contrastive needs m >= 2k >= 2");
    ContrastiveSelection out;
    auto candidates = query_topk(dkb, query, m, RecordTag::Exemplar);
    if (candidates.empty()) {
        out.degenerate = true;
        return out;
    }
    std::vector<std::pair<double, long>> ranked;
    for (const auto& c : candidates) ranked.emplace_back(dkb.at(c.id).reward, c.id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    const std::size_t n = ranked.size();
    std::size_t high_count = static_cast<std::size_t>(k);
    std::size_t low_count = static_cast<std::size_t>(k);
    if (n < 2 * static_cast<std::size_t>(k)) {
        out.degenerate = true;
        high_count = (n + 1) / 2;
        low_count = n - high_count;
    }
    for (std::size_t i = 0; i < high_count; ++i) out.high.push_back(ranked[i].second);
    for (std::size_t i = 0; i < low_count; ++i) out.low.push_back(ranked[n - 1 - i].second);
    return out;
}

void save_knowledge(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[32];
    for (const auto& [id, r] : kb.records()) {
        out << id << '\t' << to_string(r.tag) << '\t';
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.vector.values[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\t' << one_line(r.payload) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

KnowledgeBase load_knowledge(const std::string& path, KnowledgeKind kind) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    KnowledgeBase kb(kind);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id_text, tag_text, vec_text, payload;
        if (!std::getline(fields, id_text, '\t') || !std::getline(fields, tag_text, '\t') ||
            !std::getline(fields, vec_text, '\t')) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed record");
        }
        std::getline(fields, payload);
        KnowledgeRecord r;
        r.tag = parse_record_tag(tag_text);
        std::istringstream values(vec_text);
        std::string v;
        std::size_t i = 0;
        while (std::getline(values, v, ',')) {
            if (i >= kEmbeddingDim) break;
            r.vector.values[i++] = std::stod(v);
        }
        if (i != kEmbeddingDim) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": vector length");
        }
        r.payload = payload;
        if (r.tag == RecordTag::Exemplar) r.reward = json::parse(payload).at("output").get<double>();
        kb.insert(std::stol(id_text), std::move(r));
    }
    if (kind == KnowledgeKind::Static) kb.freeze();
    return kb;
}

KnowledgeBase build_static_knowledge(const std::vector<ServiceSpec>& services) {
    KnowledgeBase skb(KnowledgeKind::Static);
    for (const auto& s : services) {
        std::ostringstream os;
        os << "service " << s.id << ": blocks [";
        for (std::size_t b = 0; b < s.blocks.size(); ++b) {
            os << (b ? ", " : "") << s.blocks[b].compute_demand << " MIPS";
        }
        os << "]; qoe requirement '" << s.qoe_requirement << "' threshold " << s.qoe_threshold
           << "; rate " << s.rate_requirement << " Mbps";
        KnowledgeRecord r;
        r.tag = RecordTag::Service;
        r.payload = one_line(os.str());
        r.vector = embed(r.payload);
        skb.add(std::move(r));
    }
    for (ObjectiveKind kind : {ObjectiveKind::MinCost, ObjectiveKind::MaxQuality, ObjectiveKind::LoadBalance}) {
        const Objective o = make_objective(kind);
        KnowledgeRecord r;
        r.tag = RecordTag::Objective;
        r.payload = to_string(kind);
        r.vector = embed(o.profile_text);
        skb.add(std::move(r));
    }
    for (const auto& s : services) {
        std::ostringstream os;
        os << "service " << s.id << ":";
        for (const auto& step : action_profile(s).steps) {
            os << " " << to_string(step.kind);
            if (step.kind == ActionKind::Placement) os << "(block " << step.block << ")";
        }
        KnowledgeRecord r;
        r.tag = RecordTag::ActionProfile;
        r.payload = os.str();
        r.vector = embed(r.payload);
        skb.add(std::move(r));
    }
    skb.freeze();
    return skb;
}

}  // namespace arc
