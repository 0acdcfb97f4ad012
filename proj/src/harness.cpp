#include "arc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace arc {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

class LineParser {
public:
    LineParser(int line, std::string key, std::string value)
        : line_(line), key_(std::move(key)), value_(std::move(value)) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ScenarioError("line " + std::to_string(line_) + ": " + what);
    }
    double number() const {
        try {
            std::size_t used = 0;
            const double v = std::stod(value_, &used);
            if (used != value_.size() || !std::isfinite(v)) fail("bad number for " + key_);
            return v;
        } catch (const std::logic_error&) {
            fail("bad number for " + key_);
        }
    }
    long integer() const {
        try {
            std::size_t used = 0;
            const long v = std::stol(value_, &used);
            if (used != value_.size()) fail("bad integer for " + key_);
            return v;
        } catch (const std::logic_error&) {
            fail("bad integer for " + key_);
        }
    }
    const std::string& text() const { return value_; }

private:
    int line_;
    std::string key_;
    std::string value_;
};

ServiceSpec& service_slot(ScenarioConfig& c, int id) {
    for (auto& s : c.services) {
        if (s.id == id) return s;
    }
    c.services.push_back({id, {}, "the image must be 1920x1080", 0.99, 0.0});
    return c.services.back();
}

User& user_slot(ScenarioConfig& c, int id) {
    for (auto& u : c.users) {
        if (u.id == id) return u;
    }
    c.users.push_back({id, 0, 0});
    return c.users.back();
}

// Samples a joint option for a user with probability proportional to
// exp(reward / temperature); later steps replay the sampled option.
class SampledOptionPolicy : public DecisionPolicy {
public:
    SampledOptionPolicy(double temperature, std::mt19937_64& rng) : temperature_(temperature), rng_(rng) {}

    int choose(const MaskedState& masked, const ChoiceContext& ctx) override {
        if (ctx.step.kind == ActionKind::Placement && ctx.step.block == 0) pick(ctx);
        for (const ActionDecision& d : chosen_) {
            if (d.kind == ctx.step.kind && d.block == ctx.step.block &&
                d.action_index < static_cast<int>(masked.decisions.size()) && masked.decisions[d.action_index] &&
                *masked.decisions[d.action_index] == d) {
                return d.action_index;
            }
        }
        return masked.feasible_indices().front();
    }

private:
    void pick(const ChoiceContext& ctx) {
        chosen_.clear();
        const std::vector<UserOption> options = enumerate_user_options(ctx.topology, ctx.user, ctx.service, ctx.limits);
        if (options.empty()) return;
        std::vector<double> rewards;
        for (const UserOption& o : options) {
            Topology scratch = ctx.topology;
            rewards.push_back(apply_option(scratch, o, ctx.objective, ctx.service));
        }
        const double top = *std::max_element(rewards.begin(), rewards.end());
        std::vector<double> weights;
        for (double r : rewards) weights.push_back(std::exp((r - top) / temperature_));
        std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
        chosen_ = options[dist(rng_)].decisions;
    }

    double temperature_;
    std::mt19937_64& rng_;
    std::vector<ActionDecision> chosen_;
};

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

const char* to_string(Mode mode) {
    switch (mode) {
        case Mode::Arc: return "arc";
        case Mode::RuArc: return "ru-arc";
        case Mode::NrArc: return "nr-arc";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    if (name == "arc") return Mode::Arc;
    if (name == "ru-arc") return Mode::RuArc;
    if (name == "nr-arc") return Mode::NrArc;
    throw ScenarioError("unknown mode: " + name);
}

ScenarioConfig parse_scenario(const std::string& text) {
    ScenarioConfig c;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int section_id = -1;
    int line_no = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ScenarioError("line " + std::to_string(line_no) + ": bad section");
            std::istringstream head(line.substr(1, line.size() - 2));
            head >> section;
            section_id = -1;
            std::string id;
            if (head >> id) {
                if (section != "service" && section != "user") {
                    throw ScenarioError("line " + std::to_string(line_no) + ": unexpected id in [" + section + "]");
                }
                try {
                    section_id = std::stoi(id);
                } catch (const std::logic_error&) {
                    throw ScenarioError("line " + std::to_string(line_no) + ": bad id " + id);
                }
                if (section == "service") service_slot(c, section_id);
                if (section == "user") user_slot(c, section_id);
            } else if (section == "service" || section == "user") {
                throw ScenarioError("line " + std::to_string(line_no) + ": [" + section + "] needs an id");
            }
            static const std::vector<std::string> known{"network", "users", "service", "user", "agents",
                                                        "knowledge", "run", "events", "nr"};
            if (std::find(known.begin(), known.end(), section) == known.end()) {
                throw ScenarioError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ScenarioError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const LineParser v(line_no, key, trim(line.substr(eq + 1)));
        auto unknown = [&] { v.fail("unknown key '" + key + "' in [" + section + "]"); };

        if (section.empty()) {
            v.fail("key outside any section");
        } else if (section == "network") {
            auto& n = c.network;
            if (key == "ground") n.ground_nodes = static_cast<int>(v.integer());
            else if (key == "air") n.air_nodes = static_cast<int>(v.integer());
            else if (key == "space") n.space_nodes = static_cast<int>(v.integer());
            else if (key == "area_km") n.area_km = v.number();
            else if (key == "air_altitude_km") n.air_altitude_km = v.number();
            else if (key == "space_altitude_km") n.space_altitude_km = v.number();
            else if (key == "air_period") n.air_period = static_cast<int>(v.integer());
            else if (key == "space_period") n.space_period = static_cast<int>(v.integer());
            else if (key == "compute_min") n.compute_min = v.number();
            else if (key == "compute_max") n.compute_max = v.number();
            else if (key == "neighbours") n.neighbours = static_cast<int>(v.integer());
            else if (key == "max_hops") c.limits.max_hops = static_cast<int>(v.integer());
            else if (key == "route_limit") c.limits.route_limit = static_cast<int>(v.integer());
            else unknown();
        } else if (section == "users") {
            auto& g = c.generate;
            if (key == "count") g.count = static_cast<int>(v.integer());
            else if (key == "demand_min") g.demand_min = v.number();
            else if (key == "demand_max") g.demand_max = v.number();
            else if (key == "rate_min") g.rate_min = v.number();
            else if (key == "rate_max") g.rate_max = v.number();
            else if (key == "qoe") g.qoe = v.text();
            else if (key == "qoe_threshold") g.qoe_threshold = v.number();
            else unknown();
        } else if (section == "service") {
            ServiceSpec& s = service_slot(c, section_id);
            if (key == "blocks") {
                s.blocks.clear();
                for (const std::string& item : split_list(v.text())) {
                    const LineParser b(line_no, key, item);
                    s.blocks.push_back({static_cast<int>(s.blocks.size()), b.number()});
                }
            } else if (key == "rate") s.rate_requirement = v.number();
            else if (key == "qoe") s.qoe_requirement = v.text();
            else if (key == "qoe_threshold") s.qoe_threshold = v.number();
            else unknown();
        } else if (section == "user") {
            User& u = user_slot(c, section_id);
            if (key == "attach") u.attach_node = static_cast<NodeId>(v.integer());
            else if (key == "service") u.service = static_cast<int>(v.integer());
            else unknown();
        } else if (section == "agents") {
            auto& a = c.agent;
            if (key == "hidden") a.hidden = static_cast<int>(v.integer());
            else if (key == "buffer") a.buffer_capacity = static_cast<std::size_t>(v.integer());
            else if (key == "batch") a.batch_size = static_cast<int>(v.integer());
            else if (key == "gamma") a.gamma = v.number();
            else if (key == "learning_rate") a.learning_rate = v.number();
            else if (key == "epsilon_start") a.epsilon_start = v.number();
            else if (key == "epsilon_end") a.epsilon_end = v.number();
            else if (key == "epsilon_decay_slots") a.epsilon_decay_slots = v.integer();
            else if (key == "sync_every") a.sync_every = v.integer();
            else if (key == "train_steps_per_slot") a.train_steps_per_slot = static_cast<int>(v.integer());
            else if (key == "compare_sample") a.compare_sample = static_cast<int>(v.integer());
            else unknown();
        } else if (section == "knowledge") {
            if (key == "window") c.window = static_cast<int>(v.integer());
            else if (key == "adapt_every") c.window_adapt_every = v.integer();
            else if (key == "adapt_drop") c.window_adapt_drop = v.number();
            else if (key == "k") c.exemplar_k = static_cast<int>(v.integer());
            else if (key == "m") c.exemplar_m = static_cast<int>(v.integer());
            else if (key == "bootstrap") c.bootstrap_exemplars = static_cast<int>(v.integer());
            else if (key == "bootstrap_users") c.bootstrap_users = static_cast<int>(v.integer());
            else unknown();
        } else if (section == "run") {
            if (key == "iterations") c.iterations = v.integer();
            else if (key == "seed") c.seed = static_cast<std::uint64_t>(v.integer());
            else if (key == "mode") c.mode = parse_mode(v.text());
            else if (key == "backend") c.backend = parse_backend(v.text());
            else if (key == "objective") c.objective = parse_objective_kind(v.text());
            else if (key == "pretrain") c.pretrain_slots = v.integer();
            else if (key == "hold_slots") c.hold_slots = static_cast<int>(v.integer());
            else if (key == "chat_deadline_ms") c.chat_deadline_ms = v.integer();
            else unknown();
        } else if (section == "events") {
            ScheduledEvent e;
            e.iteration = LineParser(line_no, "iteration", key).integer();
            const std::string& what = v.text();
            if (what == "swap") {
                e.perturbation = PerturbationEvent{e.iteration, EventKind::LatencySwap};
            } else if (what.rfind("command:", 0) == 0) {
                e.command = StrategistCommand{trim(what.substr(8)), e.iteration};
            } else {
                v.fail("unknown event '" + what + "'");
            }
            c.events.push_back(e);
        } else if (section == "nr") {
            if (key == "temperature") c.nr_temperature = v.number();
            else unknown();
        }
    }
    std::stable_sort(c.events.begin(), c.events.end(),
                     [](const ScheduledEvent& a, const ScheduledEvent& b) { return a.iteration < b.iteration; });
    std::sort(c.services.begin(), c.services.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::sort(c.users.begin(), c.users.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

void validate(const ScenarioConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    const int nodes = c.network.ground_nodes + c.network.air_nodes + c.network.space_nodes;
    require(c.iterations >= 1, "iterations must be at least 1");
    require(c.pretrain_slots >= 0, "pretrain must be non-negative");
    require(c.hold_slots >= 1, "hold_slots must be at least 1");
    require(c.window >= 1, "window must be at least 1");
    require(c.window_adapt_every >= 0 && c.window_adapt_drop >= 0.0, "bad window adaptation");
    require(c.exemplar_k >= 1 && c.exemplar_m >= 2 * c.exemplar_k, "need k >= 1 and m >= 2k");
    require(c.bootstrap_exemplars == 0 || c.bootstrap_exemplars >= 3, "bootstrap needs 0 or at least 3 exemplars");
    require(c.bootstrap_users >= 1, "bootstrap_users must be at least 1");
    require(c.nr_temperature > 0.0, "nr temperature must be positive");
    require(c.limits.max_hops >= 1 && c.limits.route_limit >= 1, "max_hops and route_limit must be positive");
    require(c.agent.hidden >= 1 && c.agent.batch_size >= 1 && c.agent.buffer_capacity >= 1, "bad agent sizes");
    require(c.agent.sync_every >= 1 && c.agent.train_steps_per_slot >= 0, "bad agent schedule");
    require(c.agent.gamma >= 0.0 && c.agent.gamma <= 1.0, "gamma must lie in [0, 1]");
    require(c.users.empty() || c.generate.count == 0, "give either [users] count or [user] sections, not both");
    require(c.generate.count >= 0, "user count must be non-negative");
    require(c.generate.demand_min > 0.0 && c.generate.demand_min <= c.generate.demand_max, "bad demand range");
    require(c.generate.rate_min >= 0.0 && c.generate.rate_min <= c.generate.rate_max, "bad rate range");
    for (const ServiceSpec& s : c.services) {
        require(!s.blocks.empty(), "service " + std::to_string(s.id) + " has no blocks");
        require(s.qoe_threshold > 0.0 && s.qoe_threshold <= 1.0, "qoe_threshold must lie in (0, 1]");
        for (const auto& b : s.blocks) require(b.compute_demand > 0.0, "block demand must be positive");
    }
    for (std::size_t i = 0; i < c.users.size(); ++i) {
        const User& u = c.users[i];
        require(u.id == static_cast<int>(i), "user ids must be 0..n-1");
        require(u.attach_node >= 0 && u.attach_node < nodes, "user attach node out of range");
        const bool known = std::any_of(c.services.begin(), c.services.end(),
                                       [&](const ServiceSpec& s) { return s.id == u.service; });
        require(known, "user " + std::to_string(u.id) + " references an unknown service");
    }
}

Population materialize(const ScenarioConfig& c, const Topology& topology) {
    if (!c.users.empty() || c.generate.count == 0) return {c.users, c.services};
    Population p;
    std::vector<NodeId> ground;
    for (const Node& n : topology.nodes) {
        if (n.layer == Layer::Ground) ground.push_back(n.id);
    }
    std::mt19937_64 rng = stream(c.seed, 2);
    std::uniform_int_distribution<std::size_t> attach(0, ground.size() - 1);
    std::uniform_real_distribution<double> demand(c.generate.demand_min, c.generate.demand_max);
    std::uniform_real_distribution<double> rate(c.generate.rate_min, c.generate.rate_max);
    for (int i = 0; i < c.generate.count; ++i) {
        ServiceSpec s{i, {{0, demand(rng)}}, c.generate.qoe, c.generate.qoe_threshold, rate(rng)};
        p.services.push_back(s);
        p.users.push_back({i, ground[attach(rng)], i});
    }
    return p;
}

Simulation::Simulation(ScenarioConfig config, RunHooks hooks, std::optional<Pretrained> pretrained, RunStats* stats)
    : config_(std::move(config)),
      hooks_(std::move(hooks)),
      stats_(stats ? stats : &local_stats_),
      rng_(stream(config_.seed, 3)),
      act_rng_(stream(config_.seed, 4)),
      replay_rng_(stream(config_.seed, 5)),
      skb_(KnowledgeKind::Static) {
    validate(config_);
    window_ = config_.window;
    topology_ = build_topology(config_.network, config_.seed);
    Population p = materialize(config_, topology_);
    users_ = std::move(p.users);
    services_ = std::move(p.services);
    allocations_.resize(users_.size());
    skb_ = build_static_knowledge(services_);
    objective_ = make_objective(config_.objective);
    history_.objective = objective_;

    if (pretrained) {
        dkb_ = std::move(pretrained->dkb);
        slot_offset_ = pretrained->slots;
        bootstrapped_ = true;
        if (config_.mode != Mode::NrArc) agents_ = std::move(pretrained->agents);
    } else if (config_.mode != Mode::NrArc) {
        std::mt19937_64 init = stream(config_.seed, 6);
        const int dim = masked_dimension(topology_.num_nodes());
        agents_ = std::array<Agent, kNumActionKinds>{
            make_agent(ActionKind::Placement, dim, action_count(ActionKind::Placement, topology_.num_nodes(), config_.limits),
                       config_.agent, init),
            make_agent(ActionKind::Routing, dim, action_count(ActionKind::Routing, topology_.num_nodes(), config_.limits),
                       config_.agent, init)};
        stats_->agents_constructed += kNumActionKinds;
    }
}

Pretrained Simulation::release_learned() {
    if (!agents_) throw std::logic_error("no agents to release");
    Pretrained p{std::move(*agents_), std::move(dkb_), slot_offset_ + iteration_};
    agents_.reset();
    return p;
}

void Simulation::evaluate_standing(std::vector<bool>& qoe_met) {
    for (User& u : users_) {
        auto& alloc = allocations_[u.id];
        if (u.status != UserStatus::Served || !alloc) {
            u.status = UserStatus::Requesting;
            continue;
        }
        const ServiceSpec& service = find_service(services_, u.service);
        const QoeResult q = evaluate_qoe(render_feedback(u, &*alloc, topology_, service), service);
        qoe_met[u.id] = q.met;
        if (!q.met) ++stats_->qoe_failures;
        if (!q.met || iteration_ - alloc->slot >= config_.hold_slots) {
            release(topology_, *alloc);
            alloc.reset();
            u.status = UserStatus::Requesting;
        }
    }
}

void Simulation::learn(const std::vector<RewardRecord>& rewards) {
    if (!agents_ || config_.mode != Mode::Arc) return;
    std::size_t cursor = 0;
    for (const RewardRecord& r : rewards) {
        double to_go = 0.0;
        std::vector<double> returns(r.per_action.size());
        for (std::size_t i = r.per_action.size(); i-- > 0;) {
            to_go += r.per_action[i].second;
            returns[i] = to_go;
        }
        for (std::size_t i = 0; i < r.per_action.size(); ++i, ++cursor) {
            const StepRecord& s = pending_->steps.at(cursor);
            if (s.user != r.user) throw std::logic_error("reward records out of step with execution");
            Agent& agent = (*agents_)[static_cast<int>(s.kind)];
            Transition t;
            t.state = s.masked;
            t.action = s.action;
            t.reward = returns[i];
            t.next_state = s.masked;
            gdss_insert(agent.buffer, std::move(t), agent.training, agent.config.gamma, agent.config.compare_sample,
                        replay_rng_);
            ++stats_->transitions_offered;
        }
    }
    for (Agent& agent : *agents_) {
        for (int k = 0; k < agent.config.train_steps_per_slot; ++k) {
            if (!train_step(agent, agent.config.batch_size, agent.config.gamma, agent.config.learning_rate,
                            replay_rng_)) {
                break;
            }
            ++stats_->train_calls;
            if (agent.train_steps % agent.config.sync_every == 0) sync(agent);
        }
    }
}

MetricsRow Simulation::metrics(const std::vector<RewardRecord>& rewards) const {
    MetricsRow row;
    row.iteration = iteration_;
    row.mode = config_.mode;
    std::vector<User> served;
    double achieved = 0.0;
    for (const User& u : users_) {
        if (u.status != UserStatus::Served || !allocations_[u.id]) continue;
        served.push_back(u);
        achieved += allocation_cost(topology_, *allocations_[u.id]);
    }
    row.supported_users = static_cast<int>(served.size());
    if (!rewards.empty()) {
        double total = 0.0;
        for (const RewardRecord& r : rewards) total += r.total;
        row.mean_reward = total / static_cast<double>(rewards.size());
    }
    if (served.empty() || achieved <= 0.0) return row;

    const OracleBounds bounds;
    std::optional<double> lower;
    if (static_cast<int>(served.size()) <= bounds.max_users && topology_.num_nodes() <= bounds.max_nodes) {
        lower = min_cost_allocation(topology_, served, services_, config_.limits, bounds);
    }
    if (!lower) {
        const Topology free = fully_available(topology_);
        double sum = 0.0;
        for (const User& u : served) {
            sum += contention_free_cost(free, u, find_service(services_, u.service), config_.limits).value_or(0.0);
        }
        lower = sum;
    }
    row.normalized_cost_score = std::clamp(*lower / achieved, 0.0, 1.0);
    return row;
}

void Simulation::adapt_window(const std::vector<RewardRecord>& rewards) {
    const long every = config_.window_adapt_every;
    if (every <= 0) return;
    if (!rewards.empty()) {
        double total = 0.0;
        for (const RewardRecord& r : rewards) total += r.total;
        block_reward_ += total / static_cast<double>(rewards.size());
    }
    if ((iteration_ + 1) % every != 0) return;
    const double mean = block_reward_ / static_cast<double>(every);
    if (!previous_block_reward_ || mean >= *previous_block_reward_ - config_.window_adapt_drop) {
        window_ = std::max(1, window_ - 1);
    }
    previous_block_reward_ = mean;
    block_reward_ = 0.0;
}

MetricsRow Simulation::step() {
    if (iteration_ > 0) topology_ = advance(topology_);
    topology_.slot = iteration_;
    if (hooks_.after_advance) hooks_.after_advance(iteration_, topology_);

    std::vector<bool> qoe_met(users_.size(), false);
    evaluate_standing(qoe_met);

    std::vector<RewardRecord> rewards;
    if (pending_ && !pending_->decisions.empty()) {
        rewards = compute_reward(pending_->decisions, pending_->objective, qoe_met, pending_->granted, users_,
                                 services_);
        learn(rewards);
        std::vector<CotStep> cot;
        for (const RewardRecord& r : rewards) {
            for (const auto& [d, v] : r.per_action) cot.push_back({r.user, d, v});
        }
        augment_experience(dkb_, pending_->history, pending_->objective, cot);
        ++stats_->exemplars_stored;
    }
    adapt_window(rewards);

    State state = index_state(topology_, users_, services_, allocations_, kept_allocations(users_, allocations_));
    state.slot = iteration_;
    indexed_ = state;
    history_ = push_state(dkb_, std::move(history_), std::move(state), window_);

    for (const ScheduledEvent& e : config_.events) {
        if (e.iteration == iteration_ && e.command) objective_ = track_objective(e.command, objective_, skb_);
    }
    history_.objective = objective_;

    std::vector<User> requesting;
    std::vector<int> requesting_ids;
    for (const User& u : users_) {
        if (u.status != UserStatus::Served) {
            requesting.push_back(u);
            requesting_ids.push_back(u.id);
        }
    }

    if (!bootstrapped_) {
        bootstrapped_ = true;
        if (config_.bootstrap_exemplars >= 3 && !requesting.empty()) {
            const OracleBounds bounds{config_.bootstrap_users, topology_.num_nodes()};
            stats_->exemplars_stored += bootstrap_exemplars(dkb_, history_, topology_, requesting, services_,
                                                            objective_, config_.bootstrap_exemplars, config_.limits,
                                                            bounds, rng_);
        }
    }

    const ExemplarRanking ranking =
        config_.mode == Mode::RuArc ? ExemplarRanking::SimilarityOnly : ExemplarRanking::Contrastive;
    const AllocationPrompt prompt = build_allocation_prompt(history_, objective_, requesting, services_, skb_, dkb_,
                                                            config_.exemplar_k, config_.exemplar_m, ranking);
    SequencerContext ctx{topology_, users_, services_, objective_, config_.limits, OracleBounds{},
                         config_.backend == Backend::Remote ? ChatEndpoint::from_environment() : ChatEndpoint{},
                         std::chrono::milliseconds(config_.chat_deadline_ms)};
    const Sequence sequence = sequence_users(prompt, config_.backend, ctx);
    if (sequence.backend_used != config_.backend) ++stats_->remote_fallbacks;
    if (config_.backend == Backend::Remote) last_prompt_ = prompt.serialize();

    Pending next;
    next.history = history_;
    next.objective = objective_;

    ExecutionResult result;
    if (agents_) {
        for (Agent& a : *agents_) a.epsilon = epsilon_at(a.config, slot_offset_ + iteration_);
        AgentPolicy policy({&(*agents_)[0], &(*agents_)[1]}, act_rng_);
        result = execute_sequence(sequence, history_, policy, topology_, users_, services_, allocations_, objective_,
                                  config_.limits);
    } else {
        SampledOptionPolicy policy(config_.nr_temperature, act_rng_);
        result = execute_sequence(sequence, history_, policy, topology_, users_, services_, allocations_, objective_,
                                  config_.limits);
    }
    next.decisions = std::move(result.decisions);
    next.steps = std::move(result.steps);
    next.granted = topology_;
    pending_ = std::move(next);

    MetricsRow row{iteration_, config_.mode, 0.0, 0, 0.0};
    if (metrics_on_) row = metrics(rewards);

    for (const ScheduledEvent& e : config_.events) {
        if (e.iteration == iteration_ && e.perturbation) topology_ = apply_perturbation(topology_, *e.perturbation);
    }
    if (hooks_.observer) {
        hooks_.observer(SlotView{iteration_, topology_, users_, allocations_, rewards, objective_, history_, indexed_});
    }
    ++iteration_;
    return row;
}

Pretrained pretrain(const ScenarioConfig& config, RunStats* stats) {
    ScenarioConfig warm = config;
    warm.mode = Mode::Arc;
    warm.events.clear();
    warm.iterations = std::max<long>(1, config.pretrain_slots);
    Simulation sim(warm, {}, std::nullopt, stats);
    sim.set_metrics(false);
    for (long t = 0; t < config.pretrain_slots; ++t) sim.step();
    return sim.release_learned();
}

std::vector<MetricsRow> run(const ScenarioConfig& config, const RunHooks& hooks, RunStats* stats) {
    validate(config);
    std::optional<Pretrained> warm;
    if (config.mode != Mode::NrArc && config.pretrain_slots > 0) warm = pretrain(config);
    return run_with(config, std::move(warm), hooks, stats);
}

std::vector<MetricsRow> run_with(const ScenarioConfig& config, std::optional<Pretrained> warm, const RunHooks& hooks,
                                 RunStats* stats) {
    if (config.mode == Mode::NrArc) warm.reset();
    Simulation sim(config, hooks, std::move(warm), stats);
    std::vector<MetricsRow> rows;
    rows.reserve(static_cast<std::size_t>(config.iterations));
    for (long t = 0; t < config.iterations; ++t) rows.push_back(sim.step());
    return rows;
}

std::string format_csv(const std::vector<MetricsRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const MetricsRow& r : rows) {
        out += std::to_string(r.iteration) + "," + to_string(r.mode) + "," + fmt6(r.normalized_cost_score) + "," +
               std::to_string(r.supported_users) + "," + fmt6(r.mean_reward) + "\n";
    }
    return out;
}

void emit_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("emit_csv needs at least one row");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << format_csv(rows);
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<MetricsRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ScenarioError("csv header mismatch");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_list(line);
        if (f.size() != 5) throw ScenarioError("csv row needs 5 fields: " + line);
        MetricsRow r;
        r.iteration = std::stol(f[0]);
        r.mode = parse_mode(f[1]);
        r.normalized_cost_score = std::stod(f[2]);
        r.supported_users = std::stoi(f[3]);
        r.mean_reward = std::stod(f[4]);
        rows.push_back(r);
    }
    return rows;
}

std::vector<MetricsRow> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

std::vector<double> smooth(const std::vector<double>& values, int window) {
    if (window < 1) throw std::invalid_argument("smoothing window must be at least 1");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t first = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = first; j <= i; ++j) sum += values[j];
        out[i] = sum / static_cast<double>(i + 1 - first);
    }
    return out;
}

}  // namespace arc
