#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

#include "arc/harness.hpp"

using namespace arc;

namespace {

int cmd_run(const std::string& config_path, const std::string& out, const std::string& mode,
            const std::string& backend, std::optional<std::uint64_t> seed, std::optional<long> iterations) {
    ScenarioConfig config = load_scenario(config_path);
    if (!mode.empty()) config.mode = parse_mode(mode);
    if (!backend.empty()) config.backend = parse_backend(backend);
    if (seed) config.seed = *seed;
    if (iterations) config.iterations = *iterations;
    validate(config);

    const auto start = std::chrono::steady_clock::now();
    RunStats stats;
    const std::vector<MetricsRow> rows = run(config, {}, &stats);
    emit_csv(rows, out);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    double tail = 0.0;
    const std::size_t n = std::min<std::size_t>(rows.size(), 1000);
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i) tail += rows[i].normalized_cost_score;
    std::printf("%s: %zu iterations in %.1f s, final-%zu mean score %.4f, train steps %ld, qoe failures %ld, "
                "fallbacks %ld\n",
                to_string(config.mode), rows.size(), secs, n, n ? tail / n : 0.0, stats.train_calls,
                stats.qoe_failures, stats.remote_fallbacks);
    return 0;
}

int cmd_verify(int instances, std::uint64_t seed, const std::string& objective) {
    std::mt19937_64 rng(seed);
    const Objective obj = make_objective(parse_objective_kind(objective));
    const auto start = std::chrono::steady_clock::now();
    int holds = 0;
    for (int i = 0; i < instances; ++i) {
        const Instance inst = random_instance(rng);
        const TheoremCheck c = verify_sequence_theorem(inst.topology, inst.users, inst.services, obj, {});
        holds += c.holds ? 1 : 0;
        std::printf("instance %d: users %zu nodes %d optimal %.9f greedy %.9f %s\n", i, inst.users.size(),
                    inst.topology.num_nodes(), c.optimal_total, c.greedy_total, c.holds ? "holds" : "FAILS");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%d/%d instances hold (%.2f s)\n", holds, instances, secs);
    return holds == instances ? 0 : 1;
}

int cmd_bootstrap(const std::string& config_path, int n, const std::string& out) {
    ScenarioConfig config = load_scenario(config_path);
    validate(config);
    const Topology topology = build_topology(config.network, config.seed);
    const Population p = materialize(config, topology);
    KnowledgeBase dkb(KnowledgeKind::Dynamic);
    AllocationTable alloc(p.users.size());
    StateHistory history;
    history.objective = make_objective(config.objective);
    history = push_state(dkb, history, index_state(topology, p.users, p.services, alloc,
                                                   std::vector<bool>(p.users.size(), false)),
                         config.window);
    std::mt19937_64 rng(config.seed);
    const OracleBounds bounds{config.bootstrap_users, topology.num_nodes()};
    const int stored = bootstrap_exemplars(dkb, history, topology, p.users, p.services, history.objective, n,
                                           config.limits, bounds, rng);
    for (const auto& [id, r] : dkb.records()) {
        if (r.tag == RecordTag::Exemplar) std::printf("%s\n", describe_exemplar(id, parse_exemplar(r.payload, r.vector)).c_str());
    }
    if (!out.empty()) save_knowledge(dkb, out);
    std::printf("stored %d exemplars\n", stored);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resource orchestration simulator"};
    app.require_subcommand(1);

    std::string config_path, out, mode, backend;
    std::optional<std::uint64_t> seed;
    std::optional<long> iterations;
    auto* run = app.add_subcommand("run", "Simulate a scenario and write per-iteration metrics as CSV");
    run->add_option("--config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output CSV")->required();
    run->add_option("--mode", mode, "arc | ru-arc | nr-arc");
    run->add_option("--backend", backend, "heuristic | oracle | remote");
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--iterations", iterations, "Override the iteration count");

    int instances = 50;
    std::uint64_t verify_seed = 2024;
    std::string objective = "MinCost";
    auto* verify = app.add_subcommand("verify-theorem", "Check the optimal-sequence property on random instances");
    verify->add_option("--instances", instances, "Number of instances")->check(CLI::PositiveNumber);
    verify->add_option("--seed", verify_seed, "Instance generator seed");
    verify->add_option("--objective", objective, "MinCost | MaxQuality | LoadBalance");

    int n = 30;
    std::string kb_out;
    auto* boot = app.add_subcommand("bootstrap", "Seed exemplars for a scenario's first slot");
    boot->add_option("--config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
    boot->add_option("--n", n, "Number of exemplars")->check(CLI::Range(3, 100000));
    boot->add_option("--out", kb_out, "Write the knowledge base to this file");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, out, mode, backend, seed, iterations);
        if (*verify) return cmd_verify(instances, verify_seed, objective);
        if (*boot) return cmd_bootstrap(config_path, n, kb_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
