// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <cstdio>
#include <string>

#include "criteria.hpp"

using namespace arc;
using namespace arc::criteria;

int main(int argc, char** argv) {
    std::string scenario = ARC_SOURCE_DIR "/scenarios/reference.arc";
    std::string out_dir = ".";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--scenario") scenario = argv[i + 1];
        else if (flag == "--out-dir") out_dir = argv[i + 1];
    }

    int failed = 0;
    auto report = [&](const Outcome& o) {
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", o.name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    };

    report(theorem_suite());
    report(reward_examples());
    report(gradient_check());
    report(gdss_diversity());
    report(gdss_unit_cases());
    report(bandit());

    const ScenarioConfig reference = load_scenario(scenario);
    report(qoe_gate(reference));

    ScenarioConfig short_run = reference;
    short_run.iterations = 400;
    short_run.pretrain_slots = 200;
    report(determinism(short_run, out_dir));

    long swap = -1;
    for (const ScheduledEvent& e : reference.events) {
        if (e.perturbation) swap = e.iteration;
    }
    const AblationRuns runs = run_ablation(reference);
    emit_csv(runs.arc, out_dir + "/ablation_arc.csv");
    emit_csv(runs.ru_arc, out_dir + "/ablation_ru-arc.csv");
    emit_csv(runs.nr_arc, out_dir + "/ablation_nr-arc.csv");
    report(figure_recovery(runs, swap, 600.0));
    report(figure_no_rl(runs));

    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
