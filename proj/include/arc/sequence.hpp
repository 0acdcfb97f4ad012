#pragma once
// Ordered per-user action plans produced by the sequencer.

#include <vector>

#include "arc/mdp.hpp"

namespace arc {

enum class Backend { Oracle, Heuristic, Remote };

const char* to_string(Backend backend);
Backend parse_backend(const std::string& name);

struct SequenceEntry {
    int user = 0;
    std::vector<ActionStep> steps;
};

struct Sequence {
    std::vector<SequenceEntry> ordered;
    Backend backend_used = Backend::Heuristic;

    std::vector<int> users() const {
        std::vector<int> out;
        for (const auto& e : ordered) out.push_back(e.user);
        return out;
    }
};

// Entries for `order` with each user's service action profile.
Sequence make_sequence(const std::vector<int>& order, const std::vector<User>& users,
                       const std::vector<ServiceSpec>& services, Backend backend);

}  // namespace arc
