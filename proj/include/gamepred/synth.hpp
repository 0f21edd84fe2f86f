#pragma once

// Deterministic synthetic corpus generator. Produces decision points for all
// six game families whose human choices follow the same behavioral response
// shapes the mock backend emits, so an end-to-end mock run recovers a strong
// behavioral-vs-noise separation. Everything is a pure function of the seed.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gamepred/game_model.hpp"
#include "gamepred/prompt.hpp"

namespace gamepred::synth {

struct CorpusSpec {
    std::uint64_t seed = 20260825;
    std::size_t bargaining = 110;
    std::size_t persuasion = 80;
    std::size_t negotiation = 80;
    std::size_t matrix_repeated = 100;
    std::size_t matrix_oneshot = 60; // rounded down to a multiple of 12 topologies
    std::size_t lottery = 70;

    std::size_t total() const {
        return bargaining + persuasion + negotiation + matrix_repeated + matrix_oneshot +
               lottery;
    }
};

// All generated points validate; ids are unique within a family.
std::vector<DecisionPoint> make_family(GameFamily family, const CorpusSpec& spec);

std::map<GameFamily, std::vector<DecisionPoint>> make_corpus(const CorpusSpec& spec);

// Fixed six-pair registry: three behavioral-base/noise-aligned pairs across
// the size bins, one reversed pair (noise base, behavioral aligned), one
// low-mass pair and one all-noise pair that the filters should exclude.
std::vector<PairSpec> make_pair_registry();

// Canonical chat template used for every synthetic aligned model.
ChatTemplateSpec make_chat_template();

// Writes datasets + manifests under <dir>/data, the registry at
// <dir>/pairs.json, one chat template per aligned model under
// <dir>/templates, and a ready-to-run mock config at <dir>/run.json.
// Returns the config path.
std::string write_workspace(const CorpusSpec& spec, const std::string& dir);

} // namespace gamepred::synth
