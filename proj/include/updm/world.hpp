#pragma once

#include <array>
#include <string>
#include <vector>

#include "updm/rng.hpp"

namespace updm {

// Synthetic data universe: a K-component Gaussian mixture in the plane, one
// concept per component, plus the token vocabulary used for prompts. Token
// layout is fixed: NEUTRAL, then one token per concept, then the placeholder.
struct ConceptWorld {
    int num_concepts = 0;
    double spread = 0.0;
    std::vector<std::array<double, 2>> centers;
    std::vector<std::vector<std::array<double, 2>>> train_sets;
    std::vector<int> anchor_map;  // concept -> anchor concept (clockwise neighbor)
    std::vector<std::string> vocab;

    static constexpr const char* kNeutralToken = "NEUTRAL";
    static constexpr const char* kPlaceholderToken = "S*";

    int neutral_index() const { return 0; }
    int concept_token_index(int concept) const { return 1 + concept; }
    int placeholder_index() const { return 1 + num_concepts; }
    int vocab_size() const { return num_concepts + 2; }
    std::string concept_token(int concept) const { return vocab[static_cast<std::size_t>(concept_token_index(concept))]; }
    int token_index(const std::string& token) const;

    // draws a labeled point from the mixture (uniform over concepts)
    std::array<double, 2> sample_point(int concept, RandomStream& rng) const;
};

// K concepts on a regular polygon of the given radius; anchors map each
// concept to its clockwise neighbor. Throws if centers violate the
// separability requirement (pairwise distance >= 6 * spread).
ConceptWorld build_world(int num_concepts, double radius, double spread, int points_per_concept,
                         std::uint64_t seed);

}  // namespace updm
