#include "updm/world.hpp"

#include <cmath>
#include <stdexcept>

namespace updm {

int ConceptWorld::token_index(const std::string& token) const {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (vocab[i] == token) return static_cast<int>(i);
    }
    throw std::invalid_argument("updm: unknown token '" + token + "'");
}

std::array<double, 2> ConceptWorld::sample_point(int concept, RandomStream& rng) const {
    if (concept < 0 || concept >= num_concepts) {
        throw std::invalid_argument("updm: concept id " + std::to_string(concept) + " out of range");
    }
    const auto& c = centers[static_cast<std::size_t>(concept)];
    return {c[0] + spread * rng.gaussian(), c[1] + spread * rng.gaussian()};
}

ConceptWorld build_world(int num_concepts, double radius, double spread, int points_per_concept,
                         std::uint64_t seed) {
    if (num_concepts < 1) throw std::invalid_argument("updm: world needs at least one concept");
    if (points_per_concept < 1) throw std::invalid_argument("updm: world needs non-empty train sets");
    if (spread <= 0.0) throw std::invalid_argument("updm: spread must be positive");

    ConceptWorld w;
    w.num_concepts = num_concepts;
    w.spread = spread;
    w.vocab.push_back(ConceptWorld::kNeutralToken);
    for (int k = 0; k < num_concepts; ++k) w.vocab.push_back("c_" + std::to_string(k));
    w.vocab.push_back(ConceptWorld::kPlaceholderToken);

    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (int k = 0; k < num_concepts; ++k) {
        const double a = kTwoPi * k / num_concepts;
        w.centers.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    for (int k = 0; k < num_concepts; ++k) {
        for (int j = k + 1; j < num_concepts; ++j) {
            const double dx = w.centers[k][0] - w.centers[j][0];
            const double dy = w.centers[k][1] - w.centers[j][1];
            if (std::sqrt(dx * dx + dy * dy) < 6.0 * spread) {
                throw std::invalid_argument(
                    "updm: concept centers closer than 6*spread; reduce spread or enlarge radius");
            }
        }
    }

    RandomStream rng(derive_seed(seed, 0x776f726cULL));  // world substream
    for (int k = 0; k < num_concepts; ++k) {
        std::vector<std::array<double, 2>> pts;
        pts.reserve(static_cast<std::size_t>(points_per_concept));
        for (int i = 0; i < points_per_concept; ++i) pts.push_back(w.sample_point(k, rng));
        w.train_sets.push_back(std::move(pts));
        w.anchor_map.push_back((k + num_concepts - 1) % num_concepts);
    }
    return w;
}

}  // namespace updm
