#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace locans {

// Planted geometry shared by the synthetic corpus generator and the
// synthetic-oracle backbone. One unit relevance direction plus an orthonormal
// codebook of concept directions, all deterministic in (dim, vocab).
//
// The scales are chosen so the oracle's decisions are certain, not just
// likely: per-component noise is bounded by noise_amplitude(dim), so any
// noise/direction dot product is bounded by 0.8 in magnitude, and the planted
// components clear that band with room to spare.
class PlantedGeometry {
public:
    static const PlantedGeometry& get(int dim, int vocab);

    static std::string concept_name(int id);

    int dim() const { return dim_; }
    int vocab() const { return vocab_; }
    const double* relevance() const { return relevance_.data(); }
    const double* concept_dir(int id) const;

    // Exact codebook names resolve to their orthonormal rows; any other text
    // maps to a stable hashed direction orthogonal to the relevance axis.
    std::vector<double> direction_for_option(const std::string& text) const;

    static double noise_amplitude(int dim);

    static constexpr double kRelevanceScale = 2.0;
    static constexpr double kAnswerScale = 4.0;
    static constexpr double kYesMidpoint = 1.0;
    static constexpr double kYesSteepness = 2.0;
    static constexpr double kOptionScale = 2.0;

private:
    PlantedGeometry(int dim, int vocab);

    int dim_;
    int vocab_;
    std::vector<double> relevance_;
    std::vector<double> concepts_;  // vocab rows of dim
    std::unordered_map<std::string, int> name_to_id_;
};

}  // namespace locans
