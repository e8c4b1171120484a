#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "locans/backbone.hpp"
#include "locans/chain.hpp"
#include "locans/data.hpp"
#include "locans/moment.hpp"

namespace locans {

enum class QaStrategy { uniform, random, localizer, voting, oracle };
std::string to_string(QaStrategy s);
QaStrategy qa_strategy_from_string(const std::string& s);

struct EvalReport {
    std::string task;  // "qa" or "moment"
    nlohmann::json config;
    std::map<std::string, double> metrics;
    nlohmann::json rows;  // per-example (qa) or per-query (moment), sorted by example_id
    uint64_t seed = 0;
    double wall_time_s = 0.0;
};

// Serialized report with a repro_hash over everything except wall_time_s.
nlohmann::json report_to_json(const EvalReport& report);
std::string report_repro_hash(const EvalReport& report);

// Every strategy answers from (subsets of) the same n uniformly sampled
// frames: uniform/random/localizer pick k of them and answer jointly, voting
// majority-votes n single-frame answers, oracle counts a question correct if
// any single frame answers it.
EvalReport eval_qa(const std::vector<QaEntry>& dataset, QaStrategy strategy, const Model* localizer,
                   const Model& answerer, int n, int k, uint64_t seed);

// Per-example intermediates of the moment pipeline, for score/span dumps.
struct MomentEvalArtifacts {
    std::vector<ScoreDumpEntry> scores;
    std::vector<SpanPredictionEntry> spans;
};

EvalReport eval_moment(const std::vector<MomentEntry>& dataset, const Model& localizer, double fps,
                       int span_threshold, bool single_span, MomentEvalArtifacts* artifacts = nullptr);

struct AblationSpec {
    std::vector<std::pair<int, int>> cells;  // (n, k)
    std::vector<QaStrategy> strategies;
    std::vector<uint64_t> seeds;

    void validate() const;
};

struct AblationResult {
    nlohmann::json table;
    std::string text_grid;
    std::vector<std::string> warnings;
};

AblationResult run_ablation(const AblationSpec& spec, const std::vector<QaEntry>& dataset, const Model* localizer,
                            const Model& answerer);

// Text analog of a localization plot: one glyph per frame bucketed by score,
// a marker line under the selected keyframes, and an optional truth-window
// line with brackets.
std::string render_timeline(const VideoRecord& video, const std::vector<double>& scores,
                            const std::vector<int>& selection,
                            const std::pair<int, int>* truth_window = nullptr);

}  // namespace locans
