#include "locans/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include "locans/answerer.hpp"
#include "locans/localizer.hpp"

namespace locans {

using nlohmann::json;

namespace {

constexpr uint64_t kEvalRandomTag = 0x6576616cull;  // "eval"

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

json report_core(const EvalReport& r) {
    json j{{"task", r.task}, {"config", r.config}, {"metrics", r.metrics}, {"seed", r.seed}};
    j[r.task == "moment" ? "per_query" : "per_example"] = r.rows;
    return j;
}

void sort_rows_by_example_id(json& rows) {
    std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
        return a.at("example_id").get<std::string>() < b.at("example_id").get<std::string>();
    });
}

}  // namespace

std::string to_string(QaStrategy s) {
    switch (s) {
        case QaStrategy::uniform: return "uniform";
        case QaStrategy::random: return "random";
        case QaStrategy::localizer: return "localizer";
        case QaStrategy::voting: return "voting";
        case QaStrategy::oracle: return "oracle";
    }
    throw ArgumentError("bad qa strategy value");
}

QaStrategy qa_strategy_from_string(const std::string& s) {
    if (s == "uniform") return QaStrategy::uniform;
    if (s == "random") return QaStrategy::random;
    if (s == "localizer") return QaStrategy::localizer;
    if (s == "voting") return QaStrategy::voting;
    if (s == "oracle") return QaStrategy::oracle;
    throw ParseError("unknown strategy '" + s + "' (known: uniform, random, localizer, voting, oracle)");
}

std::string report_repro_hash(const EvalReport& report) {
    return hex64(fnv1a64(report_core(report).dump()));
}

json report_to_json(const EvalReport& report) {
    json j = report_core(report);
    j["repro_hash"] = report_repro_hash(report);
    j["wall_time_s"] = report.wall_time_s;
    return j;
}

EvalReport eval_qa(const std::vector<QaEntry>& dataset, QaStrategy strategy, const Model* localizer,
                   const Model& answerer, int n, int k, uint64_t seed) {
    if (strategy == QaStrategy::localizer && !localizer)
        throw ConfigError("strategy 'localizer' needs a localizer checkpoint");
    if (k < 1 || k > n) throw ArgumentError("eval_qa needs 1 <= k <= n");

    double t0 = now_s();
    json rows = json::array();
    int correct_count = 0;

    for (const auto& e : dataset) {
        std::vector<int> sampled = uniform_sample(e.video->n_frames, n);
        LanguageContext qa_ctx = build_qa_context(e.qa.question, e.qa.options);

        bool correct = false;
        int predicted = -1;
        std::vector<int> frames_used;

        switch (strategy) {
            case QaStrategy::voting:
            case QaStrategy::oracle: {
                std::vector<AnswerPrediction> preds;
                preds.reserve(sampled.size());
                for (int f : sampled)
                    preds.push_back(
                        answer_single_frame(*e.video, f, qa_ctx, *answerer.backbone, answerer.params, e.qa.example_id));
                frames_used = sampled;
                if (strategy == QaStrategy::voting) {
                    predicted = majority_vote(preds);
                    correct = predicted == e.qa.answer_index;
                } else {
                    correct = oracle_correct(preds, e.qa.answer_index);
                }
                break;
            }
            case QaStrategy::localizer: {
                AnswerPrediction pred = forward_infer(*e.video, e.qa, *localizer->backbone, localizer->params,
                                                      *answerer.backbone, answerer.params, n, k);
                predicted = pred.predicted_index;
                correct = predicted == e.qa.answer_index;
                frames_used = pred.frame_indices_used;
                break;
            }
            case QaStrategy::uniform:
            case QaStrategy::random: {
                std::vector<int> positions;
                if (strategy == QaStrategy::uniform) {
                    positions = uniform_sample(n, k);
                } else {
                    Rng rng(mix_seed(mix_seed(seed, kEvalRandomTag), fnv1a64(e.qa.example_id)));
                    positions = sample_distinct(rng, n, k);
                    std::sort(positions.begin(), positions.end());
                }
                for (int p : positions) frames_used.push_back(sampled[p]);
                KeyframeSelection sel = make_keyframe_selection(frames_used, {}, e.video->n_frames);
                AnswerPrediction pred =
                    answer_multi(*e.video, sel, qa_ctx, *answerer.backbone, answerer.params, e.qa.example_id);
                predicted = pred.predicted_index;
                correct = predicted == e.qa.answer_index;
                break;
            }
        }

        if (correct) ++correct_count;
        rows.push_back(json{{"example_id", e.qa.example_id},
                            {"predicted_index", predicted},
                            {"correct", correct},
                            {"frames", frames_used}});
    }
    sort_rows_by_example_id(rows);

    EvalReport report;
    report.task = "qa";
    report.config = json{{"strategy", to_string(strategy)},
                         {"n", n},
                         {"k", k},
                         {"answerer", to_string(answerer.backbone->config().implementation)},
                         {"localizer", localizer ? to_string(localizer->backbone->config().implementation) : "none"}};
    report.metrics["accuracy"] =
        dataset.empty() ? 0.0 : static_cast<double>(correct_count) / static_cast<double>(dataset.size());
    report.rows = std::move(rows);
    report.seed = seed;
    report.wall_time_s = now_s() - t0;
    return report;
}

EvalReport eval_moment(const std::vector<MomentEntry>& dataset, const Model& localizer, double fps,
                       int span_threshold, bool single_span, MomentEvalArtifacts* artifacts) {
    double t0 = now_s();
    EvalLadder ladder = EvalLadder::standard();

    std::vector<QueryCase> cases;
    cases.reserve(dataset.size());
    json rows = json::array();

    for (const auto& e : dataset) {
        LanguageContext loc_ctx = build_loc_context(e.moment.query, {});
        FrameScoreVector scores = score_frames(*e.video, loc_ctx, *localizer.backbone, localizer.params);
        FramePredictionBits bits = binarize(scores);
        std::vector<SpanPrediction> preds = aggregate(bits.bits, scores.scores, fps, span_threshold);
        if (single_span && preds.size() > 1) preds.resize(1);  // aggregate sorts by confidence
        if (artifacts) {
            artifacts->scores.push_back({e.moment.example_id, e.video->video_id, scores.scores});
            artifacts->spans.push_back({e.moment.example_id, preds});
        }

        QueryCase qc{std::move(preds), e.moment.spans};
        double ap = 0.0;
        for (double thr : ladder.thresholds) ap += average_precision(qc.preds, qc.gts, thr);
        ap /= static_cast<double>(ladder.thresholds.size());
        double top1 = 0.0;
        if (!qc.preds.empty())
            for (const auto& g : qc.gts) top1 = std::max(top1, iou(qc.preds[0], g));
        rows.push_back(json{{"example_id", e.moment.example_id},
                            {"average_precision", ap},
                            {"top1_iou", top1},
                            {"n_spans", qc.preds.size()}});
        cases.push_back(std::move(qc));
    }
    sort_rows_by_example_id(rows);

    EvalReport report;
    report.task = "moment";
    report.config = json{{"fps", fps},
                         {"span_threshold", span_threshold},
                         {"single_span", single_span},
                         {"localizer", to_string(localizer.backbone->config().implementation)}};
    report.metrics["mAP"] = map_over_ladder(cases, ladder);
    report.metrics["R1@0.5"] = recall_at_1(cases, 0.5);
    report.metrics["R1@0.7"] = recall_at_1(cases, 0.7);
    report.rows = std::move(rows);
    report.seed = 0;
    report.wall_time_s = now_s() - t0;
    return report;
}

void AblationSpec::validate() const {
    if (cells.empty()) throw ArgumentError("ablation spec has no (n, k) cells");
    if (strategies.empty()) throw ArgumentError("ablation spec has no strategies");
    if (seeds.empty()) throw ArgumentError("ablation spec has no seeds");
    for (const auto& [n, k] : cells)
        if (k < 1 || k > n) throw ArgumentError("ablation cell needs 1 <= k <= n");
}

AblationResult run_ablation(const AblationSpec& spec, const std::vector<QaEntry>& dataset, const Model* localizer,
                            const Model& answerer) {
    spec.validate();

    AblationResult result;
    result.table = json::array();
    std::set<std::tuple<int, int, std::string, uint64_t>> seen;

    std::ostringstream grid;
    grid << "  n->k    seed";
    for (const auto& s : spec.strategies) grid << "  " << to_string(s);
    grid << "\n";

    for (const auto& [n, k] : spec.cells) {
        for (uint64_t seed : spec.seeds) {
            char label[32];
            std::snprintf(label, sizeof(label), "%3d->%-3d %4llu", n, k, static_cast<unsigned long long>(seed));
            grid << label;
            for (const auto& strategy : spec.strategies) {
                auto key = std::make_tuple(n, k, to_string(strategy), seed);
                if (seen.count(key)) {
                    result.warnings.push_back("duplicate ablation cell skipped: n=" + std::to_string(n) +
                                              " k=" + std::to_string(k) + " strategy=" + to_string(strategy) +
                                              " seed=" + std::to_string(seed));
                    char dash[32];
                    std::snprintf(dash, sizeof(dash), "  %*s", static_cast<int>(to_string(strategy).size()), "--");
                    grid << dash;
                    continue;
                }
                seen.insert(key);
                EvalReport report = eval_qa(dataset, strategy, localizer, answerer, n, k, seed);
                double acc = report.metrics.at("accuracy");
                result.table.push_back(json{{"n", n},
                                            {"k", k},
                                            {"strategy", to_string(strategy)},
                                            {"seed", seed},
                                            {"accuracy", acc},
                                            {"repro_hash", report_repro_hash(report)}});
                char cell[32];
                std::snprintf(cell, sizeof(cell), "  %*.4f", static_cast<int>(to_string(strategy).size()), acc);
                grid << cell;
            }
            grid << "\n";
        }
    }
    result.text_grid = grid.str();
    return result;
}

std::string render_timeline(const VideoRecord& video, const std::vector<double>& scores,
                            const std::vector<int>& selection, const std::pair<int, int>* truth_window) {
    const int n = video.n_frames;
    if (static_cast<int>(scores.size()) != n) throw ArgumentError("render_timeline: scores length mismatch");
    static const char kGlyphs[] = " .:-=+*#%@";

    std::string score_line(n, ' ');
    for (int i = 0; i < n; ++i) {
        int bucket = std::min(9, std::max(0, static_cast<int>(scores[i] * 10.0)));
        score_line[i] = kGlyphs[bucket];
    }

    std::string marker_line(n, ' ');
    for (int idx : selection) {
        if (idx < 0 || idx >= n) throw ArgumentError("render_timeline: selection index out of range");
        marker_line[idx] = '^';
    }

    std::string out = score_line + "\n" + marker_line + "\n";
    if (truth_window) {
        auto [a, b] = *truth_window;
        if (a < 0 || b <= a || b > n) throw ArgumentError("render_timeline: truth window out of range");
        std::string truth_line(n, ' ');
        for (int i = a; i < b; ++i) truth_line[i] = '-';
        truth_line[b - 1] = ']';
        truth_line[a] = '[';
        out += truth_line + "\n";
    }
    return out;
}

}  // namespace locans
