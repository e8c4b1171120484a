#include "locans/moment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace locans {

void EvalLadder::validate() const {
    if (thresholds.empty()) throw ArgumentError("evaluation ladder must be non-empty");
    for (size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0))
            throw ArgumentError("ladder thresholds must lie in (0, 1]");
        if (i > 0 && thresholds[i] <= thresholds[i - 1])
            throw ArgumentError("ladder thresholds must be strictly increasing");
    }
}

EvalLadder EvalLadder::standard() {
    EvalLadder l;
    for (int i = 0; i < 10; ++i) l.thresholds.push_back(static_cast<double>(50 + 5 * i) / 100.0);
    return l;
}

std::vector<int> spans_to_frame_labels(const std::vector<MomentAnnotation>& spans,
                                       const std::vector<double>& timestamps) {
    for (size_t i = 1; i < timestamps.size(); ++i)
        if (timestamps[i] <= timestamps[i - 1]) throw ArgumentError("timestamps must be strictly increasing");
    std::vector<int> bits(timestamps.size(), 0);
    for (size_t i = 0; i < timestamps.size(); ++i)
        for (const auto& s : spans)
            if (s.start_s <= timestamps[i] && timestamps[i] < s.end_s) {
                bits[i] = 1;
                break;
            }
    return bits;
}

std::vector<SpanPrediction> aggregate(const std::vector<int>& bits, const std::vector<double>& scores, double fps,
                                      int span_threshold) {
    if (bits.size() != scores.size()) throw ArgumentError("aggregate: bits and scores differ in length");
    if (!(fps > 0.0)) throw ArgumentError("aggregate: fps must be > 0");
    if (span_threshold < 0) throw ArgumentError("aggregate: span_threshold must be >= 0");

    struct Run {
        int first, last;       // positive frame range, inclusive
        double score_sum;
        int positives;
    };
    std::vector<Run> runs;
    int i = 0;
    const int n = static_cast<int>(bits.size());
    while (i < n) {
        if (bits[i] != 1) {
            ++i;
            continue;
        }
        // start or extend a span: zero-gaps up to span_threshold stay inside
        if (!runs.empty() && i - runs.back().last - 1 <= span_threshold) {
            runs.back().last = i;
            runs.back().score_sum += scores[i];
            runs.back().positives += 1;
        } else {
            runs.push_back({i, i, scores[i], 1});
        }
        ++i;
    }

    std::vector<SpanPrediction> out;
    out.reserve(runs.size());
    for (const auto& r : runs) {
        SpanPrediction sp;
        sp.start_s = static_cast<double>(r.first) / fps;
        sp.end_s = static_cast<double>(r.last + 1) / fps;  // each frame covers one frame duration
        sp.confidence = r.score_sum / r.positives;
        out.push_back(sp);
    }
    std::sort(out.begin(), out.end(), [](const SpanPrediction& a, const SpanPrediction& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.start_s < b.start_s;
    });
    return out;
}

double iou(double start_a, double end_a, double start_b, double end_b) {
    if (!(start_a < end_a) || !(start_b < end_b)) throw ArgumentError("iou: spans must satisfy start < end");
    double inter = std::min(end_a, end_b) - std::max(start_a, start_b);
    if (inter <= 0.0) return 0.0;
    double uni = std::max(end_a, end_b) - std::min(start_a, start_b);
    return inter / uni;
}

double iou(const SpanPrediction& a, const MomentAnnotation& b) { return iou(a.start_s, a.end_s, b.start_s, b.end_s); }

double average_precision(const std::vector<SpanPrediction>& preds, const std::vector<MomentAnnotation>& gts,
                         double thr) {
    if (!(thr > 0.0 && thr <= 1.0)) throw ArgumentError("average_precision: thr must lie in (0, 1]");
    if (gts.empty()) return preds.empty() ? 1.0 : 0.0;
    if (preds.empty()) return 0.0;

    std::vector<SpanPrediction> ranked = preds;
    std::sort(ranked.begin(), ranked.end(), [](const SpanPrediction& a, const SpanPrediction& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.start_s != b.start_s) return a.start_s < b.start_s;
        return a.end_s < b.end_s;
    });

    std::vector<bool> matched(gts.size(), false);
    std::vector<int> tp(ranked.size(), 0);
    for (size_t i = 0; i < ranked.size(); ++i) {
        int best = -1;
        double best_iou = 0.0;
        for (size_t j = 0; j < gts.size(); ++j) {
            if (matched[j]) continue;
            double v = iou(ranked[i], gts[j]);
            if (v >= thr && v > best_iou) {
                best = static_cast<int>(j);
                best_iou = v;
            }
        }
        if (best >= 0) {
            matched[best] = true;
            tp[i] = 1;
        }
    }

    // exact area under the stepwise PR curve with the precision envelope
    const size_t n = ranked.size();
    std::vector<double> precision(n), recall(n);
    int cum = 0;
    for (size_t i = 0; i < n; ++i) {
        cum += tp[i];
        precision[i] = static_cast<double>(cum) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(cum) / static_cast<double>(gts.size());
    }
    for (size_t i = n - 1; i > 0; --i) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double map_over_ladder(const std::vector<QueryCase>& cases, const EvalLadder& ladder) {
    ladder.validate();
    if (cases.empty()) return 0.0;
    double total = 0.0;
    for (const auto& c : cases) {
        double per_query = 0.0;
        for (double thr : ladder.thresholds) per_query += average_precision(c.preds, c.gts, thr);
        total += per_query / static_cast<double>(ladder.thresholds.size());
    }
    return total / static_cast<double>(cases.size());
}

double recall_at_1(const std::vector<QueryCase>& cases, double thr) {
    if (!(thr > 0.0 && thr <= 1.0)) throw ArgumentError("recall_at_1: thr must lie in (0, 1]");
    if (cases.empty()) return 0.0;
    int hits = 0;
    for (const auto& c : cases) {
        if (c.preds.empty()) continue;
        const SpanPrediction* top = &c.preds[0];
        for (const auto& p : c.preds) {
            if (p.confidence > top->confidence ||
                (p.confidence == top->confidence && p.start_s < top->start_s))
                top = &p;
        }
        for (const auto& g : c.gts) {
            if (iou(*top, g) >= thr) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(cases.size());
}

int auto_span_threshold(const std::vector<MomentEntry>& entries, double fps, int fallback) {
    if (!(fps > 0.0)) throw ArgumentError("auto_span_threshold: fps must be > 0");
    double gap_sum = 0.0;
    int gap_count = 0;
    for (const auto& e : entries) {
        if (e.moment.spans.size() < 2) continue;
        std::vector<MomentAnnotation> sorted = e.moment.spans;
        std::sort(sorted.begin(), sorted.end(),
                  [](const MomentAnnotation& a, const MomentAnnotation& b) { return a.start_s < b.start_s; });
        for (size_t i = 1; i < sorted.size(); ++i) {
            double gap_s = sorted[i].start_s - sorted[i - 1].end_s;
            if (gap_s > 0.0) {
                gap_sum += gap_s * fps;
                ++gap_count;
            }
        }
    }
    if (gap_count == 0) return fallback;
    return static_cast<int>(std::lround(gap_sum / gap_count));
}

void write_span_predictions(const std::string& path, const std::vector<SpanPredictionEntry>& entries) {
    std::ostringstream out;
    for (const auto& e : entries) {
        nlohmann::json spans = nlohmann::json::array();
        for (const auto& s : e.spans) spans.push_back({s.start_s, s.end_s, s.confidence});
        out << nlohmann::json{{"example_id", e.example_id}, {"spans", spans}}.dump() << "\n";
    }
    write_file(path, out.str());
}

std::vector<SpanPredictionEntry> read_span_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open span prediction file: " + path);
    std::vector<SpanPredictionEntry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            SpanPredictionEntry e;
            e.example_id = j.at("example_id").get<std::string>();
            for (const auto& s : j.at("spans")) {
                if (!s.is_array() || s.size() != 3)
                    throw ValidationError("span prediction must be a [start, end, confidence] triple");
                e.spans.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>()});
            }
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad span prediction line: " + e.what());
        }
    }
    return out;
}

}  // namespace locans
