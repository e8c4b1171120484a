#pragma once

#include <vector>

#include "locans/data.hpp"

namespace locans {

struct SpanPrediction {
    double start_s = 0.0;
    double end_s = 0.0;
    double confidence = 0.0;
};

struct EvalLadder {
    std::vector<double> thresholds;  // strictly increasing, each in (0, 1]

    void validate() const;
    static EvalLadder standard();  // 0.5 to 0.95 in steps of 0.05
};

// bit i = 1 iff some span satisfies start_s <= timestamps[i] < end_s
std::vector<int> spans_to_frame_labels(const std::vector<MomentAnnotation>& spans,
                                       const std::vector<double>& timestamps);

// Merge positive frames into spans, absorbing zero-runs of length
// <= span_threshold. Frame i covers [i/fps, (i+1)/fps). Confidence is the
// mean score over the span's positive frames. Sorted by descending
// confidence, ties by start time.
std::vector<SpanPrediction> aggregate(const std::vector<int>& bits, const std::vector<double>& scores, double fps,
                                      int span_threshold);

double iou(double start_a, double end_a, double start_b, double end_b);
double iou(const SpanPrediction& a, const MomentAnnotation& b);

// Rank by confidence (ties by start time), greedily match each prediction to
// the highest-IoU unmatched ground truth with IoU >= thr, then take the exact
// area under the interpolated precision-recall curve.
double average_precision(const std::vector<SpanPrediction>& preds, const std::vector<MomentAnnotation>& gts,
                         double thr);

struct QueryCase {
    std::vector<SpanPrediction> preds;
    std::vector<MomentAnnotation> gts;
};

// mean over queries of mean over thresholds of average_precision
double map_over_ladder(const std::vector<QueryCase>& cases, const EvalLadder& ladder);

// fraction of queries whose top-confidence prediction reaches IoU >= thr with
// some ground truth; queries without predictions count as misses
double recall_at_1(const std::vector<QueryCase>& cases, double thr);

// Span-threshold statistic from training data: the average gap, in frames,
// between consecutive annotated spans of the same query. Falls back to the
// given default when no query has multiple spans.
int auto_span_threshold(const std::vector<MomentEntry>& entries, double fps, int fallback = 6);

struct SpanPredictionEntry {
    std::string example_id;
    std::vector<SpanPrediction> spans;
};

// JSONL, one {example_id, spans: [[start_s, end_s, confidence]]} per line.
void write_span_predictions(const std::string& path, const std::vector<SpanPredictionEntry>& entries);
std::vector<SpanPredictionEntry> read_span_predictions(const std::string& path);

}  // namespace locans
