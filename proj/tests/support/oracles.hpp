#pragma once

// Brute-force reference implementations the real code is checked against.
// These stay deliberately naive and independent of the library's code paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include "locans/data.hpp"
#include "locans/moment.hpp"

namespace locans::testing {

// Top-k by repeated argmax scans (strict greater keeps the earlier index on
// ties), returned in ascending index order.
inline std::vector<int> topk_bruteforce(const std::vector<double>& scores, int k) {
    std::vector<bool> taken(scores.size(), false);
    std::vector<int> picked;
    for (int round = 0; round < k; ++round) {
        int best = -1;
        for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
            if (taken[i]) continue;
            if (best < 0 || scores[i] > scores[best]) best = i;
        }
        taken[best] = true;
        picked.push_back(best);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

inline double iou_oracle(double sa, double ea, double sb, double eb) {
    double lo = std::max(sa, sb), hi = std::min(ea, eb);
    if (hi <= lo) return 0.0;
    return (hi - lo) / (std::max(ea, eb) - std::min(sa, sb));
}

// Average precision recomputed from scratch: selection-sort ranking, greedy
// highest-IoU matching by scanning every pair each round, and the PR area by
// explicitly maximizing precision over suffixes at every rank.
inline double average_precision_oracle(std::vector<SpanPrediction> preds,
                                       const std::vector<MomentAnnotation>& gts, double thr) {
    if (gts.empty()) return preds.empty() ? 1.0 : 0.0;
    if (preds.empty()) return 0.0;

    std::vector<SpanPrediction> ranked;
    while (!preds.empty()) {
        size_t best = 0;
        for (size_t i = 1; i < preds.size(); ++i) {
            const auto &a = preds[i], &b = preds[best];
            if (a.confidence > b.confidence ||
                (a.confidence == b.confidence &&
                 (a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s))))
                best = i;
        }
        ranked.push_back(preds[best]);
        preds.erase(preds.begin() + static_cast<long>(best));
    }

    std::vector<bool> used(gts.size(), false);
    std::vector<int> tp;
    for (const auto& p : ranked) {
        int pick = -1;
        double pick_iou = 0.0;
        for (size_t j = 0; j < gts.size(); ++j) {
            if (used[j]) continue;
            double v = iou_oracle(p.start_s, p.end_s, gts[j].start_s, gts[j].end_s);
            if (v >= thr && v > pick_iou) {
                pick = static_cast<int>(j);
                pick_iou = v;
            }
        }
        if (pick >= 0) {
            used[pick] = true;
            tp.push_back(1);
        } else {
            tp.push_back(0);
        }
    }

    double ap = 0.0;
    int cum = 0;
    int prev_cum = 0;
    for (size_t i = 0; i < tp.size(); ++i) {
        cum += tp[i];
        if (cum == prev_cum) continue;
        // recall increased at rank i; interpolated precision is the best
        // precision at any rank >= i
        double best_prec = 0.0;
        int c2 = cum;
        for (size_t j = i; j < tp.size(); ++j) {
            if (j > i) c2 += tp[j];
            best_prec = std::max(best_prec, static_cast<double>(c2) / static_cast<double>(j + 1));
        }
        ap += static_cast<double>(cum - prev_cum) / static_cast<double>(gts.size()) * best_prec;
        prev_cum = cum;
    }
    return ap;
}

// Every score vector of length 1..max_len over the given grid values.
template <typename Fn>
void for_all_quantized_vectors(int max_len, const std::vector<double>& grid, Fn&& fn) {
    for (int len = 1; len <= max_len; ++len) {
        std::vector<int> digits(len, 0);
        for (;;) {
            std::vector<double> v(len);
            for (int i = 0; i < len; ++i) v[i] = grid[digits[i]];
            fn(v);
            int pos = len - 1;
            while (pos >= 0 && digits[pos] == static_cast<int>(grid.size()) - 1) digits[pos--] = 0;
            if (pos < 0) break;
            digits[pos]++;
        }
    }
}

// Maximum achievable true-positive count for the first `prefix` ranked
// predictions, by trying every injective assignment.
inline int max_matching_tp(const std::vector<SpanPrediction>& ranked, const std::vector<MomentAnnotation>& gts,
                           double thr, size_t prefix, size_t pi = 0, std::vector<bool>* used = nullptr) {
    std::vector<bool> local;
    if (!used) {
        local.assign(gts.size(), false);
        used = &local;
    }
    if (pi >= prefix) return 0;
    int best = max_matching_tp(ranked, gts, thr, prefix, pi + 1, used);  // leave pi unmatched
    for (size_t j = 0; j < gts.size(); ++j) {
        if ((*used)[j]) continue;
        if (iou_oracle(ranked[pi].start_s, ranked[pi].end_s, gts[j].start_s, gts[j].end_s) < thr) continue;
        (*used)[j] = true;
        best = std::max(best, 1 + max_matching_tp(ranked, gts, thr, prefix, pi + 1, used));
        (*used)[j] = false;
    }
    return best;
}

}  // namespace locans::testing
