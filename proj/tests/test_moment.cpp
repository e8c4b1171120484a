#include <cmath>
#include <doctest.h>

#include "locans/moment.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace locans;
using namespace locans::testing;

namespace {

MomentAnnotation gt(double s, double e) { return {s, e}; }
SpanPrediction pred(double s, double e, double conf) { return {s, e, conf}; }

}  // namespace

TEST_CASE("spans_to_frame_labels uses the closed-open convention") {
    std::vector<double> ts = {0, 2, 4, 6, 8, 10, 12};
    CHECK(spans_to_frame_labels({gt(4, 10)}, ts) == std::vector<int>{0, 0, 1, 1, 1, 0, 0});
    CHECK(spans_to_frame_labels({}, ts) == std::vector<int>{0, 0, 0, 0, 0, 0, 0});
    CHECK(spans_to_frame_labels({gt(0, 2), gt(8, 12)}, ts) == std::vector<int>{1, 0, 0, 0, 1, 1, 0});
}

TEST_CASE("aggregate merges runs whose zero-gap fits the threshold") {
    SUBCASE("gap of one zero merges at threshold 6") {
        auto spans = aggregate({1, 1, 0, 1}, {0.9, 0.8, 0.1, 0.6}, 0.5, 6);
        REQUIRE(spans.size() == 1);
        CHECK(spans[0].start_s == 0.0);
        CHECK(spans[0].end_s == 8.0);  // frame duration is 2 s at 0.5 fps
        CHECK(spans[0].confidence == doctest::Approx((0.9 + 0.8 + 0.6) / 3.0));
    }

    SUBCASE("gap of seven zeros splits at threshold 6") {
        std::vector<int> bits = {1, 0, 0, 0, 0, 0, 0, 0, 1};
        std::vector<double> scores = {0.9, 0, 0, 0, 0, 0, 0, 0, 0.8};
        auto spans = aggregate(bits, scores, 0.5, 6);
        REQUIRE(spans.size() == 2);
        CHECK(spans[0].start_s == 0.0);
        CHECK(spans[0].end_s == 2.0);
        CHECK(spans[1].start_s == 16.0);
        CHECK(spans[1].end_s == 18.0);
    }

    SUBCASE("same case merges at threshold 7") {
        std::vector<int> bits = {1, 0, 0, 0, 0, 0, 0, 0, 1};
        std::vector<double> scores = {0.9, 0, 0, 0, 0, 0, 0, 0, 0.8};
        auto spans = aggregate(bits, scores, 0.5, 7);
        REQUIRE(spans.size() == 1);
        CHECK(spans[0].end_s == 18.0);
    }

    SUBCASE("all-zero bits give no spans") { CHECK(aggregate({0, 0, 0}, {0.1, 0.2, 0.3}, 0.5, 6).empty()); }

    SUBCASE("argument checks") {
        CHECK_THROWS_AS(aggregate({1, 0}, {0.5}, 0.5, 6), ArgumentError);
        CHECK_THROWS_AS(aggregate({1}, {0.5}, 0.0, 6), ArgumentError);
        CHECK_THROWS_AS(aggregate({1}, {0.5}, 0.5, -1), ArgumentError);
    }

    SUBCASE("spans come out sorted by descending confidence") {
        auto spans = aggregate({1, 0, 0, 0, 0, 0, 0, 0, 1}, {0.3, 0, 0, 0, 0, 0, 0, 0, 0.9}, 1.0, 2);
        REQUIRE(spans.size() == 2);
        CHECK(spans[0].confidence == 0.9);
        CHECK(spans[1].confidence == 0.3);
    }
}

TEST_CASE("iou") {
    CHECK(iou(3.0, 7.0, 3.0, 7.0) == 1.0);
    CHECK(iou(0.0, 1.0, 2.0, 3.0) == 0.0);
    CHECK(iou(0.0, 10.0, 5.0, 15.0) == doctest::Approx(5.0 / 15.0));

    SUBCASE("symmetry and range") {
        Rng rng(5);
        for (int rep = 0; rep < 500; ++rep) {
            double a = rng.range(0, 10), b = a + rng.range(0.1, 10);
            double c = rng.range(0, 10), d = c + rng.range(0.1, 10);
            double ab = iou(a, b, c, d), ba = iou(c, d, a, b);
            CHECK(ab == ba);
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
        }
    }
}

TEST_CASE("average_precision worked examples") {
    CHECK(average_precision({pred(2, 8, 0.9)}, {gt(2, 8)}, 0.95) == 1.0);
    CHECK(average_precision({pred(5, 15, 0.9)}, {gt(0, 10)}, 0.5) == 0.0);  // IoU 1/3
    // correct span ranked first saturates recall; the later spurious one cannot hurt
    CHECK(average_precision({pred(0, 10, 0.9), pred(50, 60, 0.8)}, {gt(0, 10)}, 0.5) == 1.0);
    CHECK(average_precision({}, {}, 0.5) == 1.0);
    CHECK(average_precision({pred(0, 1, 0.5)}, {}, 0.5) == 0.0);
    CHECK(average_precision({}, {gt(0, 1)}, 0.5) == 0.0);
    // spurious ranked first: precision at the recall point drops to 1/2
    CHECK(average_precision({pred(50, 60, 0.9), pred(0, 10, 0.8)}, {gt(0, 10)}, 0.5) == 0.5);
}

TEST_CASE("average_precision equals the brute-force oracle on exhaustive small cases") {
    // all span layouts on a coarse grid, up to 3 predictions and 3 ground truths
    std::vector<std::pair<double, double>> all_spans;
    for (int s = 0; s < 5; ++s)
        for (int e = s + 1; e <= 5; ++e) all_spans.emplace_back(2.0 * s, 2.0 * e);
    const double confs[3] = {0.9, 0.8, 0.7};

    long checked = 0;
    for (int np = 0; np <= 3; ++np) {
        std::vector<int> pi(np, 0);
        for (;;) {
            for (int ng = 0; ng <= 2; ++ng) {  // 3 gts covered by the randomized sweep below
                std::vector<int> gi(ng, 0);
                for (;;) {
                    std::vector<SpanPrediction> preds;
                    for (int i = 0; i < np; ++i)
                        preds.push_back(pred(all_spans[pi[i]].first, all_spans[pi[i]].second, confs[i]));
                    std::vector<MomentAnnotation> gts;
                    for (int i = 0; i < ng; ++i) gts.push_back(gt(all_spans[gi[i]].first, all_spans[gi[i]].second));
                    for (double thr : {0.5, 0.75}) {
                        double got = average_precision(preds, gts, thr);
                        double want = average_precision_oracle(preds, gts, thr);
                        REQUIRE(got == doctest::Approx(want).epsilon(1e-12));
                    }
                    ++checked;
                    int pos = ng - 1;
                    while (pos >= 0 && gi[pos] == static_cast<int>(all_spans.size()) - 1) gi[pos--] = 0;
                    if (pos < 0) break;
                    gi[pos]++;
                }
            }
            int pos = np - 1;
            while (pos >= 0 && pi[pos] == static_cast<int>(all_spans.size()) - 1) pi[pos--] = 0;
            if (pos < 0) break;
            pi[pos]++;
        }
    }
    CHECK(checked > 100000);

    SUBCASE("randomized 3x3 cases including confidence ties") {
        Rng rng(77);
        for (int rep = 0; rep < 2000; ++rep) {
            int np = rng.below_int(4), ng = rng.below_int(4);
            std::vector<SpanPrediction> preds;
            std::vector<MomentAnnotation> gts;
            for (int i = 0; i < np; ++i) {
                double s = 2.0 * rng.below_int(5);
                preds.push_back(pred(s, s + 2.0 * (1 + rng.below_int(3)), rng.below(2) ? 0.5 : 0.9));
            }
            for (int i = 0; i < ng; ++i) {
                double s = 2.0 * rng.below_int(5);
                gts.push_back(gt(s, s + 2.0 * (1 + rng.below_int(3))));
            }
            for (double thr : {0.5, 0.7, 0.95}) {
                CHECK(average_precision(preds, gts, thr) ==
                      doctest::Approx(average_precision_oracle(preds, gts, thr)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("greedy matching never beats the optimal matching at any rank") {
    Rng rng(13);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<SpanPrediction> preds;
        std::vector<MomentAnnotation> gts;
        int np = 1 + rng.below_int(3), ng = 1 + rng.below_int(3);
        for (int i = 0; i < np; ++i) {
            double s = rng.range(0, 8);
            preds.push_back(pred(s, s + rng.range(0.5, 8), 0.9 - 0.1 * i));
        }
        for (int i = 0; i < ng; ++i) {
            double s = rng.range(0, 8);
            gts.push_back(gt(s, s + rng.range(0.5, 8)));
        }
        const double thr = 0.5;
        // replay the contract's matching rule
        std::vector<bool> used(gts.size(), false);
        int greedy_cum = 0;
        for (size_t i = 0; i < preds.size(); ++i) {
            int best = -1;
            double best_iou = 0.0;
            for (size_t j = 0; j < gts.size(); ++j) {
                if (used[j]) continue;
                double v = iou_oracle(preds[i].start_s, preds[i].end_s, gts[j].start_s, gts[j].end_s);
                if (v >= thr && v > best_iou) {
                    best = static_cast<int>(j);
                    best_iou = v;
                }
            }
            if (best >= 0) {
                used[best] = true;
                ++greedy_cum;
            }
            CHECK(greedy_cum <= max_matching_tp(preds, gts, thr, i + 1));
        }
    }
}

TEST_CASE("map_over_ladder") {
    EvalLadder ladder = EvalLadder::standard();
    REQUIRE(ladder.thresholds.size() == 10);
    CHECK(ladder.thresholds.front() == 0.5);
    CHECK(ladder.thresholds.back() == 0.95);

    SUBCASE("perfect predictions reach 1.0") {
        std::vector<QueryCase> cases = {{{pred(0, 4, 0.9)}, {gt(0, 4)}}, {{pred(2, 6, 0.8)}, {gt(2, 6)}}};
        CHECK(map_over_ladder(cases, ladder) == 1.0);
    }

    SUBCASE("no predictions score 0.0") {
        std::vector<QueryCase> cases = {{{}, {gt(0, 4)}}, {{}, {gt(2, 6)}}};
        CHECK(map_over_ladder(cases, ladder) == 0.0);
    }

    SUBCASE("a single query at IoU 0.6 passes exactly three rungs") {
        std::vector<QueryCase> cases = {{{pred(0, 6, 0.9)}, {gt(0, 10)}}};  // IoU = 0.6
        CHECK(map_over_ladder(cases, ladder) == doctest::Approx(0.3));
    }
}

TEST_CASE("recall_at_1") {
    std::vector<QueryCase> cases = {
        {{pred(0, 6, 0.9)}, {gt(0, 10)}},  // top-1 IoU 0.6
        {{pred(0, 4, 0.9)}, {gt(0, 10)}},  // top-1 IoU 0.4
    };
    CHECK(recall_at_1(cases, 0.5) == 0.5);

    SUBCASE("exact top-1 predictions hit at both standard thresholds") {
        std::vector<QueryCase> exact = {{{pred(0, 4, 0.9), pred(8, 9, 0.1)}, {gt(0, 4)}},
                                        {{pred(2, 6, 0.9)}, {gt(2, 6)}}};
        CHECK(recall_at_1(exact, 0.5) == 1.0);
        CHECK(recall_at_1(exact, 0.7) == 1.0);
    }

    SUBCASE("queries without predictions are misses") {
        std::vector<QueryCase> none = {{{}, {gt(0, 4)}}};
        CHECK(recall_at_1(none, 0.5) == 0.0);
    }

    SUBCASE("non-increasing in the threshold") {
        Rng rng(3);
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<QueryCase> cases2;
            int nq = 1 + rng.below_int(5);
            for (int q = 0; q < nq; ++q) {
                QueryCase qc;
                int np = rng.below_int(3);
                for (int i = 0; i < np; ++i) {
                    double s = rng.range(0, 8);
                    qc.preds.push_back(pred(s, s + rng.range(0.5, 6), rng.unit()));
                }
                double s = rng.range(0, 8);
                qc.gts.push_back(gt(s, s + rng.range(0.5, 6)));
                cases2.push_back(std::move(qc));
            }
            double prev = 1.1;
            for (double thr : EvalLadder::standard().thresholds) {
                double r = recall_at_1(cases2, thr);
                CHECK(r <= prev);
                prev = r;
            }
        }
    }
}

TEST_CASE("aligned spans survive the label/aggregate round trip exactly") {
    Rng rng(21);
    const int span_threshold = 6;
    int done = 0;
    while (done < 500) {
        double fps = (rng.below(2) == 0) ? 0.5 : 1.0;
        int n = 20 + rng.below_int(41);
        // lay down positive runs separated by gaps > span_threshold
        std::vector<std::pair<int, int>> runs;
        int cursor = rng.below_int(4);
        while (cursor < n) {
            int len = 1 + rng.below_int(5);
            if (cursor + len > n) break;
            runs.emplace_back(cursor, cursor + len);
            cursor += len + span_threshold + 1 + rng.below_int(4);
        }
        if (runs.empty()) continue;
        ++done;

        std::vector<MomentAnnotation> spans;
        std::vector<double> ts(n);
        for (int i = 0; i < n; ++i) ts[i] = static_cast<double>(i) / fps;
        for (auto [a, b] : runs) spans.push_back(gt(a / fps, b / fps));

        auto bits = spans_to_frame_labels(spans, ts);
        std::vector<double> scores(n, 0.0);
        for (int i = 0; i < n; ++i) scores[i] = bits[i] ? 0.9 : 0.1;
        auto recovered = aggregate(bits, scores, fps, span_threshold);

        REQUIRE(recovered.size() == runs.size());
        std::sort(recovered.begin(), recovered.end(),
                  [](const SpanPrediction& a, const SpanPrediction& b) { return a.start_s < b.start_s; });
        for (size_t i = 0; i < runs.size(); ++i) {
            CHECK(recovered[i].start_s == runs[i].first / fps);
            CHECK(recovered[i].end_s == runs[i].second / fps);
        }
    }
}

TEST_CASE("metrics depend only on confidence ranks and not on query order") {
    Rng rng(8);
    std::vector<QueryCase> cases;
    for (int q = 0; q < 6; ++q) {
        QueryCase qc;
        for (int i = 0; i < 2 + static_cast<int>(rng.below(2)); ++i) {
            double s = rng.range(0, 10);
            qc.preds.push_back(pred(s, s + rng.range(0.5, 5), 0.1 + 0.2 * i));
        }
        double s = rng.range(0, 10);
        qc.gts.push_back(gt(s, s + rng.range(0.5, 5)));
        cases.push_back(std::move(qc));
    }
    EvalLadder ladder = EvalLadder::standard();
    double base_map = map_over_ladder(cases, ladder);
    double base_r1 = recall_at_1(cases, 0.5);

    SUBCASE("uniform positive confidence rescaling") {
        std::vector<QueryCase> scaled = cases;
        for (auto& qc : scaled)
            for (auto& p : qc.preds) p.confidence *= 3.7;
        CHECK(map_over_ladder(scaled, ladder) == base_map);
        CHECK(recall_at_1(scaled, 0.5) == base_r1);
    }

    SUBCASE("query permutation") {
        std::vector<QueryCase> shuffled = {cases[3], cases[0], cases[5], cases[1], cases[4], cases[2]};
        CHECK(map_over_ladder(shuffled, ladder) == base_map);
        CHECK(recall_at_1(shuffled, 0.5) == base_r1);
    }
}

TEST_CASE("auto span threshold averages the inter-span gaps in frames") {
    auto video = std::make_shared<VideoRecord>();
    video->video_id = "v";
    video->n_frames = 100;
    video->fps = 0.5;
    auto seq = std::make_shared<FrameFeatureSequence>();
    seq->dim = 1;
    seq->values.assign(100, 0.0);
    for (int i = 0; i < 100; ++i) seq->timestamps.push_back(i / 0.5);
    video->features = seq;

    MomentEntry multi{video, {"m1", "v", "q", {gt(0, 4), gt(16, 20), gt(28, 32)}}};
    // gaps: 12 s and 8 s -> 6 and 4 frames at 0.5 fps -> average 5
    CHECK(auto_span_threshold({multi}, 0.5) == 5);

    MomentEntry single{video, {"m2", "v", "q", {gt(0, 4)}}};
    CHECK(auto_span_threshold({single}, 0.5) == 6);      // fallback
    CHECK(auto_span_threshold({single}, 0.5, 9) == 9);
}

TEST_CASE("span prediction file round trip") {
    TempDir dir("spanio");
    std::vector<SpanPredictionEntry> entries = {{"m1", {pred(0, 8, 0.9), pred(16, 18, 0.4)}}, {"m2", {}}};
    write_span_predictions(dir.file("spans.jsonl"), entries);
    auto loaded = read_span_predictions(dir.file("spans.jsonl"));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].example_id == "m1");
    REQUIRE(loaded[0].spans.size() == 2);
    CHECK(loaded[0].spans[0].start_s == 0.0);
    CHECK(loaded[0].spans[0].confidence == 0.9);
    CHECK(loaded[1].spans.empty());
}

TEST_CASE("ladder validation") {
    EvalLadder bad;
    bad.thresholds = {0.5, 0.5};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad.thresholds = {0.0, 0.5};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
    bad.thresholds = {};
    CHECK_THROWS_AS(bad.validate(), ArgumentError);
}
