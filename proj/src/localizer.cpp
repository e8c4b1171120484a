#include "locans/localizer.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

namespace locans {

using nlohmann::json;

KeyframeSelection make_keyframe_selection(std::vector<int> indices, std::vector<double> scores, int n_frames) {
    if (indices.empty()) throw ArgumentError("keyframe selection must be non-empty");
    if (!scores.empty() && scores.size() != indices.size())
        throw ArgumentError("keyframe selection scores do not match indices");
    for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= n_frames)
            throw ArgumentError("keyframe index " + std::to_string(indices[i]) + " outside [0, " +
                                std::to_string(n_frames) + ")");
        if (i > 0 && indices[i] <= indices[i - 1])
            throw ArgumentError("keyframe indices must be strictly increasing");
    }
    return {std::move(indices), std::move(scores)};
}

FrameScoreVector score_frames(const VideoRecord& video, const LanguageContext& ctx, const Backbone& backbone,
                              const AdapterParams& params) {
    std::vector<int> all(video.n_frames);
    std::iota(all.begin(), all.end(), 0);
    return {video.video_id, score_frame_subset(video, all, ctx, backbone, params)};
}

std::vector<double> score_frame_subset(const VideoRecord& video, const std::vector<int>& frame_indices,
                                       const LanguageContext& ctx, const Backbone& backbone,
                                       const AdapterParams& params) {
    if (ctx.kind != ContextKind::localization)
        throw ArgumentError("frame scoring needs a localization context");
    EmbeddedContext embedded = backbone.embed_context(ctx);
    const int dim = video.features->dim;
    std::vector<double> out;
    out.reserve(frame_indices.size());
    for (int f : frame_indices) {
        if (f < 0 || f >= video.n_frames)
            throw ArgumentError("frame index " + std::to_string(f) + " outside video '" + video.video_id + "'");
        QueryFeature q = backbone.adapt(std::span<const double>(video.features->frame(f), dim), params);
        out.push_back(backbone.score_yes(q, embedded, params));
    }
    return out;
}

KeyframeSelection select_topk(const FrameScoreVector& scores, int k) { return select_topk(scores.scores, k); }

KeyframeSelection select_topk(const std::vector<double>& scores, int k) {
    const int n = static_cast<int>(scores.size());
    if (n == 0) throw ArgumentError("select_topk on an empty score vector");
    if (k < 1 || k > n)
        throw ArgumentError("select_topk needs 1 <= k <= n, got k=" + std::to_string(k) + " n=" + std::to_string(n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // ties toward the lower frame index
    });
    std::vector<int> picked(order.begin(), order.begin() + k);
    std::sort(picked.begin(), picked.end());  // hand keyframes over in temporal order
    std::vector<double> picked_scores;
    picked_scores.reserve(k);
    for (int idx : picked) picked_scores.push_back(scores[idx]);
    return {std::move(picked), std::move(picked_scores)};
}

FramePredictionBits binarize(const FrameScoreVector& scores) { return binarize(scores.scores); }

FramePredictionBits binarize(const std::vector<double>& scores) {
    FramePredictionBits out;
    out.threshold_rule = "score > 0.5";
    out.bits.reserve(scores.size());
    for (double s : scores) out.bits.push_back(s > 0.5 ? 1 : 0);
    return out;
}

void write_score_dump(const std::string& path, const std::vector<ScoreDumpEntry>& entries) {
    std::ostringstream out;
    for (const auto& e : entries) {
        json j{{"example_id", e.example_id}, {"video_id", e.video_id}, {"scores", e.scores}};
        out << j.dump() << "\n";
    }
    write_file(path, out.str());
}

std::vector<ScoreDumpEntry> read_score_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score dump: " + path);
    std::vector<ScoreDumpEntry> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            out.push_back({j.at("example_id").get<std::string>(), j.at("video_id").get<std::string>(),
                           j.at("scores").get<std::vector<double>>()});
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad score dump line: " + e.what());
        }
    }
    return out;
}

}  // namespace locans
