#pragma once

#include <string>
#include <vector>

#include "locans/backbone.hpp"
#include "locans/data.hpp"

namespace locans {

struct FrameScoreVector {
    std::string video_id;
    std::vector<double> scores;  // one per frame, in (0,1)
};

// Top-k keyframes in temporal order. min selected score >= max unselected
// score, ties broken toward the lower frame index.
struct KeyframeSelection {
    std::vector<int> indices;
    std::vector<double> scores;  // parallel to indices; may be empty for hand-built selections
};

KeyframeSelection make_keyframe_selection(std::vector<int> indices, std::vector<double> scores, int n_frames);

struct FramePredictionBits {
    std::vector<int> bits;
    std::string threshold_rule;
};

// Frames are scored independently: scores[i] = score_yes(adapt(h_i), L).
FrameScoreVector score_frames(const VideoRecord& video, const LanguageContext& ctx, const Backbone& backbone,
                              const AdapterParams& params);
std::vector<double> score_frame_subset(const VideoRecord& video, const std::vector<int>& frame_indices,
                                       const LanguageContext& ctx, const Backbone& backbone,
                                       const AdapterParams& params);

KeyframeSelection select_topk(const FrameScoreVector& scores, int k);
KeyframeSelection select_topk(const std::vector<double>& scores, int k);

// bit i = 1 iff scores[i] > 0.5, i.e. yes outweighs no under the binary head
FramePredictionBits binarize(const FrameScoreVector& scores);
FramePredictionBits binarize(const std::vector<double>& scores);

struct ScoreDumpEntry {
    std::string example_id;
    std::string video_id;
    std::vector<double> scores;
};

void write_score_dump(const std::string& path, const std::vector<ScoreDumpEntry>& entries);
std::vector<ScoreDumpEntry> read_score_dump(const std::string& path);

}  // namespace locans
