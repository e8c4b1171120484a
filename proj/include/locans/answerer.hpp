#pragma once

#include <string>
#include <vector>

#include "locans/backbone.hpp"
#include "locans/data.hpp"
#include "locans/localizer.hpp"

namespace locans {

// Position of a keyframe among the selected set plus its absolute frame
// index; both are folded into the query representation.
struct FrameIdToken {
    int ordinal = 0;
    int frame_index = 0;
};

struct FoldComponents {
    double scale = 1.0;              // per-ordinal content weight
    std::vector<double> offset;      // additive token embedding, query_dim
};

FoldComponents frame_id_fold(const FrameIdToken& token, int query_dim);
QueryFeature apply_fold(const QueryFeature& query, const FoldComponents& fold);

struct AnswerPrediction {
    std::string example_id;
    std::vector<double> option_loglik;
    int predicted_index = 0;  // argmax, ties toward the lower option index
    std::vector<int> frame_indices_used;
};

AnswerPrediction answer_multi(const VideoRecord& video, const KeyframeSelection& selection,
                              const LanguageContext& ctx, const Backbone& backbone, const AdapterParams& params,
                              const std::string& example_id = "");
AnswerPrediction answer_single_frame(const VideoRecord& video, int frame_index, const LanguageContext& ctx,
                                     const Backbone& backbone, const AdapterParams& params,
                                     const std::string& example_id = "");

// most frequent predicted_index, ties toward the lowest option index
int majority_vote(const std::vector<AnswerPrediction>& predictions);

// true iff any prediction matches the ground-truth option
bool oracle_correct(const std::vector<AnswerPrediction>& predictions, int answer_index);

int argmax_lowest(const std::vector<double>& values);

void write_prediction_dump(const std::string& path, const std::vector<AnswerPrediction>& predictions);
std::vector<AnswerPrediction> read_prediction_dump(const std::string& path);

}  // namespace locans
