#include "locans/answerer.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "locans/kernels.hpp"

namespace locans {

using nlohmann::json;

namespace {

constexpr uint64_t kOrdinalTag = 0x6f7264ull;   // "ord"
constexpr uint64_t kAbsoluteTag = 0x616273ull;  // "abs"
constexpr uint64_t kWeightTag = 0x706f7377ull;  // "posw"
constexpr double kTokenScale = 0.05;
constexpr double kOrdinalWeightAmp = 0.1;

std::vector<double> hashed_unit(uint64_t tag, uint64_t value, int dim) {
    Rng rng(mix_seed(tag, value));
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (double& x : v) {
        x = rng.gauss();
        norm2 += x * x;
    }
    double norm = std::sqrt(norm2);
    for (double& x : v) x /= norm;
    return v;
}

}  // namespace

FoldComponents frame_id_fold(const FrameIdToken& token, int query_dim) {
    if (token.ordinal < 0 || token.frame_index < 0) throw ArgumentError("frame-ID token fields must be non-negative");
    FoldComponents fc;
    Rng wrng(mix_seed(kWeightTag, static_cast<uint64_t>(token.ordinal)));
    fc.scale = 1.0 + kOrdinalWeightAmp * wrng.range(-1.0, 1.0);
    fc.offset.assign(query_dim, 0.0);
    std::vector<double> ord = hashed_unit(kOrdinalTag, static_cast<uint64_t>(token.ordinal), query_dim);
    std::vector<double> abs = hashed_unit(kAbsoluteTag, static_cast<uint64_t>(token.frame_index), query_dim);
    for (int i = 0; i < query_dim; ++i) fc.offset[i] = kTokenScale * (ord[i] + abs[i]);
    return fc;
}

QueryFeature apply_fold(const QueryFeature& query, const FoldComponents& fold) {
    if (query.vector.size() != fold.offset.size()) throw ArgumentError("fold components have the wrong dimension");
    QueryFeature out;
    out.vector.resize(query.vector.size());
    for (size_t i = 0; i < query.vector.size(); ++i)
        out.vector[i] = fold.scale * query.vector[i] + fold.offset[i];
    return out;
}

int argmax_lowest(const std::vector<double>& values) {
    if (values.empty()) throw ArgumentError("argmax of an empty vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

AnswerPrediction answer_multi(const VideoRecord& video, const KeyframeSelection& selection,
                              const LanguageContext& ctx, const Backbone& backbone, const AdapterParams& params,
                              const std::string& example_id) {
    if (ctx.kind != ContextKind::qa) throw ArgumentError("answering needs a qa context");
    // re-validate: hand-built selections reach this path too
    make_keyframe_selection(selection.indices, selection.scores, video.n_frames);

    EmbeddedContext embedded = backbone.embed_context(ctx);
    const int dim = video.features->dim;
    const int query_dim = backbone.config().query_dim;

    std::vector<QueryFeature> folded;
    folded.reserve(selection.indices.size());
    for (size_t i = 0; i < selection.indices.size(); ++i) {
        int f = selection.indices[i];
        QueryFeature q = backbone.adapt(std::span<const double>(video.features->frame(f), dim), params);
        FoldComponents fc = frame_id_fold({static_cast<int>(i), f}, query_dim);
        folded.push_back(apply_fold(q, fc));
    }

    AnswerPrediction pred;
    pred.example_id = example_id;
    pred.option_loglik = backbone.score_options(folded, embedded, params);
    pred.predicted_index = argmax_lowest(pred.option_loglik);
    pred.frame_indices_used = selection.indices;
    return pred;
}

AnswerPrediction answer_single_frame(const VideoRecord& video, int frame_index, const LanguageContext& ctx,
                                     const Backbone& backbone, const AdapterParams& params,
                                     const std::string& example_id) {
    if (frame_index < 0 || frame_index >= video.n_frames)
        throw ArgumentError("frame index " + std::to_string(frame_index) + " outside video '" + video.video_id +
                            "'");
    KeyframeSelection single{{frame_index}, {}};
    return answer_multi(video, single, ctx, backbone, params, example_id);
}

int majority_vote(const std::vector<AnswerPrediction>& predictions) {
    if (predictions.empty()) throw ArgumentError("majority_vote on an empty prediction list");
    std::map<int, int> counts;
    for (const auto& p : predictions) counts[p.predicted_index]++;
    int best = -1, best_count = -1;
    for (const auto& [idx, count] : counts) {
        if (count > best_count) {  // map iterates in index order, so ties keep the lowest
            best = idx;
            best_count = count;
        }
    }
    return best;
}

bool oracle_correct(const std::vector<AnswerPrediction>& predictions, int answer_index) {
    if (predictions.empty()) throw ArgumentError("oracle_correct on an empty prediction list");
    for (const auto& p : predictions)
        if (p.predicted_index == answer_index) return true;
    return false;
}

void write_prediction_dump(const std::string& path, const std::vector<AnswerPrediction>& predictions) {
    std::ostringstream out;
    for (const auto& p : predictions) {
        json j{{"example_id", p.example_id},
               {"predicted_index", p.predicted_index},
               {"option_loglik", p.option_loglik},
               {"frame_indices_used", p.frame_indices_used}};
        out << j.dump() << "\n";
    }
    write_file(path, out.str());
}

std::vector<AnswerPrediction> read_prediction_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prediction dump: " + path);
    std::vector<AnswerPrediction> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            AnswerPrediction p;
            p.example_id = j.at("example_id").get<std::string>();
            p.predicted_index = j.at("predicted_index").get<int>();
            p.option_loglik = j.at("option_loglik").get<std::vector<double>>();
            p.frame_indices_used = j.at("frame_indices_used").get<std::vector<int>>();
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad prediction line: " + e.what());
        }
    }
    return out;
}

}  // namespace locans
