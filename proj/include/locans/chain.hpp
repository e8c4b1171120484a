#pragma once

#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "locans/answerer.hpp"
#include "locans/backbone.hpp"
#include "locans/context.hpp"
#include "locans/data.hpp"
#include "locans/localizer.hpp"

namespace locans {

struct PseudoLabelSet {
    std::string example_id;
    std::string source;              // "reverse-chain" or "span-conversion"
    std::vector<int> frame_indices;  // the sampled frames the labels refer to
    std::vector<int> labels;         // 0/1, parallel to frame_indices
};

enum class FrameSampling { uniform, localizer, random };
std::string to_string(FrameSampling s);
FrameSampling frame_sampling_from_string(const std::string& s);

struct TrainRunConfig {
    int epochs = 10;
    int batch_size = 8;
    double learning_rate = 3e-5;
    uint64_t seed = 0;
    int n_frames_in = 32;  // n
    int k_keyframes = 4;   // k
    FrameSampling frame_sampling = FrameSampling::uniform;
    double positive_weight = 1.0;  // yes-class weight for localizer cross-entropy

    void validate() const;
};

nlohmann::json train_config_to_json(const TrainRunConfig& cfg);
TrainRunConfig train_config_from_json(const nlohmann::json& j);

struct Checkpoint {
    AdapterParams params;
    TrainRunConfig config;
    int epoch = 0;
    std::vector<double> train_loss_history;  // one mean loss per completed epoch
};

// Forward chain: subsample n frames, score them against the localization
// context, keep the top k, answer from those keyframes.
AnswerPrediction forward_infer(const VideoRecord& video, const QAExample& qa, const Backbone& loc_backbone,
                               const AdapterParams& loc_params, const Backbone& ans_backbone,
                               const AdapterParams& ans_params, int n, int k);

// Reverse chain labeling: a sampled frame is a keyframe iff the frozen
// answerer answers correctly from that frame alone.
PseudoLabelSet make_pseudo_labels(const VideoRecord& video, const QAExample& qa, const Backbone& ans_backbone,
                                  const AdapterParams& ans_params, int n);

// One labeled localization task: binary labels over chosen frames of one
// video under one language context.
struct LocalizerLabelSet {
    std::shared_ptr<const VideoRecord> video;
    LanguageContext context;
    std::vector<int> frame_indices;
    std::vector<int> labels;
};

// The shared localizer trainer both pretraining and refinement reduce to.
Checkpoint train_localizer_on_labels(const std::vector<LocalizerLabelSet>& sets, const Backbone& backbone,
                                     const AdapterParams& init, const TrainRunConfig& config);

// converted_labels, when given, receives the span-converted frame labels as
// PseudoLabelSets with source "span-conversion"
Checkpoint pretrain_localizer(const std::vector<MomentEntry>& dataset, const Backbone& backbone,
                              const TrainRunConfig& config, const AdapterParams* init = nullptr,
                              std::vector<PseudoLabelSet>* converted_labels = nullptr);

struct RefineStats {
    double degenerate_fraction = 0.0;  // share of all-zero or all-one pseudo-label sets
    std::vector<PseudoLabelSet> pseudo_labels;
};

Checkpoint refine_localizer(const std::vector<QaEntry>& dataset, const Model& answerer, const Backbone& loc_backbone,
                            const TrainRunConfig& config, const AdapterParams* init = nullptr,
                            RefineStats* stats = nullptr);

Checkpoint finetune_answerer(const std::vector<QaEntry>& dataset, const Model* localizer, const Backbone& ans_backbone,
                             const TrainRunConfig& config, const AdapterParams* init = nullptr);

// Checkpoint file in the backbone format plus a <path>.meta.json with the run
// metadata {config, seed, loss_history, ...extras}.
void save_checkpoint(const std::string& path, const BackboneConfig& backbone_config, const Checkpoint& ckpt,
                     const nlohmann::json& extra_metadata = nlohmann::json::object());

void write_pseudo_label_dump(const std::string& path, const std::vector<PseudoLabelSet>& sets);

}  // namespace locans
