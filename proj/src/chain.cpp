#include "locans/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "locans/moment.hpp"

namespace locans {

using nlohmann::json;

namespace {

constexpr uint64_t kEpochTag = 0x65706f6368ull;    // "epoch"
constexpr uint64_t kRandomSampleTag = 0x726e64ull;  // "rnd"

void require_trainable(const Backbone& backbone, const char* what) {
    if (backbone.config().implementation != BackboneKind::trainable_toy)
        throw UnsupportedError(std::string(what) + " requires the trainable-toy backbone");
}

}  // namespace

std::string to_string(FrameSampling s) {
    switch (s) {
        case FrameSampling::uniform: return "uniform";
        case FrameSampling::localizer: return "localizer";
        case FrameSampling::random: return "random";
    }
    throw ArgumentError("bad frame sampling value");
}

FrameSampling frame_sampling_from_string(const std::string& s) {
    if (s == "uniform") return FrameSampling::uniform;
    if (s == "localizer") return FrameSampling::localizer;
    if (s == "random") return FrameSampling::random;
    throw ParseError("unknown frame sampling '" + s + "' (known: uniform, localizer, random)");
}

void TrainRunConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be a finite non-negative value");
    if (n_frames_in <= 0 || k_keyframes <= 0) throw ConfigError("n and k must be positive");
    if (k_keyframes > n_frames_in) throw ConfigError("k_keyframes exceeds n_frames_in");
    if (!(positive_weight > 0.0)) throw ConfigError("positive_weight must be positive");
}

json train_config_to_json(const TrainRunConfig& cfg) {
    return json{{"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"learning_rate", cfg.learning_rate},
                {"seed", cfg.seed},
                {"n_frames_in", cfg.n_frames_in},
                {"k_keyframes", cfg.k_keyframes},
                {"frame_sampling", to_string(cfg.frame_sampling)},
                {"positive_weight", cfg.positive_weight}};
}

TrainRunConfig train_config_from_json(const json& j) {
    TrainRunConfig cfg;
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("n_frames_in")) cfg.n_frames_in = j.at("n_frames_in").get<int>();
    if (j.contains("k_keyframes")) cfg.k_keyframes = j.at("k_keyframes").get<int>();
    if (j.contains("frame_sampling"))
        cfg.frame_sampling = frame_sampling_from_string(j.at("frame_sampling").get<std::string>());
    if (j.contains("positive_weight")) cfg.positive_weight = j.at("positive_weight").get<double>();
    cfg.validate();
    return cfg;
}

AnswerPrediction forward_infer(const VideoRecord& video, const QAExample& qa, const Backbone& loc_backbone,
                               const AdapterParams& loc_params, const Backbone& ans_backbone,
                               const AdapterParams& ans_params, int n, int k) {
    if (k < 1 || k > n) throw ArgumentError("forward_infer needs 1 <= k <= n");
    if (n > video.n_frames) throw ArgumentError("forward_infer needs n <= video n_frames");

    std::vector<int> sampled = uniform_sample(video.n_frames, n);
    LanguageContext loc_ctx = build_loc_context(qa.question, qa.options);
    std::vector<double> scores = score_frame_subset(video, sampled, loc_ctx, loc_backbone, loc_params);
    KeyframeSelection positions = select_topk(scores, k);

    std::vector<int> frame_indices;
    frame_indices.reserve(k);
    for (int p : positions.indices) frame_indices.push_back(sampled[p]);
    KeyframeSelection selection =
        make_keyframe_selection(std::move(frame_indices), positions.scores, video.n_frames);

    LanguageContext qa_ctx = build_qa_context(qa.question, qa.options);
    return answer_multi(video, selection, qa_ctx, ans_backbone, ans_params, qa.example_id);
}

PseudoLabelSet make_pseudo_labels(const VideoRecord& video, const QAExample& qa, const Backbone& ans_backbone,
                                  const AdapterParams& ans_params, int n) {
    std::vector<int> sampled = uniform_sample(video.n_frames, n);
    LanguageContext qa_ctx = build_qa_context(qa.question, qa.options);

    PseudoLabelSet out;
    out.example_id = qa.example_id;
    out.source = "reverse-chain";
    out.frame_indices = sampled;
    out.labels.reserve(sampled.size());
    for (int f : sampled) {
        AnswerPrediction pred = answer_single_frame(video, f, qa_ctx, ans_backbone, ans_params, qa.example_id);
        out.labels.push_back(pred.predicted_index == qa.answer_index ? 1 : 0);
    }
    return out;
}

Checkpoint train_localizer_on_labels(const std::vector<LocalizerLabelSet>& sets, const Backbone& backbone,
                                     const AdapterParams& init, const TrainRunConfig& config) {
    require_trainable(backbone, "localizer training");
    config.validate();
    if (sets.empty()) throw ArgumentError("localizer training needs a non-empty dataset");
    if (init.role != AdapterRole::localizer) throw ArgumentError("initial params must have the localizer role");

    std::vector<EmbeddedContext> contexts;
    contexts.reserve(sets.size());
    for (const auto& s : sets) {
        if (s.frame_indices.size() != s.labels.size())
            throw ArgumentError("label set sizes are inconsistent for example video '" + s.video->video_id + "'");
        contexts.push_back(backbone.embed_context(s.context));
    }

    struct ItemRef {
        int set;
        int pos;
    };
    std::vector<ItemRef> items;
    for (size_t si = 0; si < sets.size(); ++si)
        for (size_t p = 0; p < sets[si].frame_indices.size(); ++p)
            items.push_back({static_cast<int>(si), static_cast<int>(p)});
    if (items.empty()) throw ArgumentError("localizer training needs at least one labeled frame");

    Checkpoint ckpt;
    ckpt.params = init;
    ckpt.config = config;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(config.seed, mix_seed(kEpochTag, static_cast<uint64_t>(epoch))));
        std::vector<ItemRef> order = items;
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        size_t counted = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<LocTrainItem> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                const auto& s = sets[order[i].set];
                int frame = s.frame_indices[order[i].pos];
                int label = s.labels[order[i].pos];
                batch.push_back({s.video->features->frame(frame), &contexts[order[i].set], label,
                                 label == 1 ? config.positive_weight : 1.0});
            }
            auto [next, loss] = backbone.train_step(batch, ckpt.params, config.learning_rate);
            ckpt.params = std::move(next);
            loss_sum += loss * static_cast<double>(end - start);
            counted += end - start;
        }
        ckpt.train_loss_history.push_back(loss_sum / static_cast<double>(counted));
        ckpt.epoch = epoch + 1;
    }

    quantize_f32(ckpt.params);
    return ckpt;
}

Checkpoint pretrain_localizer(const std::vector<MomentEntry>& dataset, const Backbone& backbone,
                              const TrainRunConfig& config, const AdapterParams* init,
                              std::vector<PseudoLabelSet>* converted_labels) {
    require_trainable(backbone, "localizer pre-training");
    if (dataset.empty()) throw ArgumentError("localizer pre-training needs a non-empty dataset");

    std::vector<LocalizerLabelSet> sets;
    sets.reserve(dataset.size());
    for (const auto& e : dataset) {
        int n = std::min(config.n_frames_in, e.video->n_frames);
        std::vector<int> sampled = uniform_sample(e.video->n_frames, n);
        std::vector<double> ts;
        ts.reserve(sampled.size());
        for (int f : sampled) ts.push_back(e.video->features->timestamps[f]);

        LocalizerLabelSet s;
        s.video = e.video;
        s.context = build_loc_context(e.moment.query, {});
        s.frame_indices = std::move(sampled);
        s.labels = spans_to_frame_labels(e.moment.spans, ts);
        if (converted_labels)
            converted_labels->push_back({e.moment.example_id, "span-conversion", s.frame_indices, s.labels});
        sets.push_back(std::move(s));
    }

    AdapterParams start = init ? *init : backbone.init_params(AdapterRole::localizer);
    return train_localizer_on_labels(sets, backbone, start, config);
}

Checkpoint refine_localizer(const std::vector<QaEntry>& dataset, const Model& answerer, const Backbone& loc_backbone,
                            const TrainRunConfig& config, const AdapterParams* init, RefineStats* stats) {
    require_trainable(loc_backbone, "localizer refinement");
    if (dataset.empty()) throw ArgumentError("localizer refinement needs a non-empty dataset");

    std::vector<LocalizerLabelSet> sets;
    sets.reserve(dataset.size());
    int degenerate = 0;
    std::vector<PseudoLabelSet> dumps;
    for (const auto& e : dataset) {
        int n = std::min(config.n_frames_in, e.video->n_frames);
        PseudoLabelSet pseudo = make_pseudo_labels(*e.video, e.qa, *answerer.backbone, answerer.params, n);
        int positives = std::accumulate(pseudo.labels.begin(), pseudo.labels.end(), 0);
        if (positives == 0 || positives == static_cast<int>(pseudo.labels.size())) ++degenerate;

        LocalizerLabelSet s;
        s.video = e.video;
        s.context = build_loc_context(e.qa.question, e.qa.options);
        s.frame_indices = pseudo.frame_indices;
        s.labels = pseudo.labels;
        sets.push_back(std::move(s));
        if (stats) dumps.push_back(std::move(pseudo));
    }
    if (stats) {
        stats->degenerate_fraction = static_cast<double>(degenerate) / static_cast<double>(dataset.size());
        stats->pseudo_labels = std::move(dumps);
    }

    AdapterParams start = init ? *init : loc_backbone.init_params(AdapterRole::localizer);
    return train_localizer_on_labels(sets, loc_backbone, start, config);
}

Checkpoint finetune_answerer(const std::vector<QaEntry>& dataset, const Model* localizer,
                             const Backbone& ans_backbone, const TrainRunConfig& config,
                             const AdapterParams* init) {
    require_trainable(ans_backbone, "answerer fine-tuning");
    config.validate();
    if (dataset.empty()) throw ArgumentError("answerer fine-tuning needs a non-empty dataset");
    if (config.frame_sampling == FrameSampling::localizer && !localizer)
        throw ArgumentError("frame_sampling=localizer needs a localizer checkpoint");

    struct ExampleState {
        LanguageContext qa_ctx;
        EmbeddedContext embedded;
        std::vector<int> sampled;
        std::vector<int> fixed_selection;  // uniform / localizer sampling
    };
    std::vector<ExampleState> states(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const auto& e = dataset[i];
        auto& st = states[i];
        int n = std::min(config.n_frames_in, e.video->n_frames);
        int k = std::min(config.k_keyframes, n);
        st.qa_ctx = build_qa_context(e.qa.question, e.qa.options);
        st.embedded = ans_backbone.embed_context(st.qa_ctx);
        st.sampled = uniform_sample(e.video->n_frames, n);
        if (config.frame_sampling == FrameSampling::uniform) {
            for (int p : uniform_sample(n, k)) st.fixed_selection.push_back(st.sampled[p]);
        } else if (config.frame_sampling == FrameSampling::localizer) {
            LanguageContext loc_ctx = build_loc_context(e.qa.question, e.qa.options);
            std::vector<double> scores =
                score_frame_subset(*e.video, st.sampled, loc_ctx, *localizer->backbone, localizer->params);
            for (int p : select_topk(scores, k).indices) st.fixed_selection.push_back(st.sampled[p]);
        }
    }

    struct OwnedItem {
        std::vector<const double*> frames;
        std::vector<double> scales;
        std::vector<std::vector<double>> offsets;
        int example = 0;
    };

    Checkpoint ckpt;
    ckpt.params = init ? *init : ans_backbone.init_params(AdapterRole::answerer);
    if (ckpt.params.role != AdapterRole::answerer) throw ArgumentError("initial params must have the answerer role");
    ckpt.config = config;

    const int query_dim = ans_backbone.config().query_dim;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<OwnedItem> owned(dataset.size());
        for (size_t i = 0; i < dataset.size(); ++i) {
            const auto& e = dataset[i];
            auto& st = states[i];
            std::vector<int> selection;
            if (config.frame_sampling == FrameSampling::random) {
                Rng rng(mix_seed(mix_seed(config.seed, kRandomSampleTag),
                                 mix_seed(static_cast<uint64_t>(epoch), fnv1a64(e.qa.example_id))));
                int n = static_cast<int>(st.sampled.size());
                int k = std::min(config.k_keyframes, n);
                std::vector<int> positions = sample_distinct(rng, n, k);
                std::sort(positions.begin(), positions.end());
                for (int p : positions) selection.push_back(st.sampled[p]);
            } else {
                selection = st.fixed_selection;
            }
            auto& item = owned[i];
            item.example = static_cast<int>(i);
            for (size_t ord = 0; ord < selection.size(); ++ord) {
                int f = selection[ord];
                FoldComponents fc = frame_id_fold({static_cast<int>(ord), f}, query_dim);
                item.frames.push_back(e.video->features->frame(f));
                item.scales.push_back(fc.scale);
                item.offsets.push_back(std::move(fc.offset));
            }
        }

        Rng shuffle_rng(mix_seed(config.seed, mix_seed(kEpochTag, static_cast<uint64_t>(epoch))));
        std::vector<int> order(dataset.size());
        std::iota(order.begin(), order.end(), 0);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<QaTrainItem> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                const OwnedItem& item = owned[order[i]];
                QaTrainItem ti;
                ti.frames = item.frames;
                ti.fold_scales = item.scales;
                for (const auto& off : item.offsets) ti.fold_offsets.push_back(off.data());
                ti.context = &states[item.example].embedded;
                ti.target = dataset[item.example].qa.answer_index;
                batch.push_back(std::move(ti));
            }
            auto [next, loss] = ans_backbone.train_step(batch, ckpt.params, config.learning_rate);
            ckpt.params = std::move(next);
            loss_sum += loss * static_cast<double>(end - start);
        }
        ckpt.train_loss_history.push_back(loss_sum / static_cast<double>(order.size()));
        ckpt.epoch = epoch + 1;
    }

    quantize_f32(ckpt.params);
    return ckpt;
}

void save_checkpoint(const std::string& path, const BackboneConfig& backbone_config, const Checkpoint& ckpt,
                     const json& extra_metadata) {
    save_model(path, backbone_config, ckpt.params);
    json meta{{"config", train_config_to_json(ckpt.config)},
              {"seed", ckpt.config.seed},
              {"epochs_completed", ckpt.epoch},
              {"loss_history", ckpt.train_loss_history}};
    for (auto it = extra_metadata.begin(); it != extra_metadata.end(); ++it) meta[it.key()] = it.value();
    write_file(path + ".meta.json", meta.dump(2) + "\n");
}

void write_pseudo_label_dump(const std::string& path, const std::vector<PseudoLabelSet>& sets) {
    std::ostringstream out;
    for (const auto& s : sets) {
        json j{{"example_id", s.example_id}, {"labels", s.labels}, {"source", s.source}};
        out << j.dump() << "\n";
    }
    write_file(path, out.str());
}

}  // namespace locans
