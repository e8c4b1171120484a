#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "locans/chain.hpp"
#include "locans/harness.hpp"

using namespace locans;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("bad JSON in " + path + ": " + e.what());
    }
}

SyntheticConfig synthetic_config_from_json(const json& j) {
    SyntheticConfig cfg;
    if (j.contains("n_videos")) cfg.n_videos = j.at("n_videos").get<int>();
    if (j.contains("n_frames")) cfg.n_frames = j.at("n_frames").get<int>();
    if (j.contains("window_len")) cfg.window_len = j.at("window_len").get<int>();
    if (j.contains("n_options")) cfg.n_options = j.at("n_options").get<int>();
    if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim").get<int>();
    if (j.contains("fps")) cfg.fps = j.at("fps").get<double>();
    if (j.contains("noise_rate")) cfg.noise_rate = j.at("noise_rate").get<double>();
    if (j.contains("concept_vocab")) cfg.concept_vocab = j.at("concept_vocab").get<int>();
    cfg.validate();
    return cfg;
}

// Training config files carry the run settings plus an optional "backbone"
// object for fresh adapter initialization.
struct TrainFileConfig {
    TrainRunConfig run;
    BackboneConfig backbone;
    bool backbone_given = false;
};

TrainFileConfig load_train_config(const std::string& path, int data_feature_dim) {
    json j = load_json_file(path);
    TrainFileConfig out;
    out.run = train_config_from_json(j);
    out.backbone.feature_dim = data_feature_dim;
    if (j.contains("backbone")) {
        out.backbone_given = true;
        json b = j.at("backbone");
        if (!b.contains("feature_dim")) b["feature_dim"] = data_feature_dim;
        out.backbone = backbone_config_from_json(b);
    }
    out.backbone.implementation = BackboneKind::trainable_toy;
    out.backbone.validate();
    return out;
}

int data_dim_of_qa(const std::vector<QaEntry>& entries) {
    if (entries.empty()) throw ArgumentError("dataset is empty");
    return entries.front().video->features->dim;
}

int data_dim_of_moments(const std::vector<MomentEntry>& entries) {
    if (entries.empty()) throw ArgumentError("dataset is empty");
    return entries.front().video->features->dim;
}

void write_oracle_checkpoints(const std::string& dir, const SyntheticConfig& cfg) {
    BackboneConfig oracle;
    oracle.implementation = BackboneKind::synthetic_oracle;
    oracle.feature_dim = cfg.feature_dim;
    oracle.query_dim = cfg.feature_dim;
    oracle.hidden_dim = 1;
    oracle.concept_vocab = cfg.concept_vocab;
    oracle.seed = 0;
    Backbone backbone(oracle);
    save_model(dir + "/oracle_localizer.ckpt", backbone, backbone.init_params(AdapterRole::localizer));
    save_model(dir + "/oracle_answerer.ckpt", backbone, backbone.init_params(AdapterRole::answerer));
}

int cmd_gen_data(const std::string& config_path, uint64_t seed, const std::string& out_dir) {
    SyntheticConfig cfg = synthetic_config_from_json(load_json_file(config_path));
    SyntheticCorpus corpus = generate_synthetic_corpus(cfg, seed);
    save_corpus(corpus, out_dir);
    write_oracle_checkpoints(out_dir, cfg);
    std::cout << "wrote " << corpus.qa.size() << " videos (" << cfg.n_frames << " frames, dim " << cfg.feature_dim
              << ") to " << out_dir << "\n";
    return 0;
}

int cmd_pretrain_loc(const std::string& data_dir, const std::string& config_path, const std::string& out_path) {
    auto moments = load_moment_dir(data_dir);
    TrainFileConfig cfg = load_train_config(config_path, data_dim_of_moments(moments));
    Backbone backbone(cfg.backbone);
    std::vector<PseudoLabelSet> converted;
    Checkpoint ckpt = pretrain_localizer(moments, backbone, cfg.run, nullptr, &converted);
    save_checkpoint(out_path, backbone.config(), ckpt);
    write_pseudo_label_dump(out_path + ".labels.jsonl", converted);
    std::cout << "pretrained localizer on " << moments.size() << " moment examples, " << ckpt.epoch
              << " epochs -> " << out_path << "\n";
    return 0;
}

int cmd_refine_loc(const std::string& data_dir, const std::string& answerer_path, const std::string& init_path,
                   const std::string& config_path, const std::string& out_path) {
    auto qa = load_qa_dir(data_dir);
    Model answerer = load_model(answerer_path);

    std::optional<Model> init;
    if (!init_path.empty()) init = load_model(init_path);

    TrainFileConfig cfg = load_train_config(config_path, data_dim_of_qa(qa));
    BackboneConfig loc_cfg = init ? init->backbone->config() : cfg.backbone;
    Backbone loc_backbone(loc_cfg);

    RefineStats stats;
    Checkpoint ckpt = refine_localizer(qa, answerer, loc_backbone, cfg.run, init ? &init->params : nullptr, &stats);
    save_checkpoint(out_path, loc_backbone.config(), ckpt,
                    json{{"pseudo_degenerate_fraction", stats.degenerate_fraction}});
    write_pseudo_label_dump(out_path + ".pseudo.jsonl", stats.pseudo_labels);
    std::cout << "refined localizer on " << qa.size() << " examples (degenerate pseudo-label fraction "
              << stats.degenerate_fraction << ") -> " << out_path << "\n";
    return 0;
}

int cmd_finetune_ans(const std::string& data_dir, const std::string& localizer_path, const std::string& sampling,
                     const std::string& config_path, const std::string& out_path) {
    auto qa = load_qa_dir(data_dir);
    TrainFileConfig cfg = load_train_config(config_path, data_dim_of_qa(qa));
    cfg.run.frame_sampling = frame_sampling_from_string(sampling);

    std::optional<Model> localizer;
    if (!localizer_path.empty()) localizer = load_model(localizer_path);
    if (cfg.run.frame_sampling == FrameSampling::localizer && !localizer)
        throw ConfigError("--sampling localizer needs --localizer CKPT");

    Backbone ans_backbone(cfg.backbone);
    Checkpoint ckpt = finetune_answerer(qa, localizer ? &*localizer : nullptr, ans_backbone, cfg.run);
    save_checkpoint(out_path, ans_backbone.config(), ckpt);
    std::cout << "fine-tuned answerer on " << qa.size() << " examples (" << sampling << " sampling) -> "
              << out_path << "\n";
    return 0;
}

int cmd_infer(const std::string& data_dir, const std::string& localizer_path, const std::string& answerer_path,
              int n, int k, const std::string& out_path) {
    auto qa = load_qa_dir(data_dir);
    Model localizer = load_model(localizer_path);
    Model answerer = load_model(answerer_path);
    std::vector<AnswerPrediction> preds;
    preds.reserve(qa.size());
    int correct = 0;
    for (const auto& e : qa) {
        preds.push_back(forward_infer(*e.video, e.qa, *localizer.backbone, localizer.params, *answerer.backbone,
                                      answerer.params, n, k));
        if (preds.back().predicted_index == e.qa.answer_index) ++correct;
    }
    write_prediction_dump(out_path, preds);
    std::cout << "wrote " << preds.size() << " predictions to " << out_path << " (accuracy "
              << static_cast<double>(correct) / static_cast<double>(preds.empty() ? 1 : preds.size()) << ")\n";
    return 0;
}

int cmd_eval_qa(const std::string& data_dir, const std::string& strategy, const std::string& localizer_path,
                const std::string& answerer_path, int n, int k, uint64_t seed, const std::string& out_path) {
    auto qa = load_qa_dir(data_dir);
    Model answerer = load_model(answerer_path);
    std::optional<Model> localizer;
    if (!localizer_path.empty()) localizer = load_model(localizer_path);

    EvalReport report =
        eval_qa(qa, qa_strategy_from_string(strategy), localizer ? &*localizer : nullptr, answerer, n, k, seed);
    json out = report_to_json(report);
    write_file(out_path, out.dump(2) + "\n");
    std::cout << "accuracy " << report.metrics.at("accuracy") << " repro_hash " << out.at("repro_hash").get<std::string>()
              << " -> " << out_path << "\n";
    return 0;
}

int cmd_eval_moment(const std::string& data_dir, const std::string& localizer_path, double fps, int span_threshold,
                    bool auto_threshold, bool single_span, const std::string& out_path,
                    const std::string& dump_scores, const std::string& dump_spans) {
    auto moments = load_moment_dir(data_dir);
    Model localizer = load_model(localizer_path);
    if (auto_threshold) {
        span_threshold = auto_span_threshold(moments, fps, span_threshold);
        std::cout << "auto span threshold: " << span_threshold << "\n";
    }
    MomentEvalArtifacts artifacts;
    bool want_artifacts = !dump_scores.empty() || !dump_spans.empty();
    EvalReport report =
        eval_moment(moments, localizer, fps, span_threshold, single_span, want_artifacts ? &artifacts : nullptr);
    if (!dump_scores.empty()) write_score_dump(dump_scores, artifacts.scores);
    if (!dump_spans.empty()) write_span_predictions(dump_spans, artifacts.spans);
    json out = report_to_json(report);
    write_file(out_path, out.dump(2) + "\n");
    std::cout << "mAP " << report.metrics.at("mAP") << " R1@0.5 " << report.metrics.at("R1@0.5") << " R1@0.7 "
              << report.metrics.at("R1@0.7") << " repro_hash " << out.at("repro_hash").get<std::string>() << " -> "
              << out_path << "\n";
    return 0;
}

int cmd_ablate(const std::string& spec_path, const std::string& out_dir) {
    json spec_json = load_json_file(spec_path);

    AblationSpec spec;
    for (const auto& c : spec_json.at("cells")) {
        if (!c.is_array() || c.size() != 2) throw ParseError("ablation cell must be an [n, k] pair");
        spec.cells.emplace_back(c[0].get<int>(), c[1].get<int>());
    }
    for (const auto& s : spec_json.at("strategies")) spec.strategies.push_back(qa_strategy_from_string(s));
    if (spec_json.contains("seeds"))
        for (const auto& s : spec_json.at("seeds")) spec.seeds.push_back(s.get<uint64_t>());
    else
        spec.seeds.push_back(0);

    auto qa = load_qa_dir(spec_json.at("data").get<std::string>());
    Model answerer = load_model(spec_json.at("answerer").get<std::string>());
    std::optional<Model> localizer;
    if (spec_json.contains("localizer")) localizer = load_model(spec_json.at("localizer").get<std::string>());

    AblationResult result = run_ablation(spec, qa, localizer ? &*localizer : nullptr, answerer);

    std::filesystem::create_directories(out_dir);
    json table{{"rows", result.table}, {"warnings", result.warnings}};
    write_file(out_dir + "/grid.json", table.dump(2) + "\n");
    write_file(out_dir + "/grid.txt", result.text_grid);
    std::cout << result.text_grid;
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_show(const std::string& video_id, const std::string& data_dir, const std::string& localizer_path, int k) {
    auto qa = load_qa_dir(data_dir);
    const QaEntry* entry = nullptr;
    for (const auto& e : qa)
        if (e.video->video_id == video_id) {
            entry = &e;
            break;
        }
    if (!entry) throw ArgumentError("video '" + video_id + "' not found in " + data_dir);

    Model localizer = load_model(localizer_path);
    LanguageContext ctx = build_loc_context(entry->qa.question, entry->qa.options);
    FrameScoreVector scores = score_frames(*entry->video, ctx, *localizer.backbone, localizer.params);
    int kk = std::min(k, entry->video->n_frames);
    KeyframeSelection sel = select_topk(scores, kk);

    std::optional<std::pair<int, int>> window;
    std::string truth_path = data_dir + "/truth.jsonl";
    if (std::filesystem::exists(truth_path)) {
        for (const auto& t : load_truth(truth_path))
            if (t.video_id == video_id) {
                window = {t.window_start, t.window_end};
                break;
            }
    }

    std::cout << video_id << "  (" << entry->video->n_frames << " frames @ " << entry->video->fps << " fps, top-"
              << kk << ")\n";
    std::cout << render_timeline(*entry->video, scores.scores, sel.indices, window ? &*window : nullptr);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"keyframe localization + answering chains with moment-retrieval evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_dir, answerer_path, localizer_path, init_path, strategy, sampling,
        spec_path, video_id, dump_scores, dump_spans;
    uint64_t seed = 0;
    int n = 32, k = 4, span_threshold = 6, show_k = 4;
    double fps = 0.5;
    bool single_span = false, auto_threshold = false;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus with latent relevance windows");
    gen->add_option("--config", config_path)->required();
    gen->add_option("--seed", seed)->required();
    gen->add_option("--out", out_path)->required();

    auto* pre = app.add_subcommand("pretrain-loc", "pre-train the localizer from moment span labels");
    pre->add_option("--data", data_dir)->required();
    pre->add_option("--config", config_path)->required();
    pre->add_option("--out", out_path)->required();

    auto* ref = app.add_subcommand("refine-loc", "refine the localizer on reverse-chain pseudo-labels");
    ref->add_option("--data", data_dir)->required();
    ref->add_option("--answerer", answerer_path)->required();
    ref->add_option("--init", init_path);
    ref->add_option("--config", config_path)->required();
    ref->add_option("--out", out_path)->required();

    auto* fin = app.add_subcommand("finetune-ans", "fine-tune the answerer through the forward chain");
    fin->add_option("--data", data_dir)->required();
    fin->add_option("--localizer", localizer_path);
    fin->add_option("--sampling", sampling)->required()->check(CLI::IsMember({"uniform", "random", "localizer"}));
    fin->add_option("--config", config_path)->required();
    fin->add_option("--out", out_path)->required();

    auto* inf = app.add_subcommand("infer", "forward-chain inference over a QA manifest");
    inf->add_option("--data", data_dir)->required();
    inf->add_option("--localizer", localizer_path)->required();
    inf->add_option("--answerer", answerer_path)->required();
    inf->add_option("--n", n)->required();
    inf->add_option("--k", k)->required();
    inf->add_option("--out", out_path)->required();

    auto* eqa = app.add_subcommand("eval-qa", "QA accuracy under a frame-selection strategy");
    eqa->add_option("--data", data_dir)->required();
    eqa->add_option("--strategy", strategy)
        ->required()
        ->check(CLI::IsMember({"uniform", "random", "localizer", "voting", "oracle"}));
    eqa->add_option("--localizer", localizer_path);
    eqa->add_option("--answerer", answerer_path)->required();
    eqa->add_option("--n", n)->required();
    eqa->add_option("--k", k)->required();
    eqa->add_option("--seed", seed)->required();
    eqa->add_option("--out", out_path)->required();

    auto* emo = app.add_subcommand("eval-moment", "moment retrieval metrics for a localizer");
    emo->add_option("--data", data_dir)->required();
    emo->add_option("--localizer", localizer_path)->required();
    emo->add_option("--fps", fps)->capture_default_str();
    emo->add_option("--span-threshold", span_threshold)->capture_default_str();
    emo->add_flag("--auto-span-threshold", auto_threshold,
                  "derive the span threshold from the manifest's inter-span gaps");
    emo->add_flag("--single-span", single_span);
    emo->add_option("--dump-scores", dump_scores, "also write the frame score dump (JSONL)");
    emo->add_option("--dump-spans", dump_spans, "also write the span predictions (JSONL)");
    emo->add_option("--out", out_path)->required();

    auto* abl = app.add_subcommand("ablate", "run an (n, k) x strategy x seed evaluation grid");
    abl->add_option("--spec", spec_path)->required();
    abl->add_option("--out", out_path)->required();

    auto* sho = app.add_subcommand("show", "render a text timeline of localizer scores for one video");
    sho->add_option("--video", video_id)->required();
    sho->add_option("--data", data_dir)->required();
    sho->add_option("--localizer", localizer_path)->required();
    sho->add_option("--k", show_k)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, seed, out_path);
        if (pre->parsed()) return cmd_pretrain_loc(data_dir, config_path, out_path);
        if (ref->parsed()) return cmd_refine_loc(data_dir, answerer_path, init_path, config_path, out_path);
        if (fin->parsed()) return cmd_finetune_ans(data_dir, localizer_path, sampling, config_path, out_path);
        if (inf->parsed()) return cmd_infer(data_dir, localizer_path, answerer_path, n, k, out_path);
        if (eqa->parsed()) return cmd_eval_qa(data_dir, strategy, localizer_path, answerer_path, n, k, seed, out_path);
        if (emo->parsed())
            return cmd_eval_moment(data_dir, localizer_path, fps, span_threshold, auto_threshold, single_span,
                                   out_path, dump_scores, dump_spans);
        if (abl->parsed()) return cmd_ablate(spec_path, out_path);
        if (sho->parsed()) return cmd_show(video_id, data_dir, localizer_path, show_k);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
