#include "locans/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "locans/synthetic.hpp"

namespace locans {

using nlohmann::json;

namespace {

constexpr int kSidecarVersion = 1;

std::string index_id(char prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%c%05d", prefix, i);
    return std::string(buf);
}

void append_f32_le(std::string& out, float v) {
    uint32_t bits = std::bit_cast<uint32_t>(v);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_f32_le(const char* p) {
    uint32_t bits = static_cast<uint8_t>(p[0]) | (static_cast<uint32_t>(static_cast<uint8_t>(p[1])) << 8) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(p[2])) << 16) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(p[3])) << 24);
    return std::bit_cast<float>(bits);
}

std::string sibling_sidecar(const std::string& manifest_path) {
    std::filesystem::path p(manifest_path);
    return (p.parent_path() / "features.bin").string();
}

using VideoMap = std::unordered_map<std::string, std::shared_ptr<const VideoRecord>>;

VideoMap read_feature_sidecar(const std::string& path) {
    std::string blob;
    try {
        blob = read_file(path);
    } catch (const IoError&) {
        throw IoError("feature sidecar not found: " + path);
    }
    if (blob.size() < 8) throw ParseError("feature sidecar truncated: " + path);
    uint64_t header_len = 0;  // bytes 0..7, little-endian
    for (int i = 0; i < 8; ++i) header_len |= static_cast<uint64_t>(static_cast<uint8_t>(blob[i])) << (8 * i);
    if (8 + header_len > blob.size()) throw ParseError("feature sidecar header overruns file: " + path);

    json header;
    try {
        header = json::parse(blob.substr(8, header_len));
    } catch (const json::exception& e) {
        throw ParseError("feature sidecar header is not valid JSON (" + path + "): " + e.what());
    }
    if (!header.contains("version") || !header["version"].is_number_integer())
        throw ValidationError("feature sidecar missing mandatory version field: " + path);
    if (header["version"].get<int>() != kSidecarVersion)
        throw ValidationError("unsupported feature sidecar version in " + path);

    const char* payload = blob.data() + 8 + header_len;
    size_t payload_floats = (blob.size() - 8 - header_len) / 4;

    VideoMap out;
    for (const auto& v : header.at("videos")) {
        auto rec = std::make_shared<VideoRecord>();
        rec->video_id = v.at("video_id").get<std::string>();
        rec->n_frames = v.at("n_frames").get<int>();
        rec->fps = v.at("fps").get<double>();
        int dim = v.at("dim").get<int>();
        size_t offset = v.at("offset").get<size_t>();
        size_t count = static_cast<size_t>(rec->n_frames) * dim;
        if (offset + count > payload_floats)
            throw ParseError("feature payload for video '" + rec->video_id + "' overruns sidecar " + path);

        auto seq = std::make_shared<FrameFeatureSequence>();
        seq->dim = dim;
        seq->values.resize(count);
        for (size_t i = 0; i < count; ++i)
            seq->values[i] = static_cast<double>(read_f32_le(payload + (offset + i) * 4));
        seq->timestamps.resize(rec->n_frames);
        for (int i = 0; i < rec->n_frames; ++i) seq->timestamps[i] = static_cast<double>(i) / rec->fps;
        rec->features = seq;
        rec->validate();
        out.emplace(rec->video_id, std::move(rec));
    }
    return out;
}

// Calls fn(line_number, parsed_json) for every non-blank line.
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": malformed JSON line: " + e.what());
        }
        fn(line_no, j);
    }
}

std::shared_ptr<const VideoRecord> resolve_video(const VideoMap& videos, const std::string& video_id,
                                                 const std::string& example_id) {
    auto it = videos.find(video_id);
    if (it == videos.end())
        throw ValidationError("example '" + example_id + "' references unknown video_id '" + video_id + "'");
    return it->second;
}

}  // namespace

void FrameFeatureSequence::validate() const {
    if (dim <= 0) throw ValidationError("feature dim must be positive");
    if (values.size() != timestamps.size() * static_cast<size_t>(dim))
        throw ValidationError("feature value count does not match n_frames * dim");
    for (double v : values)
        if (!std::isfinite(v)) throw ValidationError("non-finite feature component");
    for (size_t i = 0; i < timestamps.size(); ++i) {
        if (!std::isfinite(timestamps[i]) || timestamps[i] < 0.0)
            throw ValidationError("timestamps must be non-negative and finite");
        if (i > 0 && timestamps[i] <= timestamps[i - 1])
            throw ValidationError("timestamps must be strictly increasing");
    }
}

void VideoRecord::validate() const {
    if (video_id.empty()) throw ValidationError("video_id must be non-empty");
    if (n_frames <= 0) throw ValidationError("video '" + video_id + "': n_frames must be positive");
    if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError("video '" + video_id + "': fps must be > 0");
    if (!features) throw ValidationError("video '" + video_id + "': missing features");
    features->validate();
    if (features->n_frames() != n_frames)
        throw ValidationError("video '" + video_id + "': features have " + std::to_string(features->n_frames()) +
                              " frames, expected " + std::to_string(n_frames));
}

void QAExample::validate() const {
    if (options.size() < 2) throw ValidationError("example '" + example_id + "': needs at least 2 options");
    for (const auto& o : options)
        if (o.empty()) throw ValidationError("example '" + example_id + "': empty option string");
    if (answer_index < 0 || answer_index >= static_cast<int>(options.size()))
        throw ValidationError("example '" + example_id + "': answer_index " + std::to_string(answer_index) +
                              " out of range for " + std::to_string(options.size()) + " options");
}

void MomentExample::validate(double video_duration_s) const {
    if (spans.empty()) throw ValidationError("example '" + example_id + "': spans must be non-empty");
    for (const auto& s : spans) {
        if (!(s.start_s >= 0.0) || !(s.start_s < s.end_s))
            throw ValidationError("example '" + example_id + "': span must satisfy 0 <= start < end");
        if (s.end_s > video_duration_s)
            throw ValidationError("example '" + example_id + "': span exceeds video duration");
    }
}

void SyntheticConfig::validate() const {
    if (n_videos <= 0 || n_frames <= 0 || window_len <= 0 || n_options <= 0 || feature_dim <= 0 ||
        concept_vocab <= 0)
        throw ConfigError("synthetic config fields must be positive");
    if (!(fps > 0.0)) throw ConfigError("synthetic config fps must be > 0");
    if (window_len > n_frames) throw ConfigError("window_len exceeds n_frames");
    if (n_options < 2) throw ConfigError("n_options must be >= 2");
    if (n_options > concept_vocab) throw ConfigError("n_options exceeds concept_vocab");
    if (concept_vocab + 1 > feature_dim) throw ConfigError("concept_vocab must be <= feature_dim - 1");
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw ConfigError("noise_rate must be in [0, 1)");
}

std::vector<int> uniform_sample(int n_total, int n) {
    if (n_total <= 0) throw ArgumentError("uniform_sample: n_total must be positive");
    if (n < 1 || n > n_total)
        throw ArgumentError("uniform_sample: need 1 <= n <= n_total, got n=" + std::to_string(n) +
                            " n_total=" + std::to_string(n_total));
    std::vector<int> out(n);
    for (int i = 0; i < n; ++i) {
        // floor((i + 0.5) * n_total / n), in exact integer arithmetic
        out[i] = static_cast<int>((static_cast<int64_t>(2 * i + 1) * n_total) / (2 * n));
    }
    return out;
}

std::vector<QaEntry> load_qa_manifest(const std::string& manifest_path) {
    return load_qa_manifest(manifest_path, sibling_sidecar(manifest_path));
}

std::vector<QaEntry> load_qa_manifest(const std::string& manifest_path, const std::string& sidecar_path) {
    VideoMap videos = read_feature_sidecar(sidecar_path);
    std::vector<QaEntry> out;
    for_each_jsonl_line(manifest_path, [&](int line_no, const json& j) {
        QAExample qa;
        try {
            qa.example_id = j.at("example_id").get<std::string>();
            qa.video_id = j.at("video_id").get<std::string>();
            qa.question = j.at("question").get<std::string>();
            qa.options = j.at("options").get<std::vector<std::string>>();
            qa.answer_index = j.at("answer_index").get<int>();
        } catch (const json::exception& e) {
            throw ParseError(manifest_path + ":" + std::to_string(line_no) + ": bad QA record: " + e.what());
        }
        qa.validate();
        out.push_back({resolve_video(videos, qa.video_id, qa.example_id), std::move(qa)});
    });
    return out;
}

std::vector<MomentEntry> load_moment_manifest(const std::string& manifest_path) {
    return load_moment_manifest(manifest_path, sibling_sidecar(manifest_path));
}

std::vector<MomentEntry> load_moment_manifest(const std::string& manifest_path, const std::string& sidecar_path) {
    VideoMap videos = read_feature_sidecar(sidecar_path);
    std::vector<MomentEntry> out;
    for_each_jsonl_line(manifest_path, [&](int line_no, const json& j) {
        MomentExample m;
        try {
            m.example_id = j.at("example_id").get<std::string>();
            m.video_id = j.at("video_id").get<std::string>();
            m.query = j.at("query").get<std::string>();
            for (const auto& s : j.at("spans")) {
                if (!s.is_array() || s.size() != 2)
                    throw ValidationError("example '" + m.example_id + "': span must be a [start, end] pair");
                m.spans.push_back({s[0].get<double>(), s[1].get<double>()});
            }
        } catch (const json::exception& e) {
            throw ParseError(manifest_path + ":" + std::to_string(line_no) + ": bad moment record: " + e.what());
        }
        auto video = resolve_video(videos, m.video_id, m.example_id);
        m.validate(video->duration_s());
        out.push_back({std::move(video), std::move(m)});
    });
    return out;
}

std::vector<SyntheticGroundTruth> load_truth(const std::string& path) {
    std::vector<SyntheticGroundTruth> out;
    for_each_jsonl_line(path, [&](int line_no, const json& j) {
        SyntheticGroundTruth t;
        try {
            t.video_id = j.at("video_id").get<std::string>();
            t.window_start = j.at("window").at(0).get<int>();
            t.window_end = j.at("window").at(1).get<int>();
            t.noise_rate = j.at("noise_rate").get<double>();
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad truth record: " + e.what());
        }
        out.push_back(std::move(t));
    });
    return out;
}

void write_feature_sidecar(const std::string& path,
                           const std::vector<std::shared_ptr<const VideoRecord>>& videos) {
    json header;
    header["version"] = kSidecarVersion;
    header["videos"] = json::array();
    std::string payload;
    size_t offset = 0;
    for (const auto& v : videos) {
        header["videos"].push_back({{"video_id", v->video_id},
                                    {"n_frames", v->n_frames},
                                    {"fps", v->fps},
                                    {"dim", v->features->dim},
                                    {"offset", offset}});
        for (double x : v->features->values) append_f32_le(payload, static_cast<float>(x));
        offset += v->features->values.size();
    }
    std::string header_str = header.dump();
    std::string blob;
    uint64_t len = header_str.size();
    for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    blob += header_str;
    blob += payload;
    write_file(path, blob);
}

void save_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);

    std::vector<std::shared_ptr<const VideoRecord>> videos;
    std::unordered_map<std::string, bool> seen;
    auto collect = [&](const std::shared_ptr<const VideoRecord>& v) {
        if (!seen.count(v->video_id)) {
            seen[v->video_id] = true;
            videos.push_back(v);
        }
    };
    for (const auto& e : corpus.qa) collect(e.video);
    for (const auto& e : corpus.moments) collect(e.video);
    write_feature_sidecar(dir + "/features.bin", videos);

    std::ostringstream qa;
    for (const auto& e : corpus.qa) {
        json j{{"example_id", e.qa.example_id},
               {"video_id", e.qa.video_id},
               {"question", e.qa.question},
               {"options", e.qa.options},
               {"answer_index", e.qa.answer_index}};
        qa << j.dump() << "\n";
    }
    write_file(dir + "/qa.jsonl", qa.str());

    std::ostringstream mo;
    for (const auto& e : corpus.moments) {
        json spans = json::array();
        for (const auto& s : e.moment.spans) spans.push_back({s.start_s, s.end_s});
        json j{{"example_id", e.moment.example_id},
               {"video_id", e.moment.video_id},
               {"query", e.moment.query},
               {"spans", spans}};
        mo << j.dump() << "\n";
    }
    write_file(dir + "/moments.jsonl", mo.str());

    std::ostringstream tr;
    for (const auto& t : corpus.truth) {
        json j{{"video_id", t.video_id},
               {"window", {t.window_start, t.window_end}},
               {"noise_rate", t.noise_rate}};
        tr << j.dump() << "\n";
    }
    write_file(dir + "/truth.jsonl", tr.str());
}

std::vector<QaEntry> load_qa_dir(const std::string& dir) {
    return load_qa_manifest(dir + "/qa.jsonl", dir + "/features.bin");
}

std::vector<MomentEntry> load_moment_dir(const std::string& dir) {
    return load_moment_manifest(dir + "/moments.jsonl", dir + "/features.bin");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config, uint64_t seed) {
    config.validate();
    const PlantedGeometry& geo = PlantedGeometry::get(config.feature_dim, config.concept_vocab);
    const double amp = PlantedGeometry::noise_amplitude(config.feature_dim);
    const int dim = config.feature_dim;

    Rng rng(mix_seed(0x636f72707573ull, seed));
    SyntheticCorpus corpus;
    corpus.config = config;

    for (int vi = 0; vi < config.n_videos; ++vi) {
        const std::string video_id = index_id('v', vi);
        const int window_start = rng.below_int(config.n_frames - config.window_len + 1);
        const int window_end = window_start + config.window_len;
        const int answer_index = rng.below_int(config.n_options);
        const std::vector<int> concept_ids = sample_distinct(rng, config.concept_vocab, config.n_options);

        auto seq = std::make_shared<FrameFeatureSequence>();
        seq->dim = dim;
        seq->values.resize(static_cast<size_t>(config.n_frames) * dim);
        seq->timestamps.resize(config.n_frames);

        for (int f = 0; f < config.n_frames; ++f) {
            seq->timestamps[f] = static_cast<double>(f) / config.fps;
            double* frame = seq->values.data() + static_cast<size_t>(f) * dim;
            for (int d = 0; d < dim; ++d) frame[d] = rng.range(-amp, amp);

            // Out-of-window frames stay pure noise: the oracle's answer from
            // them is an argmax over exchangeable noise projections, which is
            // uniform over the options, so irrelevant frames answer correctly
            // with probability exactly 1/n_options.
            const bool in_window = f >= window_start && f < window_end;
            if (in_window) {
                for (int d = 0; d < dim; ++d) frame[d] += PlantedGeometry::kRelevanceScale * geo.relevance()[d];
                int planted;
                const bool flipped = rng.unit() < config.noise_rate;
                if (flipped) {
                    // a uniformly random wrong option, so an in-window frame
                    // answers correctly with probability exactly 1 - noise_rate
                    int wrong = rng.below_int(config.n_options - 1);
                    planted = wrong >= answer_index ? wrong + 1 : wrong;
                } else {
                    planted = answer_index;
                }
                const double* dir = geo.concept_dir(concept_ids[planted]);
                for (int d = 0; d < dim; ++d) frame[d] += PlantedGeometry::kAnswerScale * dir[d];
            }
            // features travel as 32-bit floats; quantize now so the in-memory
            // corpus matches a save/load round trip bit for bit
            for (int d = 0; d < dim; ++d) frame[d] = static_cast<double>(static_cast<float>(frame[d]));
        }

        auto video = std::make_shared<VideoRecord>();
        video->video_id = video_id;
        video->n_frames = config.n_frames;
        video->fps = config.fps;
        video->features = seq;
        video->validate();

        QAExample qa;
        qa.example_id = index_id('q', vi);
        qa.video_id = video_id;
        qa.question = "Which concept is shown in the highlighted moment of video " + video_id + "?";
        for (int o = 0; o < config.n_options; ++o) qa.options.push_back(PlantedGeometry::concept_name(concept_ids[o]));
        qa.answer_index = answer_index;
        qa.validate();

        MomentExample moment;
        moment.example_id = index_id('m', vi);
        moment.video_id = video_id;
        moment.query = qa.question;
        moment.spans.push_back({static_cast<double>(window_start) / config.fps,
                                static_cast<double>(window_end) / config.fps});
        moment.validate(video->duration_s());

        corpus.qa.push_back({video, std::move(qa)});
        corpus.moments.push_back({video, std::move(moment)});
        corpus.truth.push_back({video_id, window_start, window_end, config.noise_rate});
    }
    return corpus;
}

}  // namespace locans
