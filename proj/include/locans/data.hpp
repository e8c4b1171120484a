#pragma once

#include <memory>
#include <string>
#include <vector>

#include "locans/common.hpp"

namespace locans {

// Per-frame feature vectors for one video, stored flat (frame-major).
struct FrameFeatureSequence {
    int dim = 0;
    std::vector<double> values;      // n_frames * dim
    std::vector<double> timestamps;  // seconds, strictly increasing

    int n_frames() const { return static_cast<int>(timestamps.size()); }
    const double* frame(int i) const { return values.data() + static_cast<size_t>(i) * dim; }
    void validate() const;
};

struct VideoRecord {
    std::string video_id;
    int n_frames = 0;
    double fps = 0.0;  // frames per second
    std::shared_ptr<const FrameFeatureSequence> features;

    double duration_s() const { return static_cast<double>(n_frames) / fps; }
    void validate() const;
};

struct QAExample {
    std::string example_id;
    std::string video_id;
    std::string question;
    std::vector<std::string> options;
    int answer_index = 0;

    void validate() const;
};

struct MomentAnnotation {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct MomentExample {
    std::string example_id;
    std::string video_id;
    std::string query;
    std::vector<MomentAnnotation> spans;

    void validate(double video_duration_s) const;
};

// Latent relevance window behind a synthetic video, [start_frame, end_frame).
struct SyntheticGroundTruth {
    std::string video_id;
    int window_start = 0;
    int window_end = 0;
    double noise_rate = 0.0;
};

struct SyntheticConfig {
    int n_videos = 100;
    int n_frames = 32;
    int window_len = 4;
    int n_options = 4;
    int feature_dim = 64;
    double fps = 0.5;
    double noise_rate = 0.1;
    int concept_vocab = 16;

    void validate() const;
};

struct QaEntry {
    std::shared_ptr<const VideoRecord> video;
    QAExample qa;
};

struct MomentEntry {
    std::shared_ptr<const VideoRecord> video;
    MomentExample moment;
};

struct SyntheticCorpus {
    SyntheticConfig config;
    std::vector<QaEntry> qa;
    std::vector<MomentEntry> moments;
    std::vector<SyntheticGroundTruth> truth;
};

// Centered uniform sampling: indices floor((i + 0.5) * n_total / n).
std::vector<int> uniform_sample(int n_total, int n);

// Manifest + feature sidecar IO. The default sidecar is features.bin next to
// the manifest.
std::vector<QaEntry> load_qa_manifest(const std::string& manifest_path);
std::vector<QaEntry> load_qa_manifest(const std::string& manifest_path, const std::string& sidecar_path);
std::vector<MomentEntry> load_moment_manifest(const std::string& manifest_path);
std::vector<MomentEntry> load_moment_manifest(const std::string& manifest_path, const std::string& sidecar_path);

std::vector<SyntheticGroundTruth> load_truth(const std::string& path);

// Corpus directory layout: qa.jsonl, moments.jsonl, features.bin, truth.jsonl.
void save_corpus(const SyntheticCorpus& corpus, const std::string& dir);
std::vector<QaEntry> load_qa_dir(const std::string& dir);
std::vector<MomentEntry> load_moment_dir(const std::string& dir);

void write_feature_sidecar(const std::string& path, const std::vector<std::shared_ptr<const VideoRecord>>& videos);

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config, uint64_t seed);

}  // namespace locans
