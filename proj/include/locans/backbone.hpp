#pragma once

#include <json.hpp>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "locans/common.hpp"
#include "locans/context.hpp"

namespace locans {

class PlantedGeometry;

enum class AdapterRole { localizer, answerer };
enum class BackboneKind { synthetic_oracle, trainable_toy };

std::string to_string(AdapterRole role);
AdapterRole adapter_role_from_string(const std::string& s);
std::string to_string(BackboneKind kind);
BackboneKind backbone_kind_from_string(const std::string& s);

struct ParamArray {
    std::string name;
    std::vector<size_t> shape;
    std::vector<double> values;

    size_t size() const { return values.size(); }
};

// The trainable parameter arrays of one adapter. Everything else in a
// backbone is frozen. Treated as an immutable value: optimizer steps build a
// new instance instead of mutating.
struct AdapterParams {
    int version = 1;
    AdapterRole role = AdapterRole::answerer;
    std::vector<ParamArray> arrays;

    size_t total_size() const;
    const ParamArray& array(const std::string& name) const;
    ParamArray& array(const std::string& name);
    bool same_shapes(const AdapterParams& other) const;
};

// dst += a * src, shape-checked
void axpy_params(AdapterParams& dst, double a, const AdapterParams& src);
// round every value to the nearest 32-bit float (the checkpoint precision)
void quantize_f32(AdapterParams& params);

struct BackboneConfig {
    int feature_dim = 64;
    int query_dim = 32;
    int hidden_dim = 32;
    BackboneKind implementation = BackboneKind::trainable_toy;
    uint64_t seed = 0;
    int concept_vocab = 16;  // synthetic-oracle codebook size

    void validate() const;
};

nlohmann::json backbone_config_to_json(const BackboneConfig& cfg);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);

struct QueryFeature {
    std::vector<double> vector;
};

// Context with its frozen embeddings resolved, computed once per context and
// shared across the frames scored under it.
struct EmbeddedContext {
    const LanguageContext* context = nullptr;
    std::vector<double> rendered_embed;               // trainable-toy only
    std::vector<std::vector<double>> option_embeds;   // per option
};

struct LocTrainItem {
    const double* frame = nullptr;  // feature_dim values
    const EmbeddedContext* context = nullptr;
    int label = 0;  // 0/1
    double weight = 1.0;
};

struct QaTrainItem {
    std::vector<const double*> frames;          // selected keyframes, temporal order
    std::vector<double> fold_scales;            // per keyframe
    std::vector<const double*> fold_offsets;    // per keyframe, query_dim each (may be null)
    const EmbeddedContext* context = nullptr;
    int target = 0;  // option index
};

// Frozen frame encoder (applied upstream) + trainable per-frame adapter +
// frozen scoring head. Two implementations share the interface: a
// deterministic synthetic oracle wired to the planted corpus geometry, and a
// small trainable adapter in front of a fixed random head.
class Backbone {
public:
    explicit Backbone(const BackboneConfig& cfg);

    const BackboneConfig& config() const { return cfg_; }
    int context_dim() const { return cfg_.query_dim; }

    AdapterParams init_params(AdapterRole role) const;

    QueryFeature adapt(std::span<const double> frame_feature, const AdapterParams& params) const;

    EmbeddedContext embed_context(const LanguageContext& ctx) const;

    double score_yes(const QueryFeature& query, const LanguageContext& ctx, const AdapterParams& params) const;
    double score_yes(const QueryFeature& query, const EmbeddedContext& ctx, const AdapterParams& params) const;

    // one log-likelihood per option; queries arrive folded and in temporal order
    std::vector<double> score_options(const std::vector<QueryFeature>& queries, const LanguageContext& ctx,
                                      const AdapterParams& params) const;
    std::vector<double> score_options(const std::vector<QueryFeature>& queries, const EmbeddedContext& ctx,
                                      const AdapterParams& params) const;

    // one gradient-descent step at the given rate; returns (updated params,
    // mean cross-entropy over the batch). Trainable-toy only.
    std::pair<AdapterParams, double> train_step(const std::vector<LocTrainItem>& batch, const AdapterParams& params,
                                                double learning_rate) const;
    std::pair<AdapterParams, double> train_step(const std::vector<QaTrainItem>& batch, const AdapterParams& params,
                                                double learning_rate) const;

    // deterministic bag-of-tokens embedding into the context space
    std::vector<double> text_embedding(const std::string& text) const;

    // frozen head bytes, exposed so tests can assert nothing training-related
    // ever touches them
    const std::vector<double>& frozen_head() const { return frozen_; }

private:
    struct ToyView;
    ToyView toy_view(const AdapterParams& params) const;
    std::vector<double> toy_option_logits(const std::vector<QueryFeature>& queries, const EmbeddedContext& ctx,
                                          const AdapterParams& params) const;
    std::vector<double> oracle_option_logits(const std::vector<QueryFeature>& queries,
                                             const EmbeddedContext& ctx) const;

    BackboneConfig cfg_;
    const PlantedGeometry* geometry_ = nullptr;  // synthetic-oracle only
    // trainable-toy frozen head, one flat blob: w_yes | w_no | U | V
    std::vector<double> frozen_;
    size_t off_w_yes_ = 0, off_w_no_ = 0, off_u_ = 0, off_v_ = 0;
};

struct Model {
    std::shared_ptr<const Backbone> backbone;
    AdapterParams params;
};

// Checkpoint file: one line of JSON {version, role, shapes, config},
// then the parameter arrays as little-endian 32-bit floats in header order.
void save_model(const std::string& path, const Backbone& backbone, const AdapterParams& params);
void save_model(const std::string& path, const BackboneConfig& config, const AdapterParams& params);
Model load_model(const std::string& path);

}  // namespace locans
