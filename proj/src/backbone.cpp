#include "locans/backbone.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <json.hpp>

#include "locans/kernels.hpp"
#include "locans/synthetic.hpp"

namespace locans {

using nlohmann::json;

namespace {

constexpr uint64_t kFrozenTag = 0x66726f7a656eull;  // "frozen"
constexpr uint64_t kTokenTag = 0x746f6b656eull;     // "token"
constexpr int kCheckpointVersion = 1;

constexpr double kScoreClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::min(1.0 - kScoreClamp, std::max(kScoreClamp, p)); }

void log_softmax_inplace(std::vector<double>& z) {
    double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    double lse = m + std::log(sum);
    for (double& v : z) v -= lse;
}

// stable binary cross-entropy on the yes-vs-no logit
double bce_with_logit(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

struct ToyGrads {
    std::vector<double> w1, b1, w2, b2;

    ToyGrads(size_t w1n, size_t b1n, size_t w2n, size_t b2n)
        : w1(w1n, 0.0), b1(b1n, 0.0), w2(w2n, 0.0), b2(b2n, 0.0) {}
};

}  // namespace

std::string to_string(AdapterRole role) { return role == AdapterRole::localizer ? "localizer" : "answerer"; }

AdapterRole adapter_role_from_string(const std::string& s) {
    if (s == "localizer") return AdapterRole::localizer;
    if (s == "answerer") return AdapterRole::answerer;
    throw ParseError("unknown adapter role '" + s + "'");
}

std::string to_string(BackboneKind kind) {
    return kind == BackboneKind::synthetic_oracle ? "synthetic-oracle" : "trainable-toy";
}

BackboneKind backbone_kind_from_string(const std::string& s) {
    if (s == "synthetic-oracle") return BackboneKind::synthetic_oracle;
    if (s == "trainable-toy") return BackboneKind::trainable_toy;
    throw ParseError("unknown backbone implementation '" + s + "'");
}

size_t AdapterParams::total_size() const {
    size_t n = 0;
    for (const auto& a : arrays) n += a.size();
    return n;
}

const ParamArray& AdapterParams::array(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw ArgumentError("no parameter array named '" + name + "'");
}

ParamArray& AdapterParams::array(const std::string& name) {
    for (auto& a : arrays)
        if (a.name == name) return a;
    throw ArgumentError("no parameter array named '" + name + "'");
}

bool AdapterParams::same_shapes(const AdapterParams& other) const {
    if (arrays.size() != other.arrays.size()) return false;
    for (size_t i = 0; i < arrays.size(); ++i)
        if (arrays[i].name != other.arrays[i].name || arrays[i].shape != other.arrays[i].shape) return false;
    return true;
}

void axpy_params(AdapterParams& dst, double a, const AdapterParams& src) {
    if (!dst.same_shapes(src)) throw ArgumentError("adapter params have mismatched shapes");
    for (size_t i = 0; i < dst.arrays.size(); ++i)
        kernels::axpy(a, src.arrays[i].values.data(), dst.arrays[i].values.data(), dst.arrays[i].size());
}

void quantize_f32(AdapterParams& params) {
    for (auto& a : params.arrays)
        for (double& v : a.values) v = static_cast<double>(static_cast<float>(v));
}

void BackboneConfig::validate() const {
    if (feature_dim <= 0 || query_dim <= 0 || hidden_dim <= 0)
        throw ConfigError("backbone dims must be positive");
    if (implementation == BackboneKind::synthetic_oracle) {
        if (query_dim != feature_dim)
            throw ConfigError("synthetic-oracle backbone requires query_dim == feature_dim");
        if (concept_vocab < 1 || concept_vocab + 1 > feature_dim)
            throw ConfigError("synthetic-oracle backbone requires 1 <= concept_vocab <= feature_dim - 1");
    }
}

struct Backbone::ToyView {
    const double* w1;
    const double* b1;
    const double* w2;
    const double* b2;
};

Backbone::ToyView Backbone::toy_view(const AdapterParams& params) const {
    const ParamArray& w1 = params.array("w1");
    const ParamArray& b1 = params.array("b1");
    const ParamArray& w2 = params.array("w2");
    const ParamArray& b2 = params.array("b2");
    size_t fd = cfg_.feature_dim, hd = cfg_.hidden_dim, qd = cfg_.query_dim;
    if (w1.size() != hd * fd || b1.size() != hd || w2.size() != qd * hd || b2.size() != qd)
        throw ValidationError("adapter params do not match the backbone dimensions");
    return {w1.values.data(), b1.values.data(), w2.values.data(), b2.values.data()};
}

Backbone::Backbone(const BackboneConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.implementation == BackboneKind::synthetic_oracle) {
        geometry_ = &PlantedGeometry::get(cfg_.feature_dim, cfg_.concept_vocab);
        return;
    }
    const size_t qd = cfg_.query_dim, cd = cfg_.query_dim;
    const size_t cat = qd + cd;
    off_w_yes_ = 0;
    off_w_no_ = cat;
    off_u_ = 2 * cat;
    off_v_ = 2 * cat + cd * qd;
    frozen_.resize(2 * cat + cd * qd + cd * cd);

    Rng rng(mix_seed(cfg_.seed, kFrozenTag));
    double head_scale = 1.0 / std::sqrt(static_cast<double>(cat));
    for (size_t i = 0; i < 2 * cat; ++i) frozen_[i] = rng.range(-head_scale, head_scale);
    double u_scale = 1.0 / std::sqrt(static_cast<double>(qd));
    for (size_t i = 0; i < cd * qd; ++i) frozen_[off_u_ + i] = rng.range(-u_scale, u_scale);
    double v_scale = 1.0 / std::sqrt(static_cast<double>(cd));
    for (size_t i = 0; i < cd * cd; ++i) frozen_[off_v_ + i] = rng.range(-v_scale, v_scale);
}

AdapterParams Backbone::init_params(AdapterRole role) const {
    AdapterParams p;
    p.role = role;
    if (cfg_.implementation == BackboneKind::synthetic_oracle) return p;

    const size_t fd = cfg_.feature_dim, hd = cfg_.hidden_dim, qd = cfg_.query_dim;
    Rng rng(mix_seed(cfg_.seed, mix_seed(0x696e6974ull, role == AdapterRole::localizer ? 1 : 2)));

    ParamArray w1{"w1", {hd, fd}, std::vector<double>(hd * fd)};
    double s1 = 1.0 / std::sqrt(static_cast<double>(fd));
    for (double& v : w1.values) v = rng.range(-s1, s1);

    ParamArray b1{"b1", {hd}, std::vector<double>(hd, 0.0)};

    ParamArray w2{"w2", {qd, hd}, std::vector<double>(qd * hd)};
    double s2 = 1.0 / std::sqrt(static_cast<double>(hd));
    for (double& v : w2.values) v = rng.range(-s2, s2);

    ParamArray b2{"b2", {qd}, std::vector<double>(qd, 0.0)};

    p.arrays = {std::move(w1), std::move(b1), std::move(w2), std::move(b2)};
    quantize_f32(p);
    return p;
}

QueryFeature Backbone::adapt(std::span<const double> frame_feature, const AdapterParams& params) const {
    if (static_cast<int>(frame_feature.size()) != cfg_.feature_dim)
        throw ArgumentError("frame feature has dimension " + std::to_string(frame_feature.size()) +
                            ", backbone expects " + std::to_string(cfg_.feature_dim));
    if (cfg_.implementation == BackboneKind::synthetic_oracle)
        return {std::vector<double>(frame_feature.begin(), frame_feature.end())};

    ToyView tv = toy_view(params);
    const size_t fd = cfg_.feature_dim, hd = cfg_.hidden_dim, qd = cfg_.query_dim;
    std::vector<double> a1(hd);
    kernels::matvec(tv.w1, frame_feature.data(), a1.data(), hd, fd);
    kernels::axpy(1.0, tv.b1, a1.data(), hd);
    for (double& v : a1) v = std::tanh(v);
    QueryFeature out;
    out.vector.resize(qd);
    kernels::matvec(tv.w2, a1.data(), out.vector.data(), qd, hd);
    kernels::axpy(1.0, tv.b2, out.vector.data(), qd);
    return out;
}

std::vector<double> Backbone::text_embedding(const std::string& text) const {
    const int cd = context_dim();
    std::vector<double> acc(cd, 0.0);
    for (const auto& token : tokenize_words(text)) {
        Rng rng(mix_seed(kTokenTag, fnv1a64(token)));
        for (int i = 0; i < cd; ++i) acc[i] += rng.range(-1.0, 1.0);
    }
    double norm = std::sqrt(kernels::dot(acc.data(), acc.data(), acc.size()));
    if (norm > 0.0)
        for (double& v : acc) v /= norm;
    return acc;
}

EmbeddedContext Backbone::embed_context(const LanguageContext& ctx) const {
    EmbeddedContext out;
    out.context = &ctx;
    if (cfg_.implementation == BackboneKind::synthetic_oracle) {
        for (const auto& opt : ctx.options) out.option_embeds.push_back(geometry_->direction_for_option(opt));
        return out;
    }
    out.rendered_embed = text_embedding(ctx.rendered);
    for (const auto& opt : ctx.options) out.option_embeds.push_back(text_embedding(opt));
    return out;
}

double Backbone::score_yes(const QueryFeature& query, const LanguageContext& ctx,
                           const AdapterParams& params) const {
    return score_yes(query, embed_context(ctx), params);
}

// the adapter already ran; the scoring head itself is frozen, so params only
// matter through the query feature
double Backbone::score_yes(const QueryFeature& query, const EmbeddedContext& ctx,
                           const AdapterParams& /*params*/) const {
    if (cfg_.implementation == BackboneKind::synthetic_oracle) {
        if (static_cast<int>(query.vector.size()) != cfg_.feature_dim)
            throw ArgumentError("query feature has the wrong dimension");
        double proj = kernels::dot(query.vector.data(), geometry_->relevance(), query.vector.size());
        return clamp_prob(sigmoid(PlantedGeometry::kYesSteepness * (proj - PlantedGeometry::kYesMidpoint)));
    }
    const size_t qd = cfg_.query_dim, cd = cfg_.query_dim;
    if (query.vector.size() != qd) throw ArgumentError("query feature has the wrong dimension");
    if (ctx.rendered_embed.size() != cd) throw ArgumentError("context embedding has the wrong dimension");
    const double* wy = frozen_.data() + off_w_yes_;
    const double* wn = frozen_.data() + off_w_no_;
    double zy = kernels::dot(wy, query.vector.data(), qd) + kernels::dot(wy + qd, ctx.rendered_embed.data(), cd);
    double zn = kernels::dot(wn, query.vector.data(), qd) + kernels::dot(wn + qd, ctx.rendered_embed.data(), cd);
    return clamp_prob(sigmoid(zy - zn));
}

std::vector<double> Backbone::oracle_option_logits(const std::vector<QueryFeature>& queries,
                                                   const EmbeddedContext& ctx) const {
    const size_t fd = cfg_.feature_dim;
    std::vector<double> pooled(fd, 0.0);
    for (const auto& q : queries) {
        if (q.vector.size() != fd) throw ArgumentError("query feature has the wrong dimension");
        kernels::axpy(1.0, q.vector.data(), pooled.data(), fd);
    }
    for (double& v : pooled) v /= static_cast<double>(queries.size());
    std::vector<double> z(ctx.option_embeds.size());
    for (size_t j = 0; j < z.size(); ++j)
        z[j] = PlantedGeometry::kOptionScale * kernels::dot(pooled.data(), ctx.option_embeds[j].data(), fd);
    return z;
}

std::vector<double> Backbone::toy_option_logits(const std::vector<QueryFeature>& queries,
                                                const EmbeddedContext& ctx, const AdapterParams&) const {
    const size_t qd = cfg_.query_dim, cd = cfg_.query_dim;
    std::vector<double> pooled(qd, 0.0);
    for (const auto& q : queries) {
        if (q.vector.size() != qd) throw ArgumentError("query feature has the wrong dimension");
        kernels::axpy(1.0, q.vector.data(), pooled.data(), qd);
    }
    for (double& v : pooled) v /= static_cast<double>(queries.size());

    std::vector<double> u(cd), tmp(cd);
    kernels::matvec(frozen_.data() + off_u_, pooled.data(), u.data(), cd, qd);
    kernels::matvec(frozen_.data() + off_v_, ctx.rendered_embed.data(), tmp.data(), cd, cd);
    kernels::axpy(1.0, tmp.data(), u.data(), cd);

    std::vector<double> z(ctx.option_embeds.size());
    for (size_t j = 0; j < z.size(); ++j) z[j] = kernels::dot(u.data(), ctx.option_embeds[j].data(), cd);
    return z;
}

std::vector<double> Backbone::score_options(const std::vector<QueryFeature>& queries, const LanguageContext& ctx,
                                            const AdapterParams& params) const {
    return score_options(queries, embed_context(ctx), params);
}

std::vector<double> Backbone::score_options(const std::vector<QueryFeature>& queries, const EmbeddedContext& ctx,
                                            const AdapterParams& params) const {
    if (queries.empty()) throw ArgumentError("score_options needs at least one query feature");
    if (ctx.option_embeds.empty()) throw ArgumentError("score_options needs a context with options");
    std::vector<double> z = cfg_.implementation == BackboneKind::synthetic_oracle
                                ? oracle_option_logits(queries, ctx)
                                : toy_option_logits(queries, ctx, params);
    log_softmax_inplace(z);
    return z;
}

std::pair<AdapterParams, double> Backbone::train_step(const std::vector<LocTrainItem>& batch,
                                                      const AdapterParams& params, double learning_rate) const {
    if (cfg_.implementation == BackboneKind::synthetic_oracle)
        throw UnsupportedError("train_step is not supported by the synthetic-oracle backbone");
    if (batch.empty()) throw ArgumentError("train_step needs a non-empty batch");
    if (params.role != AdapterRole::localizer)
        throw ArgumentError("localizer training batch applied to params with role " + to_string(params.role));

    ToyView tv = toy_view(params);
    const size_t fd = cfg_.feature_dim, hd = cfg_.hidden_dim, qd = cfg_.query_dim, cd = cfg_.query_dim;
    const double* wy = frozen_.data() + off_w_yes_;
    const double* wn = frozen_.data() + off_w_no_;

    ToyGrads g(hd * fd, hd, qd * hd, qd);
    std::vector<double> a1(hd), v(qd), dv(qd), da1(hd), dz1(hd);
    double loss_sum = 0.0, weight_sum = 0.0;

    for (const auto& item : batch) {
        if (!item.frame || !item.context) throw ArgumentError("train item missing frame or context");
        // forward
        kernels::matvec(tv.w1, item.frame, a1.data(), hd, fd);
        kernels::axpy(1.0, tv.b1, a1.data(), hd);
        for (double& x : a1) x = std::tanh(x);
        kernels::matvec(tv.w2, a1.data(), v.data(), qd, hd);
        kernels::axpy(1.0, tv.b2, v.data(), qd);
        const std::vector<double>& c = item.context->rendered_embed;
        if (c.size() != cd) throw ArgumentError("context embedding has the wrong dimension");
        double zy = kernels::dot(wy, v.data(), qd) + kernels::dot(wy + qd, c.data(), cd);
        double zn = kernels::dot(wn, v.data(), qd) + kernels::dot(wn + qd, c.data(), cd);
        double z = zy - zn;
        double y = static_cast<double>(item.label);
        loss_sum += item.weight * bce_with_logit(z, y);
        weight_sum += item.weight;
        // backward
        double dz = item.weight * (sigmoid(z) - y);
        for (size_t i = 0; i < qd; ++i) dv[i] = dz * (wy[i] - wn[i]);
        kernels::axpy(1.0, dv.data(), g.b2.data(), qd);
        kernels::ger(1.0, dv.data(), a1.data(), g.w2.data(), qd, hd);
        kernels::matvec_t(tv.w2, dv.data(), da1.data(), qd, hd);
        for (size_t i = 0; i < hd; ++i) dz1[i] = da1[i] * (1.0 - a1[i] * a1[i]);
        kernels::axpy(1.0, dz1.data(), g.b1.data(), hd);
        kernels::ger(1.0, dz1.data(), item.frame, g.w1.data(), hd, fd);
    }

    if (weight_sum <= 0.0) throw ArgumentError("train_step batch has zero total weight");
    double inv = 1.0 / weight_sum;
    AdapterParams updated = params;
    kernels::axpy(-learning_rate * inv, g.w1.data(), updated.array("w1").values.data(), g.w1.size());
    kernels::axpy(-learning_rate * inv, g.b1.data(), updated.array("b1").values.data(), g.b1.size());
    kernels::axpy(-learning_rate * inv, g.w2.data(), updated.array("w2").values.data(), g.w2.size());
    kernels::axpy(-learning_rate * inv, g.b2.data(), updated.array("b2").values.data(), g.b2.size());
    return {std::move(updated), loss_sum * inv};
}

std::pair<AdapterParams, double> Backbone::train_step(const std::vector<QaTrainItem>& batch,
                                                      const AdapterParams& params, double learning_rate) const {
    if (cfg_.implementation == BackboneKind::synthetic_oracle)
        throw UnsupportedError("train_step is not supported by the synthetic-oracle backbone");
    if (batch.empty()) throw ArgumentError("train_step needs a non-empty batch");
    if (params.role != AdapterRole::answerer)
        throw ArgumentError("answerer training batch applied to params with role " + to_string(params.role));

    ToyView tv = toy_view(params);
    const size_t fd = cfg_.feature_dim, hd = cfg_.hidden_dim, qd = cfg_.query_dim, cd = cfg_.query_dim;
    const double* U = frozen_.data() + off_u_;
    const double* V = frozen_.data() + off_v_;

    ToyGrads g(hd * fd, hd, qd * hd, qd);
    double loss_sum = 0.0;

    std::vector<std::vector<double>> a1_cache;
    std::vector<double> pooled(qd), u(cd), tmp(cd), du(cd), dpooled(qd), dv(qd), da1(hd), dz1(hd);

    for (const auto& item : batch) {
        const size_t K = item.frames.size();
        if (K == 0) throw ArgumentError("train item has no keyframes");
        if (item.fold_scales.size() != K || item.fold_offsets.size() != K)
            throw ArgumentError("train item fold components do not match keyframe count");
        const EmbeddedContext& ctx = *item.context;
        const size_t n_opt = ctx.option_embeds.size();
        if (n_opt == 0) throw ArgumentError("train item context has no options");
        if (item.target < 0 || item.target >= static_cast<int>(n_opt))
            throw ArgumentError("train item target option out of range");

        // forward
        a1_cache.assign(K, std::vector<double>(hd));
        std::fill(pooled.begin(), pooled.end(), 0.0);
        std::vector<double> v(qd);
        for (size_t i = 0; i < K; ++i) {
            kernels::matvec(tv.w1, item.frames[i], a1_cache[i].data(), hd, fd);
            kernels::axpy(1.0, tv.b1, a1_cache[i].data(), hd);
            for (double& x : a1_cache[i]) x = std::tanh(x);
            kernels::matvec(tv.w2, a1_cache[i].data(), v.data(), qd, hd);
            kernels::axpy(1.0, tv.b2, v.data(), qd);
            kernels::axpy(item.fold_scales[i], v.data(), pooled.data(), qd);
            if (item.fold_offsets[i]) kernels::axpy(1.0, item.fold_offsets[i], pooled.data(), qd);
        }
        for (double& x : pooled) x /= static_cast<double>(K);

        kernels::matvec(U, pooled.data(), u.data(), cd, qd);
        kernels::matvec(V, ctx.rendered_embed.data(), tmp.data(), cd, cd);
        kernels::axpy(1.0, tmp.data(), u.data(), cd);

        std::vector<double> z(n_opt);
        for (size_t j = 0; j < n_opt; ++j) z[j] = kernels::dot(u.data(), ctx.option_embeds[j].data(), cd);
        std::vector<double> loglik = z;
        log_softmax_inplace(loglik);
        loss_sum += -loglik[item.target];

        // backward
        std::fill(du.begin(), du.end(), 0.0);
        for (size_t j = 0; j < n_opt; ++j) {
            double dz = std::exp(loglik[j]) - (static_cast<int>(j) == item.target ? 1.0 : 0.0);
            kernels::axpy(dz, ctx.option_embeds[j].data(), du.data(), cd);
        }
        kernels::matvec_t(U, du.data(), dpooled.data(), cd, qd);
        for (size_t i = 0; i < K; ++i) {
            double s = item.fold_scales[i] / static_cast<double>(K);
            for (size_t q = 0; q < qd; ++q) dv[q] = s * dpooled[q];
            kernels::axpy(1.0, dv.data(), g.b2.data(), qd);
            kernels::ger(1.0, dv.data(), a1_cache[i].data(), g.w2.data(), qd, hd);
            kernels::matvec_t(tv.w2, dv.data(), da1.data(), qd, hd);
            for (size_t h = 0; h < hd; ++h) dz1[h] = da1[h] * (1.0 - a1_cache[i][h] * a1_cache[i][h]);
            kernels::axpy(1.0, dz1.data(), g.b1.data(), hd);
            kernels::ger(1.0, dz1.data(), item.frames[i], g.w1.data(), hd, fd);
        }
    }

    double inv = 1.0 / static_cast<double>(batch.size());
    AdapterParams updated = params;
    kernels::axpy(-learning_rate * inv, g.w1.data(), updated.array("w1").values.data(), g.w1.size());
    kernels::axpy(-learning_rate * inv, g.b1.data(), updated.array("b1").values.data(), g.b1.size());
    kernels::axpy(-learning_rate * inv, g.w2.data(), updated.array("w2").values.data(), g.w2.size());
    kernels::axpy(-learning_rate * inv, g.b2.data(), updated.array("b2").values.data(), g.b2.size());
    return {std::move(updated), loss_sum * inv};
}

json backbone_config_to_json(const BackboneConfig& cfg) {
    return json{{"feature_dim", cfg.feature_dim},   {"query_dim", cfg.query_dim},
                {"hidden_dim", cfg.hidden_dim},     {"implementation", to_string(cfg.implementation)},
                {"seed", cfg.seed},                 {"concept_vocab", cfg.concept_vocab}};
}

BackboneConfig backbone_config_from_json(const json& j) {
    BackboneConfig cfg;
    if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim").get<int>();
    if (j.contains("query_dim")) cfg.query_dim = j.at("query_dim").get<int>();
    if (j.contains("hidden_dim")) cfg.hidden_dim = j.at("hidden_dim").get<int>();
    if (j.contains("implementation"))
        cfg.implementation = backbone_kind_from_string(j.at("implementation").get<std::string>());
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("concept_vocab")) cfg.concept_vocab = j.at("concept_vocab").get<int>();
    return cfg;
}

namespace {

void append_f32_le(std::string& out, float v) {
    uint32_t bits = std::bit_cast<uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float read_f32_le(const char* p) {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(static_cast<uint8_t>(p[i])) << (8 * i);
    return std::bit_cast<float>(bits);
}

}  // namespace

void save_model(const std::string& path, const Backbone& backbone, const AdapterParams& params) {
    save_model(path, backbone.config(), params);
}

void save_model(const std::string& path, const BackboneConfig& config, const AdapterParams& params) {
    config.validate();
    json shapes = json::array();
    for (const auto& a : params.arrays) shapes.push_back({{"name", a.name}, {"shape", a.shape}});
    json header{{"version", kCheckpointVersion},
                {"role", to_string(params.role)},
                {"shapes", shapes},
                {"config", backbone_config_to_json(config)}};
    std::string blob = header.dump();
    blob.push_back('\n');
    for (const auto& a : params.arrays)
        for (double v : a.values) append_f32_le(blob, static_cast<float>(v));
    write_file(path, blob);
}

Model load_model(const std::string& path) {
    std::string blob = read_file(path);
    size_t nl = blob.find('\n');
    if (nl == std::string::npos) throw ParseError("checkpoint has no header line: " + path);
    json header;
    try {
        header = json::parse(blob.substr(0, nl));
    } catch (const json::exception& e) {
        throw ParseError("checkpoint header is not valid JSON (" + path + "): " + e.what());
    }
    if (header.at("version").get<int>() != kCheckpointVersion)
        throw ValidationError("unsupported checkpoint version in " + path);

    BackboneConfig cfg = backbone_config_from_json(header.at("config"));
    AdapterParams params;
    params.version = header.at("version").get<int>();
    params.role = adapter_role_from_string(header.at("role").get<std::string>());

    const char* data = blob.data() + nl + 1;
    size_t avail = (blob.size() - nl - 1) / 4;
    size_t cursor = 0;
    for (const auto& s : header.at("shapes")) {
        ParamArray a;
        a.name = s.at("name").get<std::string>();
        a.shape = s.at("shape").get<std::vector<size_t>>();
        size_t count = 1;
        for (size_t d : a.shape) count *= d;
        if (cursor + count > avail)
            throw ValidationError("checkpoint payload shorter than declared shapes: " + path);
        a.values.resize(count);
        for (size_t i = 0; i < count; ++i)
            a.values[i] = static_cast<double>(read_f32_le(data + (cursor + i) * 4));
        cursor += count;
        params.arrays.push_back(std::move(a));
    }
    if (cursor != avail) throw ValidationError("checkpoint payload longer than declared shapes: " + path);

    Model m;
    m.backbone = std::make_shared<Backbone>(cfg);
    m.params = std::move(params);
    if (cfg.implementation == BackboneKind::trainable_toy) {
        size_t expected = static_cast<size_t>(cfg.hidden_dim) * cfg.feature_dim + cfg.hidden_dim +
                          static_cast<size_t>(cfg.query_dim) * cfg.hidden_dim + cfg.query_dim;
        if (m.params.total_size() != expected)
            throw ValidationError("checkpoint parameter count does not match its config: " + path);
    }
    return m;
}

}  // namespace locans
