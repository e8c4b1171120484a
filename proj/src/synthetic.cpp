#include "locans/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>

#include "locans/common.hpp"
#include "locans/kernels.hpp"

namespace locans {

namespace {

constexpr uint64_t kGeometryTag = 0x67656f6d65747279ull;  // "geometry"

void project_out(std::vector<double>& v, const double* u, int dim) {
    double c = kernels::scalar_backend().dot(v.data(), u, dim);
    for (int i = 0; i < dim; ++i) v[i] -= c * u[i];
}

void normalize(std::vector<double>& v) {
    double norm = std::sqrt(kernels::scalar_backend().dot(v.data(), v.data(), v.size()));
    if (norm <= 0.0) throw Error("degenerate direction while building planted geometry");
    for (double& x : v) x /= norm;
}

}  // namespace

PlantedGeometry::PlantedGeometry(int dim, int vocab) : dim_(dim), vocab_(vocab) {
    if (dim < 2) throw ConfigError("planted geometry needs feature_dim >= 2");
    if (vocab < 1 || vocab + 1 > dim)
        throw ConfigError("planted geometry needs 1 <= concept_vocab <= feature_dim - 1");

    Rng rng(mix_seed(kGeometryTag, mix_seed(static_cast<uint64_t>(dim), static_cast<uint64_t>(vocab))));

    relevance_.resize(dim);
    for (double& x : relevance_) x = rng.gauss();
    normalize(relevance_);

    concepts_.assign(static_cast<size_t>(vocab) * dim, 0.0);
    for (int c = 0; c < vocab; ++c) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.gauss();
        project_out(v, relevance_.data(), dim);
        for (int p = 0; p < c; ++p) project_out(v, concepts_.data() + static_cast<size_t>(p) * dim, dim);
        normalize(v);
        std::copy(v.begin(), v.end(), concepts_.begin() + static_cast<size_t>(c) * dim);
        name_to_id_[concept_name(c)] = c;
    }
}

const PlantedGeometry& PlantedGeometry::get(int dim, int vocab) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<PlantedGeometry>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(dim, vocab);
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, std::unique_ptr<PlantedGeometry>(new PlantedGeometry(dim, vocab))).first;
    }
    return *it->second;
}

std::string PlantedGeometry::concept_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "concept_%02d", id);
    return std::string(buf);
}

const double* PlantedGeometry::concept_dir(int id) const {
    if (id < 0 || id >= vocab_) throw ArgumentError("concept id out of range");
    return concepts_.data() + static_cast<size_t>(id) * dim_;
}

std::vector<double> PlantedGeometry::direction_for_option(const std::string& text) const {
    auto it = name_to_id_.find(text);
    if (it != name_to_id_.end()) {
        const double* d = concept_dir(it->second);
        return std::vector<double>(d, d + dim_);
    }
    Rng rng(mix_seed(kGeometryTag ^ 0x6f7074ull, fnv1a64(text)));
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.gauss();
    project_out(v, relevance_.data(), dim_);
    normalize(v);
    return v;
}

double PlantedGeometry::noise_amplitude(int dim) { return 0.8 / std::sqrt(static_cast<double>(dim)); }

}  // namespace locans
