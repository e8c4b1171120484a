#include "locans/kernels.hpp"

#include <cstdlib>

#include "locans/common.hpp"

namespace locans::kernels {

#if defined(LOCANS_HAVE_AVX2_BACKEND)
const Backend* avx2_backend_if_supported();
#else
static const Backend* avx2_backend_if_supported() { return nullptr; }
#endif

namespace {

const Backend* pick(const std::string& name) {
    if (name == "scalar") return &scalar_backend();
    if (name == "avx2") {
        const Backend* b = avx2_backend_if_supported();
        if (!b) throw ConfigError("kernel backend 'avx2' is not supported on this machine");
        return b;
    }
    if (name == "auto" || name.empty()) {
        if (const Backend* b = avx2_backend_if_supported()) return b;
        return &scalar_backend();
    }
    throw ConfigError("unknown kernel backend '" + name + "' (known: scalar, avx2, auto)");
}

const Backend*& active_slot() {
    static const Backend* current = [] {
        const char* env = std::getenv("LOCANS_KERNELS");
        return pick(env ? env : "auto");
    }();
    return current;
}

}  // namespace

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> out{&scalar_backend()};
    if (const Backend* b = avx2_backend_if_supported()) out.push_back(b);
    return out;
}

const Backend& active() { return *active_slot(); }

void select(const std::string& name) { active_slot() = pick(name); }

}  // namespace locans::kernels
