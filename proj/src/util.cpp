#include "fmc/error.hpp"
#include "fmc/log.hpp"
#include "fmc/rng.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_sinks.h>

namespace fmc {

std::string_view code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::Io: return "E_IO";
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::Schema: return "E_SCHEMA";
    case ErrorCode::Config: return "E_CONFIG";
    case ErrorCode::Dim: return "E_DIM";
    case ErrorCode::Empty: return "E_EMPTY";
    case ErrorCode::GroupDegenerate: return "E_GROUP_DEGENERATE";
    case ErrorCode::GroupMissing: return "E_GROUP_MISSING";
    case ErrorCode::ZeroVector: return "E_ZERO_VECTOR";
    case ErrorCode::Simplex: return "E_SIMPLEX";
    case ErrorCode::NonFinite: return "E_NONFINITE";
    case ErrorCode::Precondition: return "E_PRECONDITION";
    }
    return "E_UNKNOWN";
}

spdlog::logger& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto log = std::make_shared<spdlog::logger>(
            "fmc", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        log->set_pattern("[fmc %l] %v");
        auto level = spdlog::level::warn;
        if (const char* env = std::getenv("FMC_LOG"))
            level = spdlog::level::from_str(env);
        log->set_level(level);
        return log;
    }();
    return *instance;
}

Rng make_stream(std::uint64_t seed, std::string_view name) {
    // FNV-1a keeps stream derivation independent of std::hash.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

} // namespace fmc
