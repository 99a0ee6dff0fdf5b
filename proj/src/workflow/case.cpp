#include "dermflow/image_io.hpp"
#include "dermflow/workflow.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <random>

namespace dermflow::workflow {

namespace {

constexpr std::array<std::pair<StateKind, std::string_view>, 7> kNames = {{
    {StateKind::Created, "Created"},
    {StateKind::InitialAnalyzed, "InitialAnalyzed"},
    {StateKind::LesionMeasured, "LesionMeasured"},
    {StateKind::XaiComplete, "XaiComplete"},
    {StateKind::ConditionFollowedUp, "ConditionFollowedUp"},
    {StateKind::Ended, "Ended"},
    {StateKind::Failed, "Failed"},
}};

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::string random_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
        std::uint64_t v = rng();
        for (int k = 0; k < 16; ++k) {
            id += kHex[v & 15];
            v >>= 4;
        }
    }
    return id;
}

}  // namespace

std::string_view to_string(StateKind state) noexcept {
    for (const auto& [k, name] : kNames) {
        if (k == state) {
            return name;
        }
    }
    return "Failed";
}

StateKind state_from_string(std::string_view name) {
    for (const auto& [k, n] : kNames) {
        if (n == name) {
            return k;
        }
    }
    throw InvalidArgument("unknown workflow state '" + std::string(name) + "'");
}

bool is_terminal(StateKind s) noexcept {
    return s == StateKind::XaiComplete || s == StateKind::ConditionFollowedUp || s == StateKind::Ended || s == StateKind::Failed;
}

bool transition_allowed(StateKind from, StateKind to) noexcept {
    if (to == StateKind::Failed) {
        return !is_terminal(from);
    }
    switch (from) {
        case StateKind::Created:
            return to == StateKind::InitialAnalyzed;
        case StateKind::InitialAnalyzed:
            return to == StateKind::LesionMeasured || to == StateKind::ConditionFollowedUp || to == StateKind::Ended;
        case StateKind::LesionMeasured:
            return to == StateKind::XaiComplete;
        default:
            return false;
    }
}

Case::Case(std::string id, std::string created_at, std::vector<std::uint8_t> bytes, imaging::RasterImage image)
    : id_(std::move(id)), created_at_(std::move(created_at)), bytes_(std::move(bytes)), image_(std::move(image)) {}

Case Case::from_image(const imaging::RasterImage& image) {
    return Case(random_id(), now_utc(), imaging::encode_png(image), image);
}

Case Case::from_bytes(std::vector<std::uint8_t> bytes) {
    imaging::RasterImage image = imaging::decode_image(bytes);
    return Case(random_id(), now_utc(), std::move(bytes), std::move(image));
}

Case Case::restore(std::string id, std::string created_at, std::vector<std::uint8_t> bytes, std::vector<Transition> audit,
                   std::string failure_reason, Artifacts artifacts) {
    imaging::RasterImage image = imaging::decode_image(bytes);
    Case c(std::move(id), std::move(created_at), std::move(bytes), std::move(image));
    for (const Transition& t : audit) {
        if (t.from != c.state_ || !transition_allowed(t.from, t.to)) {
            throw InvalidArgument("stored audit trail has an illegal transition " + std::string(to_string(t.from)) + " -> " +
                                  std::string(to_string(t.to)));
        }
        c.state_ = t.to;
    }
    c.audit_ = std::move(audit);
    c.failure_reason_ = std::move(failure_reason);
    c.artifacts_ = std::move(artifacts);
    return c;
}

void Case::advance(StateKind to, std::string note) {
    if (!transition_allowed(state_, to)) {
        throw IllegalTransition("illegal transition " + std::string(to_string(state_)) + " -> " + std::string(to_string(to)));
    }
    audit_.push_back({state_, to, std::move(note), now_utc()});
    state_ = to;
}

void Case::fail(std::string reason) {
    advance(StateKind::Failed, reason);
    failure_reason_ = std::move(reason);
}

}  // namespace dermflow::workflow
