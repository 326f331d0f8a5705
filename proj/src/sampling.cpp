#include "ctvote/sampling.hpp"

#include <string>

#include "ctvote/error.hpp"
#include "ctvote/rng.hpp"

namespace ctvote::sampling {

namespace {

void require_length(std::size_t n, std::size_t target_len) {
    if (n == 0) throw Error(ErrorCode::ZeroLength, "cannot sample an empty volume");
    if (target_len == 0) throw Error(ErrorCode::ZeroTarget, "target length must be >= 1");
}

}  // namespace

std::vector<std::size_t> SubVolumePlan::entries() const {
    std::vector<std::size_t> out = indices;
    if (!indices.empty()) out.insert(out.end(), pad_count, indices.back());
    return out;
}

SubVolumePlan plan_from_start(std::size_t n, std::size_t start, std::size_t target_len) {
    require_length(n, target_len);
    const std::size_t k = n < target_len ? 1 : n / target_len;
    const std::size_t max_start = n < target_len ? 0 : k;
    if (start > max_start) {
        throw Error(ErrorCode::IndexOutOfRange, "start " + std::to_string(start) + " exceeds k = " +
                                                    std::to_string(max_start) + " for n = " + std::to_string(n));
    }
    SubVolumePlan plan;
    plan.start = start;
    plan.stride = k;
    plan.target_len = target_len;
    for (std::size_t i = start; i < n && plan.indices.size() < target_len; i += k) plan.indices.push_back(i);
    plan.pad_count = target_len - plan.indices.size();
    return plan;
}

SubVolumePlan train_sample(std::size_t n, std::uint64_t seed, std::size_t target_len) {
    require_length(n, target_len);
    if (n < target_len) return plan_from_start(n, 0, target_len);
    const std::size_t k = n / target_len;
    rng::Engine eng(seed);
    const auto start = static_cast<std::size_t>(rng::uniform_below(eng, k + 1));
    return plan_from_start(n, start, target_len);
}

std::vector<SubVolumePlan> inference_subvolumes(std::size_t n, std::size_t target_len) {
    require_length(n, target_len);
    if (n < target_len) return {plan_from_start(n, 0, target_len)};
    const std::size_t k = n / target_len;
    std::vector<SubVolumePlan> plans;
    plans.reserve(k + 1);
    for (std::size_t s = 0; s <= k; ++s) plans.push_back(plan_from_start(n, s, target_len));
    return plans;
}

std::array<FlipSpec, 8> all_flips() {
    std::array<FlipSpec, 8> flips{};
    for (unsigned bits = 0; bits < 8; ++bits) {
        flips[bits] = FlipSpec{(bits & 4U) != 0, (bits & 2U) != 0, (bits & 1U) != 0};
    }
    return flips;
}

std::vector<TtaPlan> tta_variants(const SubVolumePlan& plan) {
    std::vector<TtaPlan> out;
    out.reserve(8);
    for (const auto& f : all_flips()) out.push_back(TtaPlan{plan, f});
    return out;
}

}  // namespace ctvote::sampling
