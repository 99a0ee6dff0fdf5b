#include "dermflow/error.hpp"
#include "dermflow/segmentation.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <array>
#include <cstdint>

namespace dermflow::segmentation {

namespace {

using Wide = boost::multiprecision::int512_t;

}  // namespace

OtsuResult otsu_threshold(const GrayImage& gray) {
    std::array<std::int64_t, 256> histogram{};
    for (std::uint8_t v : gray.values()) {
        ++histogram[v];
    }
    int distinct = 0;
    for (std::int64_t c : histogram) {
        distinct += c > 0 ? 1 : 0;
    }
    if (distinct < 2) {
        throw DegenerateHistogram();
    }

    std::int64_t total_count = 0;
    std::int64_t total_sum = 0;
    for (int v = 0; v < 256; ++v) {
        total_count += histogram[static_cast<std::size_t>(v)];
        total_sum += histogram[static_cast<std::size_t>(v)] * v;
    }

    // sigma_B^2(t) is proportional to (N s0 - S n0)^2 / (n0 n1); the positive
    // factor 1/N^3 is common to all t and dropped.
    int best_t = -1;
    Wide best_num = 0;
    Wide best_den = 1;
    std::int64_t n0 = 0;
    std::int64_t s0 = 0;
    for (int t = 0; t < 255; ++t) {
        n0 += histogram[static_cast<std::size_t>(t)];
        s0 += histogram[static_cast<std::size_t>(t)] * t;
        const std::int64_t n1 = total_count - n0;
        if (n0 == 0 || n1 == 0) {
            continue;
        }
        const Wide d = Wide(total_count) * s0 - Wide(total_sum) * n0;
        const Wide num = d * d;
        const Wide den = Wide(n0) * n1;
        if (best_t < 0 || num * best_den > best_num * den) {
            best_t = t;
            best_num = num;
            best_den = den;
        }
    }

    OtsuResult result;
    result.threshold = best_t;
    result.mask = BinaryMask(gray.width(), gray.height());
    auto values = gray.values();
    auto bits = result.mask.bits();
    for (std::size_t i = 0; i < values.size(); ++i) {
        bits[i] = values[i] <= best_t ? 1 : 0;
    }
    return result;
}

}  // namespace dermflow::segmentation
