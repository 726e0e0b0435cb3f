#include "tierlearn/features.hpp"

#include <bit>

#include "tierlearn/error.hpp"

namespace tierlearn {

namespace {

uint8_t log2_bin(uint64_t value_plus_one, uint8_t max_bin) {
    // floor(log2(v)) for v >= 1 is bit_width(v) - 1
    uint8_t b = (uint8_t)(std::bit_width(value_plus_one) - 1);
    return b > max_bin ? max_bin : b;
}

constexpr int kFieldWidths[7] = {8, 4, 8, 8, 8, 4, 8};

}  // namespace

ObservationVector observe(const RawFeatures& raw, const ObservationLayout& layout) {
    require(layout.n_tiers >= 2 && layout.n_tiers <= 4, "observation layout: bad tier count");
    ObservationVector v;

    // size bins double from 2 up: {1},{2},{3,4},{5,8},...,{33,64},{65+}
    uint32_t s = raw.size_pages;
    v.size_bin = s <= 1 ? 0 : (uint8_t)std::min(7, (int)std::bit_width(s - 1));
    v.type_bin = (uint8_t)raw.op;
    v.intr_bin = raw.access_interval < 0
                     ? 63
                     : log2_bin((uint64_t)raw.access_interval + 1, 63);
    v.cnt_bin = log2_bin((uint64_t)raw.access_count + 1, 63);

    auto frac_bin = [](double frac) {
        if (frac < 0) frac = 0;
        int b = (int)(frac * 8.0);
        return (uint8_t)(b > 7 ? 7 : b);
    };
    v.cap_bin = frac_bin(raw.fast_remaining_fraction);
    v.curr_bin = raw.current_tier == kUnplaced ? (uint8_t)(layout.n_tiers - 1)
                                               : (uint8_t)raw.current_tier;
    if (layout.tri()) v.mid_cap_bin = frac_bin(raw.mid_remaining_fraction);
    return v;
}

uint64_t pack_observation(const ObservationVector& v, const ObservationLayout& layout) {
    uint8_t fields[7] = {v.size_bin, v.type_bin,  v.intr_bin, v.cnt_bin,
                         v.cap_bin,  v.curr_bin, v.mid_cap_bin};
    int n = layout.tri() ? 7 : 6;
    uint64_t packed = 0;
    int shift = 0;
    for (int i = 0; i < n; ++i) {
        packed |= (uint64_t)fields[i] << shift;
        shift += kFieldWidths[i];
    }
    return packed;
}

ObservationVector unpack_observation(uint64_t packed, const ObservationLayout& layout) {
    int n = layout.tri() ? 7 : 6;
    const uint8_t bin_counts[7] = {8, 2, 64, 64, 8, (uint8_t)layout.n_tiers, 8};

    uint8_t fields[7] = {0, 0, 0, 0, 0, 0, 0};
    int shift = 0;
    for (int i = 0; i < n; ++i) {
        fields[i] = (uint8_t)((packed >> shift) & ((1u << kFieldWidths[i]) - 1));
        require(fields[i] < bin_counts[i], "packed observation: field ", i,
                " value ", (int)fields[i], " out of range");
        shift += kFieldWidths[i];
    }
    require(shift == layout.packed_bits(), "observation layout: width mismatch");
    require((packed >> shift) == 0, "packed observation: stray bits above bit ", shift);

    ObservationVector v;
    v.size_bin = fields[0];
    v.type_bin = fields[1];
    v.intr_bin = fields[2];
    v.cnt_bin = fields[3];
    v.cap_bin = fields[4];
    v.curr_bin = fields[5];
    v.mid_cap_bin = fields[6];
    return v;
}

void normalize_observation(const ObservationVector& v, const ObservationLayout& layout,
                           float* out) {
    out[0] = v.size_bin / 7.0f;
    out[1] = (float)v.type_bin;
    out[2] = v.intr_bin / 63.0f;
    out[3] = v.cnt_bin / 63.0f;
    out[4] = v.cap_bin / 7.0f;
    out[5] = v.curr_bin / (float)(layout.n_tiers - 1);
    if (layout.tri()) out[6] = v.mid_cap_bin / 7.0f;
}

nlohmann::json bin_boundaries(const ObservationLayout& layout) {
    nlohmann::json size_edges = nlohmann::json::array();
    for (int b = 0; b < 8; ++b) {
        int lo = b == 0 ? 1 : (1 << (b - 1)) + 1;
        nlohmann::json edge = {{"bin", b}, {"min_pages", lo}};
        if (b < 7) edge["max_pages"] = 1 << b;
        size_edges.push_back(edge);
    }
    nlohmann::json j = {
        {"packed_bits", layout.packed_bits()},
        {"field_order", {"size", "type", "intr", "cnt", "cap", "curr"}},
        {"field_widths", {8, 4, 8, 8, 8, 4}},
        {"size", {{"bins", 8}, {"edges", size_edges}}},
        {"type", {{"bins", 2}, {"encoding", "0=read, 1=write"}}},
        {"intr", {{"bins", 64}, {"rule", "floor(log2(interval+1)), never-seen=63"}}},
        {"cnt", {{"bins", 64}, {"rule", "floor(log2(count+1))"}}},
        {"cap", {{"bins", 8}, {"rule", "floor(fast_remaining_fraction*8), clamped to 7"}}},
        {"curr", {{"bins", layout.n_tiers}, {"rule", "tier index, unplaced=slowest"}}},
    };
    if (layout.tri()) {
        j["field_order"].push_back("mid_cap");
        j["field_widths"].push_back(8);
        j["mid_cap"] = {{"bins", 8}, {"rule", "floor(mid_remaining_fraction*8), clamped to 7"}};
    }
    return j;
}

}  // namespace tierlearn
