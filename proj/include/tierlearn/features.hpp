#pragma once

#include <cstdint>

#include "tierlearn/hss.hpp"

#include "json.hpp"

namespace tierlearn {

// Two-tier observations hold six fields packed into 40 bits; three-tier mode
// appends the mid-tier capacity field for 48 bits.
struct ObservationLayout {
    int n_tiers = 2;
    bool tri() const { return n_tiers >= 3; }
    int feature_count() const { return tri() ? 7 : 6; }
    int packed_bits() const { return tri() ? 48 : 40; }
};

struct ObservationVector {
    uint8_t size_bin = 0;     // 8 bins: 1, 2, 3-4, 5-8, 9-16, 17-32, 33-64, 65+
    uint8_t type_bin = 0;     // 2 bins: read, write
    uint8_t intr_bin = 0;     // 64 bins: floor(log2(interval+1)), never-seen = 63
    uint8_t cnt_bin = 0;      // 64 bins: floor(log2(count+1))
    uint8_t cap_bin = 0;      // 8 bins: floor(fast remaining fraction * 8)
    uint8_t curr_bin = 0;     // tier index, unplaced maps to the slowest
    uint8_t mid_cap_bin = 0;  // 8 bins, three-tier mode only

    bool operator==(const ObservationVector&) const = default;
};

ObservationVector observe(const RawFeatures& raw, const ObservationLayout& layout);

// Field layout, little-endian from bit 0:
//   size:8  type:4  intr:8  cnt:8  cap:8  curr:4  [mid_cap:8]
// Field widths follow the encoded-bit budget, so some fields have headroom
// beyond their bin count; unpack_observation rejects out-of-range values.
uint64_t pack_observation(const ObservationVector& v, const ObservationLayout& layout);
ObservationVector unpack_observation(uint64_t packed, const ObservationLayout& layout);

// Divides each bin index by (bin count - 1), giving inputs in [0, 1] in the
// field order above. out must hold layout.feature_count() floats.
void normalize_observation(const ObservationVector& v, const ObservationLayout& layout,
                           float* out);

// Bin edges for audit dumps.
nlohmann::json bin_boundaries(const ObservationLayout& layout);

}  // namespace tierlearn
