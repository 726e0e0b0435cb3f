#pragma once

#include <bit>
#include <cstdint>

namespace tierlearn {

// IEEE 754 binary16 conversion. Weights and stored rewards live in half
// precision; training math runs on full-precision masters.

// Round-to-nearest-even float32 -> binary16.
inline uint16_t float_to_half(float f) {
    uint32_t x = std::bit_cast<uint32_t>(f);
    uint16_t sign = (uint16_t)((x >> 16) & 0x8000u);
    uint32_t exp = (x >> 23) & 0xffu;
    uint32_t mant = x & 0x7fffffu;

    if (exp == 0xffu) {  // inf or nan
        uint16_t m = (uint16_t)(mant ? 0x200u | (mant >> 13) : 0);
        return (uint16_t)(sign | 0x7c00u | m);
    }
    // Rebias to half's exponent range.
    int e = (int)exp - 127 + 15;
    if (e >= 0x1f) return (uint16_t)(sign | 0x7c00u);  // overflow -> inf
    if (e <= 0) {
        // Subnormal half (or zero). Shift the implicit-1 mantissa right.
        if (e < -10) return sign;
        mant |= 0x800000u;
        uint32_t shift = (uint32_t)(14 - e);
        uint32_t half_mant = mant >> shift;
        uint32_t rem = mant & ((1u << shift) - 1);
        uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half_mant & 1u)))
            ++half_mant;
        return (uint16_t)(sign | half_mant);
    }
    uint32_t half_mant = mant >> 13;
    uint32_t rem = mant & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (half_mant & 1u))) {
        ++half_mant;
        if (half_mant == 0x400u) {  // mantissa carry bumps the exponent
            half_mant = 0;
            ++e;
            if (e >= 0x1f) return (uint16_t)(sign | 0x7c00u);
        }
    }
    return (uint16_t)(sign | ((uint32_t)e << 10) | half_mant);
}

inline float half_to_float(uint16_t h) {
    uint32_t sign = (uint32_t)(h & 0x8000u) << 16;
    uint32_t exp = (h >> 10) & 0x1fu;
    uint32_t mant = h & 0x3ffu;

    uint32_t x;
    if (exp == 0) {
        if (mant == 0) {
            x = sign;
        } else {
            // Normalize the subnormal.
            int e = -1;
            do {
                ++e;
                mant <<= 1;
            } while (!(mant & 0x400u));
            mant &= 0x3ffu;
            x = sign | (uint32_t)(127 - 15 - e) << 23 | (mant << 13);
        }
    } else if (exp == 0x1f) {
        x = sign | 0x7f800000u | (mant << 13);
    } else {
        x = sign | (exp - 15 + 127) << 23 | (mant << 13);
    }
    return std::bit_cast<float>(x);
}

inline float half_round(float f) { return half_to_float(float_to_half(f)); }

}  // namespace tierlearn
