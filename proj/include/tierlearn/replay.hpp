#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <vector>

#include "tierlearn/features.hpp"
#include "tierlearn/rng.hpp"

namespace tierlearn {

struct Experience {
    uint64_t state = 0;        // packed observation
    uint8_t action = 0;        // tier index
    uint16_t reward_half = 0;  // binary16 payload
    uint64_t next_state = 0;   // packed observation
    bool operator==(const Experience&) const = default;
};

// Serialized record: state | action:4 | reward:16 | next_state, bit fields
// little-endian from bit 0. Dual-tier observations pack to 40 bits, so a
// record is 100 bits and lands in 13 bytes; tri-hybrid is 116 bits in 15.
size_t experience_bytes(const ObservationLayout& layout);
std::vector<uint8_t> pack_experience(const Experience& e, const ObservationLayout& layout);
Experience unpack_experience(const uint8_t* bytes, size_t n, const ObservationLayout& layout);

// Ring buffer of experiences with FIFO overwrite. A record opens when its
// (state, action, reward) triple is appended and joins the sampling pool
// once sealed with its next_state. Because consecutive records usually share
// the observation stream, sealing detects when next_state equals the state
// of the record appended right after and stores nothing extra in that case;
// only out-of-order completions spend bytes in the overflow lane. Fullness
// counts opened records, so a record pending its next observation still
// moves the buffer toward its first training round. All public methods are
// safe to call concurrently (single producer, single consumer).
class ExperienceBuffer {
  public:
    ExperienceBuffer(size_t capacity, const ObservationLayout& layout);

    // Opens a record and returns its ticket (monotonic append index).
    uint64_t append(uint64_t state, uint8_t action, uint16_t reward_half);
    // Completes a record. Returns false if the ring already overwrote it.
    bool seal(uint64_t ticket, uint64_t next_state);
    // append + immediate seal, for callers that already know next_state.
    void push(const Experience& e);

    size_t capacity() const { return capacity_; }
    bool full() const;    // opened records reached capacity
    size_t fill() const;  // records currently stored, saturates at capacity
    uint64_t opened_total() const;
    size_t sealed_count() const;

    Experience sealed_at(size_t index) const;  // index 0 = oldest sealed record
    std::vector<Experience> sample(size_t count, Rng& rng) const;

    // Training draw: n_batches independent batches, uniform with replacement
    // over the sealed records. Errors until the buffer has filled once.
    std::vector<std::vector<Experience>> sample_batches(size_t n_batches, size_t batch_size,
                                                        Rng& rng) const;

    size_t storage_bytes() const;

  private:
    bool stored(uint64_t ticket) const;
    Experience record_at_slot(size_t slot) const;
    uint64_t state_at(const std::vector<uint8_t>& lane, size_t slot) const;
    void store_state(std::vector<uint8_t>& lane, size_t slot, uint64_t state);
    size_t sampled_slot(Rng& rng) const;

    ObservationLayout layout_;
    size_t capacity_;
    size_t state_bytes_;
    std::vector<uint8_t> states_;
    std::vector<uint8_t> overflow_;  // next_states that could not be shared
    std::vector<uint8_t> meta_;      // action 0..3, bit 4 = explicit, bit 5 = sealed
    std::vector<uint16_t> rewards_;
    uint64_t opened_ = 0;
    size_t sealed_stored_ = 0;
    mutable std::mutex mu_;
};

}  // namespace tierlearn
