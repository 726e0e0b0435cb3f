#include "tierlearn/replay.hpp"

#include <algorithm>

#include "tierlearn/error.hpp"

namespace tierlearn {

namespace {

constexpr uint8_t kExplicitBit = 0x10;
constexpr uint8_t kSealedBit = 0x20;

void put_bits(std::vector<uint8_t>& out, int& pos, uint64_t value, int width) {
    for (int i = 0; i < width; ++i, ++pos) {
        if ((value >> i) & 1) out[(size_t)(pos >> 3)] |= (uint8_t)(1u << (pos & 7));
    }
}

uint64_t get_bits(const uint8_t* bytes, int& pos, int width) {
    uint64_t value = 0;
    for (int i = 0; i < width; ++i, ++pos) {
        if ((bytes[pos >> 3] >> (pos & 7)) & 1) value |= 1ull << i;
    }
    return value;
}

}  // namespace

size_t experience_bytes(const ObservationLayout& layout) {
    return (size_t)(2 * layout.packed_bits() + 4 + 16 + 7) / 8;
}

std::vector<uint8_t> pack_experience(const Experience& e, const ObservationLayout& layout) {
    require(e.action < layout.n_tiers, "experience pack: action ", (int)e.action,
            " out of range for ", layout.n_tiers, " tiers");
    int sb = layout.packed_bits();
    std::vector<uint8_t> out(experience_bytes(layout), 0);
    int pos = 0;
    put_bits(out, pos, e.state, sb);
    put_bits(out, pos, e.action, 4);
    put_bits(out, pos, e.reward_half, 16);
    put_bits(out, pos, e.next_state, sb);
    return out;
}

Experience unpack_experience(const uint8_t* bytes, size_t n, const ObservationLayout& layout) {
    require(n == experience_bytes(layout), "experience unpack: expected ",
            experience_bytes(layout), " bytes, got ", n);
    int sb = layout.packed_bits();
    int pos = 0;
    Experience e;
    e.state = get_bits(bytes, pos, sb);
    e.action = (uint8_t)get_bits(bytes, pos, 4);
    e.reward_half = (uint16_t)get_bits(bytes, pos, 16);
    e.next_state = get_bits(bytes, pos, sb);
    require(e.action < layout.n_tiers, "experience unpack: action ", (int)e.action,
            " out of range");
    int trailing = (int)(n * 8) - pos;
    require(get_bits(bytes, pos, trailing) == 0, "experience unpack: stray bits after record");
    unpack_observation(e.state, layout);
    unpack_observation(e.next_state, layout);
    return e;
}

ExperienceBuffer::ExperienceBuffer(size_t capacity, const ObservationLayout& layout)
    : layout_(layout),
      capacity_(capacity),
      state_bytes_((size_t)(layout.packed_bits() + 7) / 8) {
    require(capacity >= 1, "experience buffer: capacity must be positive");
    states_.resize(capacity * state_bytes_, 0);
    overflow_.resize(capacity * state_bytes_, 0);
    meta_.resize(capacity, 0);
    rewards_.resize(capacity, 0);
}

bool ExperienceBuffer::stored(uint64_t ticket) const {
    return ticket < opened_ && opened_ - ticket <= capacity_;
}

uint64_t ExperienceBuffer::append(uint64_t state, uint8_t action, uint16_t reward_half) {
    std::lock_guard lock(mu_);
    require(action < layout_.n_tiers, "experience append: action ", (int)action,
            " out of range");
    uint64_t ticket = opened_;
    size_t slot = (size_t)(ticket % capacity_);
    if (ticket >= capacity_ && (meta_[slot] & kSealedBit)) --sealed_stored_;
    if (ticket >= 1 && capacity_ >= 2) {
        // A predecessor sealed with this very state can share the field: its
        // chained successor in ring order is the record written here.
        size_t prev = (slot + capacity_ - 1) % capacity_;
        if ((meta_[prev] & kExplicitBit) && state_at(overflow_, prev) == state)
            meta_[prev] &= (uint8_t)~kExplicitBit;
    }
    store_state(states_, slot, state);
    meta_[slot] = action;
    rewards_[slot] = reward_half;
    ++opened_;
    return ticket;
}

bool ExperienceBuffer::seal(uint64_t ticket, uint64_t next_state) {
    std::lock_guard lock(mu_);
    require(ticket < opened_, "experience seal: ticket ", ticket, " was never issued");
    if (!stored(ticket)) return false;
    size_t slot = (size_t)(ticket % capacity_);
    require(!(meta_[slot] & kSealedBit), "experience seal: record ", ticket,
            " sealed twice");
    uint64_t successor = ticket + 1;
    if (successor < opened_ && state_at(states_, (size_t)(successor % capacity_)) == next_state) {
        meta_[slot] |= kSealedBit;  // chained: read next_state from the successor
    } else {
        store_state(overflow_, slot, next_state);
        meta_[slot] |= (uint8_t)(kSealedBit | kExplicitBit);
    }
    ++sealed_stored_;
    return true;
}

void ExperienceBuffer::push(const Experience& e) {
    uint64_t ticket = append(e.state, e.action, e.reward_half);
    seal(ticket, e.next_state);
}

bool ExperienceBuffer::full() const {
    std::lock_guard lock(mu_);
    return opened_ >= capacity_;
}

size_t ExperienceBuffer::fill() const {
    std::lock_guard lock(mu_);
    return (size_t)std::min<uint64_t>(opened_, capacity_);
}

uint64_t ExperienceBuffer::opened_total() const {
    std::lock_guard lock(mu_);
    return opened_;
}

size_t ExperienceBuffer::sealed_count() const {
    std::lock_guard lock(mu_);
    return sealed_stored_;
}

Experience ExperienceBuffer::sealed_at(size_t index) const {
    std::lock_guard lock(mu_);
    require(index < sealed_stored_, "experience buffer: sealed index ", index, " out of range");
    uint64_t stored_n = std::min<uint64_t>(opened_, capacity_);
    size_t seen = 0;
    for (uint64_t t = opened_ - stored_n; t < opened_; ++t) {
        size_t slot = (size_t)(t % capacity_);
        if (!(meta_[slot] & kSealedBit)) continue;
        if (seen++ == index) return record_at_slot(slot);
    }
    fail("experience buffer: sealed index ", index, " unreachable");
}

size_t ExperienceBuffer::sampled_slot(Rng& rng) const {
    uint64_t stored_n = std::min<uint64_t>(opened_, capacity_);
    uint64_t oldest = opened_ - stored_n;
    // Rejection keeps the draw exactly uniform over sealed records; open
    // records are rare (at most one per request stream).
    while (true) {
        size_t slot = (size_t)((oldest + rng.below(stored_n)) % capacity_);
        if (meta_[slot] & kSealedBit) return slot;
    }
}

std::vector<Experience> ExperienceBuffer::sample(size_t count, Rng& rng) const {
    std::lock_guard lock(mu_);
    require(sealed_stored_ > 0, "experience buffer: cannot sample, no sealed records");
    std::vector<Experience> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) out.push_back(record_at_slot(sampled_slot(rng)));
    return out;
}

std::vector<std::vector<Experience>> ExperienceBuffer::sample_batches(size_t n_batches,
                                                                      size_t batch_size,
                                                                      Rng& rng) const {
    {
        std::lock_guard lock(mu_);
        require(opened_ >= capacity_, "replay buffer not full: ", opened_, " of ", capacity_,
                " records");
    }
    std::vector<std::vector<Experience>> batches;
    batches.reserve(n_batches);
    for (size_t b = 0; b < n_batches; ++b) batches.push_back(sample(batch_size, rng));
    return batches;
}

size_t ExperienceBuffer::storage_bytes() const {
    return states_.size() + overflow_.size() + meta_.size() +
           rewards_.size() * sizeof(uint16_t) + sizeof(ExperienceBuffer);
}

Experience ExperienceBuffer::record_at_slot(size_t slot) const {
    Experience e;
    e.state = state_at(states_, slot);
    e.action = meta_[slot] & 0x0f;
    e.reward_half = rewards_[slot];
    e.next_state = (meta_[slot] & kExplicitBit)
                       ? state_at(overflow_, slot)
                       : state_at(states_, (slot + 1) % capacity_);
    return e;
}

uint64_t ExperienceBuffer::state_at(const std::vector<uint8_t>& lane, size_t slot) const {
    uint64_t v = 0;
    for (size_t k = 0; k < state_bytes_; ++k) {
        v |= (uint64_t)lane[slot * state_bytes_ + k] << (8 * k);
    }
    return v;
}

void ExperienceBuffer::store_state(std::vector<uint8_t>& lane, size_t slot, uint64_t state) {
    for (size_t k = 0; k < state_bytes_; ++k) {
        lane[slot * state_bytes_ + k] = (uint8_t)(state >> (8 * k));
    }
}

}  // namespace tierlearn
