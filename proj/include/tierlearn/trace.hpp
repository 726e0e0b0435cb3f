#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tierlearn {

constexpr uint32_t kPageBytes = 4096;

enum class Op : uint8_t { Read = 0, Write = 1 };

struct StorageRequest {
    int64_t timestamp_ns = 0;  // rebased so the first parsed request sits at t=0
    Op op = Op::Read;
    uint64_t page = 0;       // 4 KiB page index (byte offset / 4096)
    uint32_t size_pages = 1; // ceil(bytes / 4096), never 0
    uint16_t workload_id = 0;

    bool operator==(const StorageRequest&) const = default;
};

struct WorkloadStats {
    double write_fraction = 0;
    double read_fraction = 0;
    double avg_request_size_pages = 0;
    // Mean per-page access count; a multi-page request touches every covered page.
    double avg_access_count = 0;
    uint64_t unique_pages = 0;
    // Distinct (page, size, op) tuples. See the README note on uniqueness accounting.
    uint64_t unique_requests = 0;
};

// Parses the enterprise block-trace CSV dialect:
//   Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime
// Timestamps are 100 ns ticks and come out rebased to t=0 in ns. Offsets and
// sizes in bytes become page index and page count. Malformed lines and
// unknown Type values raise an Error naming the line number.
std::vector<StorageRequest> parse_msrc(std::istream& in);
std::vector<StorageRequest> parse_msrc_file(const std::string& path);

// Inverse of parse_msrc on the retained fields (timestamps must be multiples
// of 100 ns, which parsed traces always are). DiskNumber carries workload_id.
void write_msrc(std::ostream& out, const std::vector<StorageRequest>& reqs,
                const std::string& hostname = "host");
void write_msrc_file(const std::string& path, const std::vector<StorageRequest>& reqs,
                     const std::string& hostname = "host");

struct SyntheticSpec {
    uint64_t n_requests = 0;
    uint64_t hot_page_count = 0;
    uint64_t cold_page_count = 0;
    double hot_access_fraction = 0;  // probability that a request lands in the hot set
    double write_fraction = 0;
    std::string request_size_dist = "fixed:1";  // "fixed:N" or "poisson:MEAN"
    uint64_t seed = 1;
};

// Deterministic for a given spec (seed included). Hot pages occupy
// [0, hot_page_count), cold pages follow.
std::vector<StorageRequest> gen_synthetic(const SyntheticSpec& spec);

// Interleaves several traces into one: source i's pages are remapped into a
// contiguous namespace after source i-1's, its timestamps are shifted by
// start_offsets_ns[i], workload_id is set to i, and the result is sorted by
// timestamp (stable, so ties keep source order).
std::vector<StorageRequest> mix_traces(const std::vector<std::vector<StorageRequest>>& sources,
                                       const std::vector<int64_t>& start_offsets_ns);

// Errors on an empty trace.
WorkloadStats workload_stats(const std::vector<StorageRequest>& reqs);

}  // namespace tierlearn
