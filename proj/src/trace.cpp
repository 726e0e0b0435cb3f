#include "tierlearn/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <string_view>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "tierlearn/error.hpp"
#include "tierlearn/rng.hpp"

namespace tierlearn {

namespace {

int64_t parse_int(std::string_view field, size_t line_no, const char* what) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        fail("trace parse error at line ", line_no, ": bad ", what, " '", field, "'");
    return v;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::tolower((unsigned char)a[i]) != std::tolower((unsigned char)b[i])) return false;
    return true;
}

}  // namespace

std::vector<StorageRequest> parse_msrc(std::istream& in) {
    std::vector<StorageRequest> out;
    std::string line;
    size_t line_no = 0;
    int64_t base_ticks = 0;
    bool have_base = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::string_view rest = line;
        std::string_view fields[7];
        for (int f = 0; f < 7; ++f) {
            size_t comma = rest.find(',');
            if (comma == std::string_view::npos) {
                if (f != 6)
                    fail("trace parse error at line ", line_no, ": expected 7 fields, got ", f + 1);
                fields[f] = rest;
                rest = {};
            } else {
                fields[f] = rest.substr(0, comma);
                rest = rest.substr(comma + 1);
                if (f == 6)
                    fail("trace parse error at line ", line_no, ": expected 7 fields, got more");
            }
        }

        StorageRequest req;
        int64_t ticks = parse_int(fields[0], line_no, "timestamp");
        if (!have_base) {
            base_ticks = ticks;
            have_base = true;
        }
        req.timestamp_ns = (ticks - base_ticks) * 100;

        if (iequals(fields[3], "Read"))
            req.op = Op::Read;
        else if (iequals(fields[3], "Write"))
            req.op = Op::Write;
        else
            fail("trace parse error at line ", line_no, ": unknown request type '", fields[3], "'");

        int64_t offset = parse_int(fields[4], line_no, "offset");
        int64_t size = parse_int(fields[5], line_no, "size");
        if (offset < 0) fail("trace parse error at line ", line_no, ": negative offset");
        if (size < 0) fail("trace parse error at line ", line_no, ": negative size");
        req.page = (uint64_t)offset / kPageBytes;
        req.size_pages = (uint32_t)std::max<int64_t>(1, (size + kPageBytes - 1) / kPageBytes);
        req.workload_id = (uint16_t)parse_int(fields[2], line_no, "disk number");
        out.push_back(req);
    }
    return out;
}

std::vector<StorageRequest> parse_msrc_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open trace file '", path, "'");
    return parse_msrc(in);
}

void write_msrc(std::ostream& out, const std::vector<StorageRequest>& reqs,
                const std::string& hostname) {
    for (const auto& r : reqs) {
        out << r.timestamp_ns / 100 << ',' << hostname << ',' << r.workload_id << ','
            << (r.op == Op::Read ? "Read" : "Write") << ',' << r.page * (uint64_t)kPageBytes << ','
            << (uint64_t)r.size_pages * kPageBytes << ",0\n";
    }
}

void write_msrc_file(const std::string& path, const std::vector<StorageRequest>& reqs,
                     const std::string& hostname) {
    std::ofstream out(path);
    if (!out) fail("cannot open '", path, "' for writing");
    write_msrc(out, reqs, hostname);
}

std::vector<StorageRequest> gen_synthetic(const SyntheticSpec& spec) {
    require(spec.n_requests >= 1, "synthetic spec: n_requests must be >= 1");
    require(spec.hot_page_count + spec.cold_page_count >= 1, "synthetic spec: zero pages");
    require(spec.hot_access_fraction >= 0 && spec.hot_access_fraction <= 1,
            "synthetic spec: hot_access_fraction out of [0,1]");
    require(spec.write_fraction >= 0 && spec.write_fraction <= 1,
            "synthetic spec: write_fraction out of [0,1]");

    bool fixed_size = false;
    double size_param = 1;
    {
        const std::string& d = spec.request_size_dist;
        size_t colon = d.find(':');
        std::string kind = colon == std::string::npos ? d : d.substr(0, colon);
        std::string param = colon == std::string::npos ? "" : d.substr(colon + 1);
        if (kind == "fixed")
            fixed_size = true;
        else if (kind != "poisson")
            fail("synthetic spec: unknown request_size_dist '", d, "'");
        if (!param.empty()) {
            try {
                size_param = std::stod(param);
            } catch (...) {
                fail("synthetic spec: bad request_size_dist parameter '", param, "'");
            }
        }
        require(size_param >= 1, "synthetic spec: request size mean must be >= 1");
    }

    Rng pages = Rng::stream(spec.seed, 1);
    Rng ops = Rng::stream(spec.seed, 2);
    Rng sizes = Rng::stream(spec.seed, 3);

    std::vector<StorageRequest> out;
    out.reserve(spec.n_requests);
    for (uint64_t i = 0; i < spec.n_requests; ++i) {
        StorageRequest r;
        r.timestamp_ns = (int64_t)i * 100000;  // 100 us apart, multiple of 100 ns
        bool hot = pages.bernoulli(spec.hot_access_fraction);
        if (spec.hot_page_count == 0) hot = false;
        if (spec.cold_page_count == 0) hot = true;
        r.page = hot ? pages.below(spec.hot_page_count)
                     : spec.hot_page_count + pages.below(spec.cold_page_count);
        r.op = ops.bernoulli(spec.write_fraction) ? Op::Write : Op::Read;
        r.size_pages = fixed_size ? (uint32_t)size_param
                                  : 1 + sizes.poisson(size_param - 1.0);
        out.push_back(r);
    }
    return out;
}

std::vector<StorageRequest> mix_traces(const std::vector<std::vector<StorageRequest>>& sources,
                                       const std::vector<int64_t>& start_offsets_ns) {
    require(sources.size() == start_offsets_ns.size(),
            "mix_traces: ", sources.size(), " sources but ", start_offsets_ns.size(), " offsets");
    require(sources.size() <= 65536, "mix_traces: too many sources");

    size_t total = 0;
    for (const auto& s : sources) total += s.size();
    std::vector<StorageRequest> out;
    out.reserve(total);

    uint64_t page_base = 0;
    for (size_t i = 0; i < sources.size(); ++i) {
        uint64_t extent = 0;
        for (const auto& r : sources[i]) extent = std::max(extent, r.page + r.size_pages);
        for (StorageRequest r : sources[i]) {
            r.page += page_base;
            r.timestamp_ns += start_offsets_ns[i];
            r.workload_id = (uint16_t)i;
            out.push_back(r);
        }
        page_base += extent;
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const StorageRequest& a, const StorageRequest& b) {
                         return a.timestamp_ns < b.timestamp_ns;
                     });
    return out;
}

WorkloadStats workload_stats(const std::vector<StorageRequest>& reqs) {
    require(!reqs.empty(), "workload_stats: empty trace");

    WorkloadStats st;
    uint64_t writes = 0, size_sum = 0, touches = 0;
    std::unordered_map<uint64_t, uint32_t> per_page;
    std::unordered_set<uint64_t> tuples;
    per_page.reserve(reqs.size());
    for (const auto& r : reqs) {
        writes += r.op == Op::Write;
        size_sum += r.size_pages;
        touches += r.size_pages;
        for (uint64_t p = r.page; p < r.page + r.size_pages; ++p) ++per_page[p];
        // (page, size, op) key; pages here stay far below 2^42
        tuples.insert((r.page << 21) | ((uint64_t)(r.size_pages & 0xfffff) << 1) |
                      (uint64_t)r.op);
    }
    st.write_fraction = (double)writes / reqs.size();
    st.read_fraction = 1.0 - st.write_fraction;
    st.avg_request_size_pages = (double)size_sum / reqs.size();
    st.unique_pages = per_page.size();
    st.avg_access_count = (double)touches / per_page.size();
    st.unique_requests = tuples.size();
    return st;
}

}  // namespace tierlearn
