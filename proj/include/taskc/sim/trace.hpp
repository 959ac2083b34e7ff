#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "taskc/support/source_location.hpp"

namespace taskc::sim {

/// Ordered event records; serialized one JSON object per line.
struct Trace {
    std::vector<nlohmann::ordered_json> events;

    void task(int id, const std::string& codelet, int worker, double start, double end);
    void transfer(int handle, int from, int to, std::uint64_t bytes, double start, double end);
    void error(const std::string& message, const SourceLocation& loc);
    void alloc(const std::string& var, std::uint64_t bytes, bool pinned, double time);
    void free(const std::string& var, double time);
    void registered(int handle, const std::string& var, std::uint64_t bytes, bool pinned, double time);
    void unregistered(int handle, const std::string& var, double time);

    std::string jsonl() const;
    double makespan() const;
};

std::string format_seconds(double s);

class TraceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TraceSummary {
    std::map<int, double> busy;                              // worker -> seconds
    std::map<std::pair<int, int>, std::uint64_t> link_bytes;  // (from, to) -> bytes
    double makespan = 0;
    std::size_t tasks = 0;
    std::size_t transfers = 0;
    std::size_t errors = 0;

    std::string format() const;
};

/// Parses JSON lines; blank lines are skipped. Throws TraceError.
std::vector<nlohmann::json> parse_trace(std::string_view text);
/// Validates field types and the non-overlap invariants, then summarizes.
TraceSummary summarize(const std::vector<nlohmann::json>& events);

}  // namespace taskc::sim
