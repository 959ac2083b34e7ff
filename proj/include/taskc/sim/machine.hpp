#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "taskc/runtime/runtime.hpp"

namespace taskc::sim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Worker {
    int id = 0;
    std::string arch = "cpu";  // cpu, opencl, cuda
    int node = 0;
    double speed = 1.0;
};

/// Workers plus node-to-node link parameters. Diagonal entries of the link
/// matrices are ignored (intra-node copies are free).
struct Machine {
    std::vector<Worker> workers;
    std::vector<std::vector<double>> bandwidth;  // bytes per second
    std::vector<std::vector<double>> latency;    // seconds

    int node_count() const { return static_cast<int>(bandwidth.size()); }
    std::vector<runtime::MemoryNode> memory_nodes() const;
    /// Throws ConfigError describing the first problem found.
    void validate() const;

    static Machine single_cpu();
    /// `ncpu` cpu workers on the host plus `ndev` opencl devices, each on its own node.
    static Machine uniform(int ncpu, int ndev, double bandwidth, double latency, double device_speed = 1.0);
    static Machine from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;
};

std::optional<sema::Target> arch_target(const std::string& arch);

struct PerfEntry {
    double base_seconds = 0;
    double seconds_per_byte = 0;
};

/// Per "codelet/arch" affine cost models.
struct PerfModel {
    std::map<std::string, PerfEntry> entries;
    std::optional<PerfEntry> fallback;

    static PerfModel defaults();
    static PerfModel from_json(const nlohmann::json& j);

    const PerfEntry* find(const std::string& codelet, const std::string& arch) const;
    /// Seconds to run `codelet` on a worker; throws ConfigError if no entry applies.
    double cost(const std::string& codelet, const Worker& w, std::uint64_t bytes) const;
};

/// Latency plus size over bandwidth; zero within a node.
double estimate_transfer(std::uint64_t bytes, int from, int to, const Machine& m);
/// As above, but zero when `h` is already valid at `to`.
double estimate_transfer(const runtime::DataHandle& h, int from, int to, const Machine& m);

/// Task graph as seen by the rank computation.
struct DagTask {
    std::string codelet;
    std::uint64_t bytes = 0;                          // summed over buffer arguments
    std::vector<std::pair<int, std::uint64_t>> succs;  // successor, bytes it reads from this task
};

/// Mean execution cost over the workers able to run `codelet`.
double average_cost(const std::string& codelet, std::uint64_t bytes, const std::vector<const Worker*>& workers,
                    const PerfModel& perf);
/// Mean transfer time of `bytes` over all ordered pairs of distinct nodes.
double average_transfer(std::uint64_t bytes, const Machine& m);

/// rank(t) = avg cost(t) + max over successors s of (avg transfer(t, s) + rank(s)).
/// Successors must have larger indices than their predecessors.
std::vector<double> upward_rank(const std::vector<DagTask>& dag, const std::vector<std::vector<const Worker*>>& capable,
                                const PerfModel& perf, const Machine& m);

}  // namespace taskc::sim
