#include "taskc/sim/machine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace taskc::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::vector<double>> read_matrix(const nlohmann::json& j, const char* key, int n, double diag) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), diag));
    if (!j.contains(key)) {
        if (n > 1) throw ConfigError(std::string("machine: missing '") + key + "'");
        return out;
    }
    const auto& m = j.at(key);
    if (!m.is_array() || static_cast<int>(m.size()) != n)
        throw ConfigError(std::string("machine: '") + key + "' must be a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    for (int a = 0; a < n; ++a) {
        const auto& row = m[static_cast<std::size_t>(a)];
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw ConfigError(std::string("machine: '") + key + "' must be a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
        for (int b = 0; b < n; ++b) {
            const auto& v = row[static_cast<std::size_t>(b)];
            if (v.is_null())
                out[a][b] = kInf;
            else if (v.is_number())
                out[a][b] = v.get<double>();
            else
                throw ConfigError(std::string("machine: '") + key + "' entries must be numbers");
        }
    }
    return out;
}

}  // namespace

std::optional<sema::Target> arch_target(const std::string& arch) {
    if (arch == "cpu") return sema::Target::Cpu;
    if (arch == "opencl") return sema::Target::OpenCL;
    if (arch == "cuda") return sema::Target::Cuda;
    return std::nullopt;
}

std::vector<runtime::MemoryNode> Machine::memory_nodes() const {
    std::vector<runtime::MemoryNode> out;
    for (int i = 0; i < node_count(); ++i) out.push_back({i, i == 0 ? runtime::NodeKind::Host : runtime::NodeKind::Device, {}});
    return out;
}

void Machine::validate() const {
    int n = node_count();
    if (workers.empty()) throw ConfigError("machine: no workers");
    if (n < 1) throw ConfigError("machine: no memory nodes");
    if (static_cast<int>(latency.size()) != n) throw ConfigError("machine: bandwidth and latency sizes differ");
    std::vector<int> users(static_cast<std::size_t>(n), 0);
    for (std::size_t i = 0; i < workers.size(); ++i) {
        const Worker& w = workers[i];
        std::string who = "machine: worker " + std::to_string(i);
        if (w.id != static_cast<int>(i)) throw ConfigError(who + " has id " + std::to_string(w.id));
        if (!arch_target(w.arch)) throw ConfigError(who + " has unknown arch '" + w.arch + "'");
        if (!(w.speed > 0) || !std::isfinite(w.speed)) throw ConfigError(who + " needs a positive speed factor");
        if (w.node < 0 || w.node >= n) throw ConfigError(who + " uses unknown memory node " + std::to_string(w.node));
        if (w.arch == "cpu" && w.node != 0) throw ConfigError(who + ": cpu workers use memory node 0");
        if (w.arch != "cpu") {
            if (w.node == 0) throw ConfigError(who + ": device workers need their own memory node");
            if (++users[static_cast<std::size_t>(w.node)] > 1)
                throw ConfigError("machine: memory node " + std::to_string(w.node) + " is shared by several devices");
        }
    }
    for (int k = 1; k < n; ++k)
        if (users[static_cast<std::size_t>(k)] == 0) throw ConfigError("machine: memory node " + std::to_string(k) + " has no device");
    for (int a = 0; a < n; ++a) {
        if (static_cast<int>(bandwidth[a].size()) != n || static_cast<int>(latency[a].size()) != n)
            throw ConfigError("machine: link matrices must be square");
        if (latency[a][a] != 0) throw ConfigError("machine: latency diagonal must be zero");
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            if (!(bandwidth[a][b] > 0)) throw ConfigError("machine: bandwidth must be positive");
            if (!(latency[a][b] >= 0) || !std::isfinite(latency[a][b])) throw ConfigError("machine: latency must be non-negative");
            if (bandwidth[a][b] != bandwidth[b][a] || latency[a][b] != latency[b][a])
                throw ConfigError("machine: link matrices must be symmetric");
        }
    }
}

Machine Machine::single_cpu() { return uniform(1, 0, kInf, 0); }

Machine Machine::uniform(int ncpu, int ndev, double bw, double lat, double device_speed) {
    Machine m;
    for (int i = 0; i < ncpu; ++i) m.workers.push_back({i, "cpu", 0, 1.0});
    for (int i = 0; i < ndev; ++i) m.workers.push_back({ncpu + i, "opencl", i + 1, device_speed});
    std::size_t n = static_cast<std::size_t>(ndev + 1);
    m.bandwidth.assign(n, std::vector<double>(n, bw));
    m.latency.assign(n, std::vector<double>(n, lat));
    for (std::size_t i = 0; i < n; ++i) {
        m.bandwidth[i][i] = kInf;
        m.latency[i][i] = 0;
    }
    return m;
}

Machine Machine::from_json(const nlohmann::json& j) {
    Machine m;
    try {
        if (!j.is_object() || !j.contains("workers") || !j.at("workers").is_array())
            throw ConfigError("machine: expected an object with a 'workers' array");
        int nodes = 1;
        for (std::size_t i = 0; i < j.at("workers").size(); ++i) {
            const auto& w = j.at("workers")[i];
            Worker x;
            x.id = w.value("id", static_cast<int>(i));
            x.arch = w.value("arch", std::string("cpu"));
            x.node = w.value("memory_node", 0);
            x.speed = w.value("speed_factor", 1.0);
            nodes = std::max(nodes, x.node + 1);
            m.workers.push_back(x);
        }
        if (j.contains("bandwidth") && j.at("bandwidth").is_array())
            nodes = std::max(nodes, static_cast<int>(j.at("bandwidth").size()));
        m.bandwidth = read_matrix(j, "bandwidth", nodes, kInf);
        m.latency = read_matrix(j, "latency", nodes, 0);
        for (int a = 0; a < nodes; ++a) m.bandwidth[a][a] = kInf;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("machine: ") + e.what());
    }
    m.validate();
    return m;
}

nlohmann::ordered_json Machine::to_json() const {
    nlohmann::ordered_json j;
    j["workers"] = nlohmann::ordered_json::array();
    for (const Worker& w : workers)
        j["workers"].push_back({{"id", w.id}, {"arch", w.arch}, {"memory_node", w.node}, {"speed_factor", w.speed}});
    auto matrix = [](const std::vector<std::vector<double>>& m) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& row : m) {
            nlohmann::ordered_json r = nlohmann::ordered_json::array();
            for (double v : row) r.push_back(std::isinf(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v));
            out.push_back(r);
        }
        return out;
    };
    j["bandwidth"] = matrix(bandwidth);
    j["latency"] = matrix(latency);
    return j;
}

// ---------------------------------------------------------------------------

PerfModel PerfModel::defaults() {
    PerfModel p;
    p.fallback = PerfEntry{1e-6, 1e-9};
    return p;
}

PerfModel PerfModel::from_json(const nlohmann::json& j) {
    PerfModel p;
    if (!j.is_object()) throw ConfigError("perf: expected an object keyed by \"codelet/arch\"");
    for (const auto& [key, v] : j.items()) {
        auto slash = key.rfind('/');
        if (slash == std::string::npos || slash == 0 || !arch_target(key.substr(slash + 1)))
            throw ConfigError("perf: bad key '" + key + "' (expected \"codelet/arch\")");
        if (!v.is_object() || !v.contains("base_seconds") || !v.at("base_seconds").is_number())
            throw ConfigError("perf: '" + key + "' needs a numeric base_seconds");
        PerfEntry e;
        e.base_seconds = v.at("base_seconds").get<double>();
        if (v.contains("seconds_per_byte")) {
            if (!v.at("seconds_per_byte").is_number()) throw ConfigError("perf: '" + key + "' seconds_per_byte must be a number");
            e.seconds_per_byte = v.at("seconds_per_byte").get<double>();
        }
        if (!(e.base_seconds > 0) || !(e.seconds_per_byte >= 0) || !std::isfinite(e.base_seconds) ||
            !std::isfinite(e.seconds_per_byte))
            throw ConfigError("perf: '" + key + "' needs base_seconds > 0 and seconds_per_byte >= 0");
        p.entries[key] = e;
    }
    return p;
}

const PerfEntry* PerfModel::find(const std::string& codelet, const std::string& arch) const {
    auto it = entries.find(codelet + "/" + arch);
    if (it != entries.end()) return &it->second;
    return fallback ? &*fallback : nullptr;
}

double PerfModel::cost(const std::string& codelet, const Worker& w, std::uint64_t bytes) const {
    const PerfEntry* e = find(codelet, w.arch);
    if (!e) throw ConfigError("perf: no entry for '" + codelet + "/" + w.arch + "'");
    return (e->base_seconds + e->seconds_per_byte * static_cast<double>(bytes)) / w.speed;
}

// ---------------------------------------------------------------------------

double estimate_transfer(std::uint64_t bytes, int from, int to, const Machine& m) {
    if (from == to) return 0;
    return m.latency[from][to] + static_cast<double>(bytes) / m.bandwidth[from][to];
}

double estimate_transfer(const runtime::DataHandle& h, int from, int to, const Machine& m) {
    if (from == to || h.valid_on(to)) return 0;
    return estimate_transfer(h.bytes(), from, to, m);
}

double average_cost(const std::string& codelet, std::uint64_t bytes, const std::vector<const Worker*>& workers,
                    const PerfModel& perf) {
    if (workers.empty()) return 0;
    double sum = 0;
    for (const Worker* w : workers) sum += perf.cost(codelet, *w, bytes);
    return sum / static_cast<double>(workers.size());
}

double average_transfer(std::uint64_t bytes, const Machine& m) {
    int n = m.node_count();
    if (bytes == 0 || n < 2) return 0;
    double sum = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b) sum += estimate_transfer(bytes, a, b, m);
    return sum / static_cast<double>(n * (n - 1));
}

std::vector<double> upward_rank(const std::vector<DagTask>& dag, const std::vector<std::vector<const Worker*>>& capable,
                                const PerfModel& perf, const Machine& m) {
    std::vector<double> rank(dag.size(), 0);
    for (std::size_t i = dag.size(); i-- > 0;) {
        double tail = 0;
        for (const auto& [s, bytes] : dag[i].succs) {
            if (static_cast<std::size_t>(s) <= i) throw std::invalid_argument("upward_rank: successor precedes its task");
            tail = std::max(tail, average_transfer(bytes, m) + rank[static_cast<std::size_t>(s)]);
        }
        rank[i] = average_cost(dag[i].codelet, dag[i].bytes, capable[i], perf) + tail;
    }
    return rank;
}

}  // namespace taskc::sim
