#include "taskc/sim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace taskc::sim {

using nlohmann::ordered_json;

void Trace::task(int id, const std::string& codelet, int worker, double start, double end) {
    ordered_json e;
    e["kind"] = "task";
    e["task"] = id;
    e["codelet"] = codelet;
    e["worker"] = worker;
    e["start"] = start;
    e["end"] = end;
    events.push_back(std::move(e));
}

void Trace::transfer(int handle, int from, int to, std::uint64_t bytes, double start, double end) {
    ordered_json e;
    e["kind"] = "transfer";
    e["handle"] = handle;
    e["from"] = from;
    e["to"] = to;
    e["bytes"] = bytes;
    e["start"] = start;
    e["end"] = end;
    events.push_back(std::move(e));
}

void Trace::error(const std::string& message, const SourceLocation& loc) {
    ordered_json e;
    e["kind"] = "error";
    e["message"] = message;
    e["location"] = loc.file.empty() ? std::string() : loc.str();
    events.push_back(std::move(e));
}

void Trace::alloc(const std::string& var, std::uint64_t bytes, bool pinned, double time) {
    ordered_json e;
    e["kind"] = "alloc";
    e["var"] = var;
    e["bytes"] = bytes;
    e["pinned"] = pinned;
    e["time"] = time;
    events.push_back(std::move(e));
}

void Trace::free(const std::string& var, double time) {
    ordered_json e;
    e["kind"] = "free";
    e["var"] = var;
    e["time"] = time;
    events.push_back(std::move(e));
}

void Trace::registered(int handle, const std::string& var, std::uint64_t bytes, bool pinned, double time) {
    ordered_json e;
    e["kind"] = "register";
    e["handle"] = handle;
    e["var"] = var;
    e["bytes"] = bytes;
    e["pinned"] = pinned;
    e["time"] = time;
    events.push_back(std::move(e));
}

void Trace::unregistered(int handle, const std::string& var, double time) {
    ordered_json e;
    e["kind"] = "unregister";
    e["handle"] = handle;
    e["var"] = var;
    e["time"] = time;
    events.push_back(std::move(e));
}

std::string Trace::jsonl() const {
    std::string out;
    for (const auto& e : events) {
        out += e.dump();
        out += '\n';
    }
    return out;
}

double Trace::makespan() const {
    double m = 0;
    for (const auto& e : events)
        if (e.contains("end")) m = std::max(m, e["end"].get<double>());
    return m;
}

std::string format_seconds(double s) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, s);
    return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------

std::vector<nlohmann::json> parse_trace(std::string_view text) {
    std::vector<nlohmann::json> out;
    std::size_t line = 0, pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view l = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line;
        if (l.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(nlohmann::json::parse(l));
        } catch (const nlohmann::json::parse_error&) {
            throw TraceError("line " + std::to_string(line) + ": not valid JSON");
        }
        if (!out.back().is_object() || !out.back().contains("kind") || !out.back()["kind"].is_string())
            throw TraceError("line " + std::to_string(line) + ": expected an object with a 'kind'");
    }
    return out;
}

namespace {

void require(const nlohmann::json& e, std::size_t idx, std::initializer_list<const char*> ints,
             std::initializer_list<const char*> numbers) {
    for (const char* k : ints)
        if (!e.contains(k) || !e[k].is_number_integer())
            throw TraceError("event " + std::to_string(idx + 1) + ": missing integer field '" + k + "'");
    for (const char* k : numbers)
        if (!e.contains(k) || !e[k].is_number())
            throw TraceError("event " + std::to_string(idx + 1) + ": missing numeric field '" + k + "'");
}

void check_disjoint(std::vector<std::pair<double, double>> iv, const std::string& what) {
    std::sort(iv.begin(), iv.end());
    for (std::size_t i = 1; i < iv.size(); ++i)
        if (iv[i].first < iv[i - 1].second) throw TraceError("overlapping intervals on " + what);
}

}  // namespace

TraceSummary summarize(const std::vector<nlohmann::json>& events) {
    TraceSummary s;
    std::map<int, std::vector<std::pair<double, double>>> workers;
    std::map<std::pair<int, int>, std::vector<std::pair<double, double>>> links;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        std::string kind = e["kind"].get<std::string>();
        if (kind == "task") {
            require(e, i, {"task", "worker"}, {"start", "end"});
            if (!e.contains("codelet") || !e["codelet"].is_string())
                throw TraceError("event " + std::to_string(i + 1) + ": missing string field 'codelet'");
            double a = e["start"].get<double>(), b = e["end"].get<double>();
            if (b < a) throw TraceError("event " + std::to_string(i + 1) + ": ends before it starts");
            int w = e["worker"].get<int>();
            workers[w].push_back({a, b});
            s.busy[w] += b - a;
            s.makespan = std::max(s.makespan, b);
            ++s.tasks;
        } else if (kind == "transfer") {
            require(e, i, {"handle", "from", "to", "bytes"}, {"start", "end"});
            double a = e["start"].get<double>(), b = e["end"].get<double>();
            if (b < a) throw TraceError("event " + std::to_string(i + 1) + ": ends before it starts");
            std::pair<int, int> link{e["from"].get<int>(), e["to"].get<int>()};
            links[link].push_back({a, b});
            s.link_bytes[link] += e["bytes"].get<std::uint64_t>();
            s.makespan = std::max(s.makespan, b);
            ++s.transfers;
        } else if (kind == "error") {
            ++s.errors;
        } else if (kind != "alloc" && kind != "free" && kind != "register" && kind != "unregister") {
            throw TraceError("event " + std::to_string(i + 1) + ": unknown kind '" + kind + "'");
        }
    }
    for (const auto& [w, iv] : workers) check_disjoint(iv, "worker " + std::to_string(w));
    for (const auto& [l, iv] : links) check_disjoint(iv, "link " + std::to_string(l.first) + "->" + std::to_string(l.second));
    return s;
}

std::string TraceSummary::format() const {
    std::ostringstream o;
    o << "tasks: " << tasks << "\n";
    o << "transfers: " << transfers << "\n";
    o << "errors: " << errors << "\n";
    o << "makespan: " << format_seconds(makespan) << "\n";
    for (const auto& [w, b] : busy) o << "worker " << w << " busy: " << format_seconds(b) << "\n";
    for (const auto& [l, b] : link_bytes) o << "link " << l.first << "->" << l.second << " bytes: " << b << "\n";
    return o.str();
}

}  // namespace taskc::sim
