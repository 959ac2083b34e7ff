#include "taskc/support/diagnostic.hpp"

#include <algorithm>

namespace taskc {

std::string_view to_string(Severity s) {
    return s == Severity::Error ? "error" : "warning";
}

std::string Diagnostic::format() const {
    std::string out = location.str();
    out += ": ";
    out += to_string(severity);
    out += ": ";
    out += message;
    return out;
}

void sort_diagnostics(Diagnostics& diags) {
    std::stable_sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return a.location < b.location;
    });
}

bool has_errors(const Diagnostics& diags) {
    return count(diags, Severity::Error) > 0;
}

std::size_t count(const Diagnostics& diags, Severity s) {
    return static_cast<std::size_t>(
        std::count_if(diags.begin(), diags.end(), [s](const Diagnostic& d) { return d.severity == s; }));
}

}  // namespace taskc
