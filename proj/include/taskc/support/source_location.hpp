#pragma once

#include <string>

namespace taskc {

struct SourceLocation {
    std::string file;
    int line = 1;
    int column = 1;

    bool operator==(const SourceLocation&) const = default;
    auto operator<=>(const SourceLocation&) const = default;

    /// "file:line:col"
    std::string str() const {
        return file + ":" + std::to_string(line) + ":" + std::to_string(column);
    }
};

}  // namespace taskc
