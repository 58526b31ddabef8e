#include "parkmon/errors.hpp"

namespace parkmon {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
    std::string out = "validation failed";
    for (const auto& s : v) {
        out += "\n  - ";
        out += s;
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

}  // namespace parkmon
