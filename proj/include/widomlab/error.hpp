#pragma once

#include <stdexcept>
#include <string>

namespace widomlab {

/// Every failure raised by the library. `kind` is a short machine-readable tag
/// ("degenerate", "unbounded-preimage", "non-convergence", ...) that the
/// harness copies into per-row failure records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

}  // namespace widomlab
