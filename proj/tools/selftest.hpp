#pragma once

#include <string>
#include <vector>

namespace wirepinn::cli {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fault names understood by run_self_tests (for exercising the failure path).
inline constexpr const char* kFaultFermiDerivative = "fermi-derivative";

/// Fermi approximation scan, derivative and gradient checks, oracle residual
/// and symmetry checks, and the loss fixed point. `fault` may name one
/// deliberately broken component.
std::vector<CheckResult> run_self_tests(const std::string& fault = "");

}  // namespace wirepinn::cli
