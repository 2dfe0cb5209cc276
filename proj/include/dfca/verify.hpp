#pragma once

#include <string>
#include <vector>

namespace dfca {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Test-only: run the sequential merge with swapped running-average
  /// weights. The sequential/batch equivalence property must then fail.
  bool inject_fault = false;
};

/// Runs the invariant suite on small instances.
std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts = {});

}  // namespace dfca
