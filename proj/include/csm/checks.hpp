#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace csm {

/// One measured invariant: passes when `measured` compares to `tolerance`
/// as `relation` says ("<" or ">=").
struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string relation = "<";
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Every check is deterministic given its seed.
std::vector<CheckResult> check_completeness(std::uint64_t seed);
std::vector<CheckResult> check_equivalence(std::uint64_t seed);
std::vector<CheckResult> check_estimators(std::uint64_t seed);
std::vector<CheckResult> check_consistency(std::uint64_t seed);
std::vector<CheckResult> check_mh(std::uint64_t seed);
std::vector<CheckResult> check_stein_limit(std::uint64_t seed);
std::vector<CheckResult> check_dcsm_fixed_point(std::uint64_t seed);
std::vector<CheckResult> check_denoise(std::uint64_t seed);
std::vector<CheckResult> check_degeneracy(std::uint64_t seed);
std::vector<CheckResult> check_sampling_2d(std::uint64_t seed);
std::vector<CheckResult> check_gradients(std::uint64_t seed);

/// Suites exposed by `csm check`: completeness, estimators, equivalence,
/// stein_limit, denoise, mh.
std::vector<std::string> check_suite_names();
std::vector<CheckResult> run_check_suite(const std::string& suite, std::uint64_t seed);

/// CSV with header suite,check,measured,relation,tolerance,status,seconds,detail.
void write_check_report(const std::string& suite, const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace csm
