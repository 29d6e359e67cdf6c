#pragma once

// Hand-computed fixtures shared by the unit and acceptance suites.

#include <vector>

#include "mvcca/metrics.hpp"

namespace mvcca::testing {

// Question 1 splits {0.1, 0.2} | {0.8, 0.9}; GT 0.8 is above.
// Question 2 splits {0.0, 0.1, 0.2} | {1.0} (between-class variance 0.151875
// against 0.075625 and 0.035208); GT 0.1 is below.
// Question 3 is constant and skipped.
// Population variances: low (0.0025 + 0.02/3) / 2, high (0.0025 + 0) / 2.
inline std::vector<QuestionCorrelations> two_question_otsu_fixture() {
  return {
      {{0.1, 0.2, 0.8, 0.9}, 0.8},
      {{0.0, 0.1, 0.2, 1.0}, 0.1},
      {{0.3, 0.3, 0.3}, 0.3},
  };
}

inline constexpr double kFixtureLowVariance = (0.0025 + 0.02 / 3.0) / 2.0;
inline constexpr double kFixtureHighVariance = 0.00125;
inline constexpr double kFixtureGtAbove = 0.5;

}  // namespace mvcca::testing
