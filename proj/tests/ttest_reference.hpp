#pragma once

#include <vector>

namespace adaptq::testing {

// Pooled two-sample t-test values computed with scipy.stats.ttest_ind
// (equal_var=True) and frozen here.
struct TTestReference {
  std::vector<double> a;
  std::vector<double> b;
  double t;
  double df;
  double p;
};

inline const std::vector<TTestReference>& ttest_references() {
  static const std::vector<TTestReference> refs = {
      {{1, 2, 3}, {4, 5, 6}, -3.6742346141747673, 4, 0.021311641128756727},
      {{2.1, 3.4, 1.9, 5.6, 4.4}, {3.3, 2.2, 6.1, 5.9, 7.0, 4.8}, -1.3517038591770139, 9, 0.2094609384455937},
      {{0.5, 0.7, 0.62, 0.55}, {0.41, 0.48, 0.39, 0.52, 0.47}, 2.96268182849117, 7, 0.02102488544291208},
      {{0.0, 1.0, 0.0, 1.0, 1.0}, {1.0, 1.0, 1.0, 0.0, 1.0, 1.0}, -0.8106960083062922, 9, 0.4384513950555242},
      {{1, 2}, {100, 200, 300}, -2.6631236723643994, 3, 0.0761354356966704},
      {{10, 12, 9, 11, 13, 10, 12}, {10.5, 11.5, 12.5, 9.5, 11.5, 12, 10, 11.5}, -0.19783777431581806, 13,
       0.8462319967031764},
      {{5.0, 5.1, 4.9, 5.2, 4.8, 5.0}, {5.3, 5.35, 5.25, 5.4, 5.2, 5.3}, -4.647580015448898, 10,
       0.0009113987319961575},
      {{0.2, 0.9, 0.4, 0.7, 0.3, 0.8, 0.6, 0.5, 0.55, 0.45},
       {0.25, 0.35, 0.3, 0.4, 0.2, 0.45, 0.5, 0.15, 0.3, 0.35},
       2.787926863825216,
       18,
       0.012146784661584989},
  };
  return refs;
}

}  // namespace adaptq::testing
