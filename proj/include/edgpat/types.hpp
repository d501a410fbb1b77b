#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace edgpat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy: ConfigError -> exit 1, DataError -> exit 2,
// NumericError -> exit 3 (see tools/edgpat.cpp).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One patent application: the co-applicant companies, the lowest-level
// classification codes it is assigned, and the application time.
// Companies and codes are stored as interned indices (see Dataset), both
// sorted ascending; index order equals lexicographic id order.
struct Event {
  std::string patent_id;
  std::vector<int> companies;  // company indices, sorted, nonempty
  std::vector<int> codes;      // leaf indices, sorted, nonempty
  double timestamp = 0;        // seconds since epoch, > 0
};

// One company's view of an event. Events with c co-applicants expand to
// exactly c items, in sorted-company order within the event.
struct EventItem {
  std::string patent_id;
  int company = -1;
  std::vector<int> codes;
  double timestamp = 0;
};

// Ground truth for one (company, anchor) pair: the set of leaf codes the
// company applies for in (anchor, anchor + window].
struct LabelWindow {
  int company = -1;
  double anchor_time = 0;
  double window = 0;
  std::vector<int> positives;  // leaf indices, sorted
};

// Span boundaries. Events with t <= train_end are training, events with
// train_end < t <= val_end are validation, val_end < t <= test_end test.
struct Splits {
  double train_end = 0;
  double val_end = 0;
  double test_end = 0;

  bool valid() const { return train_end < val_end && val_end < test_end; }
};

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kDefaultWindowSeconds = 365.0 * kSecondsPerDay;

}  // namespace edgpat
