#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tdgfn {

// One metric snapshot of a training run. All fields except wallclock_s are
// deterministic functions of (config, seed).
struct TraceRow {
  std::int64_t iteration = 0;
  std::int64_t cumulative_state_visits = 0;
  double loss = 0.0;
  int modes_found = 0;
  double empirical_l1 = 0.0;
  double exact_l1 = 0.0;
  double wallclock_s = 0.0;
};

void write_trace(const std::string& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace(const std::string& path);

// Median and standard deviation across seeds, row by row. All traces must
// share their iteration schedule.
struct AggregateRow {
  std::int64_t iteration = 0;
  std::int64_t visits_median = 0;
  double loss_median = 0.0, loss_std = 0.0;
  double modes_median = 0.0, modes_std = 0.0;
  double empirical_l1_median = 0.0, empirical_l1_std = 0.0;
  double exact_l1_median = 0.0, exact_l1_std = 0.0;
};

std::vector<AggregateRow> aggregate_traces(
    const std::vector<std::vector<TraceRow>>& traces);
void write_aggregate(const std::string& path,
                     const std::vector<AggregateRow>& rows);

// File contents with the trailing (wallclock) column removed from each line;
// used to compare reruns for bit-identical logical content.
std::string strip_last_column(const std::string& path);

double median_of(std::vector<double> v);
double stddev_of(const std::vector<double>& v);  // sample form

}  // namespace tdgfn
