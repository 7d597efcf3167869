#include "tdgfn/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tdgfn/errors.hpp"

namespace tdgfn {

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void write_trace(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "iteration,cumulative_state_visits,loss,modes_found,empirical_l1,"
         "exact_l1,wallclock_s\n";
  for (const TraceRow& r : rows) {
    out << r.iteration << ',' << r.cumulative_state_visits << ','
        << fmt(r.loss) << ',' << r.modes_found << ',' << fmt(r.empirical_l1)
        << ',' << fmt(r.exact_l1) << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.wallclock_s);
    out << buf << '\n';
  }
}

std::vector<TraceRow> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("trace file is empty: " + path);
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    TraceRow r;
    auto next = [&] {
      if (!std::getline(ss, field, ','))
        throw ConfigError("trace row is short: " + path);
      return field;
    };
    r.iteration = std::stoll(next());
    r.cumulative_state_visits = std::stoll(next());
    r.loss = std::stod(next());
    r.modes_found = std::stoi(next());
    r.empirical_l1 = std::stod(next());
    r.exact_l1 = std::stod(next());
    r.wallclock_s = std::stod(next());
    rows.push_back(r);
  }
  return rows;
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw ContractViolation("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / (v.size() - 1));
}

std::vector<AggregateRow> aggregate_traces(
    const std::vector<std::vector<TraceRow>>& traces) {
  if (traces.empty()) return {};
  const std::size_t rows = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != rows)
      throw ConfigError("aggregate: traces have different snapshot counts");
  std::vector<AggregateRow> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> visits, loss, modes, el1, xl1;
    for (const auto& t : traces) {
      if (t[i].iteration != traces.front()[i].iteration)
        throw ConfigError("aggregate: iteration schedules differ");
      visits.push_back(static_cast<double>(t[i].cumulative_state_visits));
      loss.push_back(t[i].loss);
      modes.push_back(t[i].modes_found);
      el1.push_back(t[i].empirical_l1);
      xl1.push_back(t[i].exact_l1);
    }
    AggregateRow& a = out[i];
    a.iteration = traces.front()[i].iteration;
    a.visits_median = static_cast<std::int64_t>(median_of(visits));
    a.loss_median = median_of(loss);
    a.loss_std = stddev_of(loss);
    a.modes_median = median_of(modes);
    a.modes_std = stddev_of(modes);
    a.empirical_l1_median = median_of(el1);
    a.empirical_l1_std = stddev_of(el1);
    a.exact_l1_median = median_of(xl1);
    a.exact_l1_std = stddev_of(xl1);
  }
  return out;
}

void write_aggregate(const std::string& path,
                     const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "iteration,visits_median,loss_median,loss_std,modes_found_median,"
         "modes_found_std,empirical_l1_median,empirical_l1_std,"
         "exact_l1_median,exact_l1_std\n";
  for (const AggregateRow& r : rows) {
    out << r.iteration << ',' << r.visits_median << ',' << fmt(r.loss_median)
        << ',' << fmt(r.loss_std) << ',' << fmt(r.modes_median) << ','
        << fmt(r.modes_std) << ',' << fmt(r.empirical_l1_median) << ','
        << fmt(r.empirical_l1_std) << ',' << fmt(r.exact_l1_median) << ','
        << fmt(r.exact_l1_std) << '\n';
  }
}

std::string strip_last_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::string line, out;
  while (std::getline(in, line)) {
    const std::size_t pos = line.rfind(',');
    out += pos == std::string::npos ? line : line.substr(0, pos);
    out += '\n';
  }
  return out;
}

}  // namespace tdgfn
