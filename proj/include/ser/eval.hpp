#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ser {

struct EvalReport {
  double weighted_f1 = 0.0;
  std::vector<std::string> classes;           // confusion row/column order
  std::map<std::string, double> per_class_f1;
  std::vector<std::vector<std::size_t>> confusion;  // [reference][hypothesis]
  std::size_t n_items = 0;
};

// Classes are the sorted union of `classes`, refs and hyps. Undefined
// precision or recall count as 0.
EvalReport weighted_f1(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                       const std::vector<std::string>& classes = {});

std::string format_report(const EvalReport& report);
// `metric<TAB>value` lines.
std::string format_report_kv(const EvalReport& report);
void write_report_kv(const EvalReport& report, const std::filesystem::path& path);

struct CvFold {
  std::vector<std::string> train;
  std::string dev;
  std::string test;
};

struct CvPlan {
  std::vector<CvFold> folds;
};

// Fold i tests session i, develops on session i+1 (mod 5), trains on the rest.
CvPlan kfold_plan(const std::vector<std::string>& sessions);

struct RunSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
RunSummary average_runs(const std::vector<double>& scores);

}  // namespace ser
