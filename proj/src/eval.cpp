#include "ser/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ser/error.hpp"

namespace ser {

EvalReport weighted_f1(const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
                       const std::vector<std::string>& classes) {
  if (refs.size() != hyps.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reference and hypothesis counts differ");
  }
  if (refs.empty()) throw Error(ErrorCode::kEmptyInput, "weighted_f1 of no items");

  std::set<std::string> names(classes.begin(), classes.end());
  names.insert(refs.begin(), refs.end());
  names.insert(hyps.begin(), hyps.end());

  EvalReport r;
  r.classes.assign(names.begin(), names.end());
  r.n_items = refs.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < r.classes.size(); ++i) index[r.classes[i]] = i;

  const std::size_t c = r.classes.size();
  r.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < refs.size(); ++i) ++r.confusion[index[refs[i]]][index[hyps[i]]];

  for (std::size_t k = 0; k < c; ++k) {
    std::size_t tp = r.confusion[k][k];
    std::size_t support = 0;
    std::size_t predicted = 0;
    for (std::size_t j = 0; j < c; ++j) {
      support += r.confusion[k][j];
      predicted += r.confusion[j][k];
    }
    const double precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    const double recall = support > 0 ? static_cast<double>(tp) / support : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.per_class_f1[r.classes[k]] = f1;
    r.weighted_f1 += static_cast<double>(support) / static_cast<double>(r.n_items) * f1;
  }
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "items: " << r.n_items << "\n";
  os << "weighted F1: " << r.weighted_f1 << "\n";
  os << "per-class F1:\n";
  for (const auto& name : r.classes) os << "  " << name << ": " << r.per_class_f1.at(name) << "\n";
  os << "confusion (rows = reference, columns = hypothesis):\n";
  os << "  " << std::setw(10) << "";
  for (const auto& name : r.classes) os << std::setw(10) << name;
  os << "\n";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    os << "  " << std::setw(10) << r.classes[i];
    for (std::size_t v : r.confusion[i]) os << std::setw(10) << v;
    os << "\n";
  }
  return os.str();
}

std::string format_report_kv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n_items\t" << r.n_items << "\n";
  os << "weighted_f1\t" << r.weighted_f1 << "\n";
  for (const auto& name : r.classes) os << "f1." << name << "\t" << r.per_class_f1.at(name) << "\n";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    for (std::size_t j = 0; j < r.classes.size(); ++j) {
      os << "confusion." << r.classes[i] << "." << r.classes[j] << "\t" << r.confusion[i][j]
         << "\n";
    }
  }
  return os.str();
}

void write_report_kv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  out << format_report_kv(report);
}

CvPlan kfold_plan(const std::vector<std::string>& sessions) {
  if (sessions.size() != 5) {
    throw Error(ErrorCode::kInvalidArgument,
                "5-fold plan needs exactly 5 sessions, got " + std::to_string(sessions.size()));
  }
  std::set<std::string> unique(sessions.begin(), sessions.end());
  if (unique.size() != sessions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "session ids must be distinct");
  }
  CvPlan plan;
  const std::size_t n = sessions.size();
  for (std::size_t i = 0; i < n; ++i) {
    CvFold fold;
    fold.test = sessions[i];
    fold.dev = sessions[(i + 1) % n];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && j != (i + 1) % n) fold.train.push_back(sessions[j]);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

RunSummary average_runs(const std::vector<double>& scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "average of no runs");
  RunSummary s;
  for (double x : scores) s.mean += x;
  s.mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double x : scores) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(scores.size()));
  return s;
}

}  // namespace ser
