#include "hcd/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hcd {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string record_to_json(const StepRecord& r) {
  std::ostringstream os;
  os << "{\"epoch\":" << r.epoch << ",\"step\":" << r.step;
  os << ",\"cls\":" << format_double(r.cls) << ",\"vic\":" << format_double(r.vic);
  os << ",\"gram\":" << format_double(r.gram) << ",\"mi_c\":" << format_double(r.mi_c);
  os << ",\"mi_d\":" << format_double(r.mi_d) << ",\"sparse\":" << format_double(r.sparse);
  os << ",\"total\":" << format_double(r.total);
  os << ",\"w_vic\":" << format_double(r.weights.vic);
  os << ",\"w_gram\":" << format_double(r.weights.gram);
  os << ",\"w_class_mi\":" << format_double(r.weights.class_mi);
  os << ",\"w_domain_mi\":" << format_double(r.weights.domain_mi);
  os << ",\"w_sparsity\":" << format_double(r.weights.sparsity);
  os << ",\"mask_mean\":" << format_double(r.mask_mean);
  os << ",\"mask_std\":" << format_double(r.mask_std);
  os << ",\"mi_domain_estimate\":" << format_double(r.mi_domain_estimate);
  os << ",\"mi_class_estimate\":" << format_double(r.mi_class_estimate);
  os << ",\"grad_norm\":" << format_double(r.grad_norm);
  os << ",\"wall_ms\":" << format_double(r.wall_ms);
  os << ",\"aborted\":" << (r.aborted ? "true" : "false");
  if (r.aborted) {
    std::string reason = r.abort_reason;
    for (auto& c : reason) {
      if (c == '"' || c == '\\') c = '\'';
    }
    os << ",\"abort_reason\":\"" << reason << "\"";
  }
  os << "}";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValueError("cannot open " + path + " for writing");
  os << content;
  if (!os) throw ValueError("failed writing " + path);
}

std::string render_summary(const SummaryKv& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

std::string render_schedule_log(const CurriculumSchedule& schedule) {
  std::ostringstream os;
  os << "epoch,vic,gram,class_mi,domain_mi,sparsity\n";
  for (std::size_t t = 0; t < schedule.epochs_total; ++t) {
    auto w = schedule.at(t);
    os << t << "," << format_double(w.vic) << "," << format_double(w.gram) << ","
       << format_double(w.class_mi) << "," << format_double(w.domain_mi) << ","
       << format_double(w.sparsity) << "\n";
  }
  return os.str();
}

void mean_and_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace hcd
