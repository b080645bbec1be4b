#include "metarl/harness/records.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace metarl::harness {

namespace {

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double std_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("eval records: bad number '" + text + "'");
  }
  return v;
}

}  // namespace

double EvalRecord::std_over_tasks() const {
  std::vector<double> xs;
  for (const TaskRecord& t : tasks) xs.push_back(t.distance_return);
  return std_of(xs);
}

double EvalRecord::mean_embedding_norm() const {
  std::vector<double> xs;
  for (const TaskRecord& t : tasks) xs.push_back(t.embedding_norm);
  return mean_of(xs);
}

std::string format_number(double value) { return fmt::format("{:.9g}", value); }

double quantize(double value) { return parse_double(format_number(value)); }

EvalRecord make_record(std::size_t meta_iteration, envs::Region split, std::vector<TaskRecord> tasks) {
  EvalRecord r;
  r.meta_iteration = meta_iteration;
  r.split = split;
  double sum = 0.0;
  for (TaskRecord& t : tasks) {
    t.distance_return = quantize(t.distance_return);
    t.embedding_norm = quantize(t.embedding_norm);
    sum += t.distance_return;
  }
  r.mean_return = tasks.empty() ? 0.0 : sum / static_cast<double>(tasks.size());
  r.tasks = std::move(tasks);
  return r;
}

void write_eval_records(std::ostream& out, std::span<const EvalRecord> records) {
  out << "meta_iteration\tsplit\ttask_id\tdistance_return\tembedding_norm\n";
  for (const EvalRecord& r : records) {
    for (const TaskRecord& t : r.tasks) {
      out << fmt::format("{}\t{}\t{}\t{}\t{}\n", r.meta_iteration, envs::region_name(r.split), t.task_id,
                         format_number(t.distance_return), format_number(t.embedding_norm));
    }
  }
}

std::vector<EvalRecord> read_eval_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  std::vector<EvalRecord> out;
  std::vector<TaskRecord> pending;
  std::size_t iteration = 0;
  envs::Region split = envs::Region::train;
  bool open = false;
  auto flush = [&] {
    if (open) out.push_back(make_record(iteration, split, std::move(pending)));
    pending.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string it, sp, id, ret, norm;
    if (!std::getline(row, it, '\t') || !std::getline(row, sp, '\t') || !std::getline(row, id, '\t') ||
        !std::getline(row, ret, '\t') || !std::getline(row, norm, '\t')) {
      throw std::runtime_error("eval records: malformed line '" + line + "'");
    }
    const std::size_t i = std::stoull(it);
    const envs::Region s = envs::parse_region(sp);
    if (!open || i != iteration || s != split) {
      flush();
      iteration = i;
      split = s;
      open = true;
    }
    pending.push_back(TaskRecord{std::stoll(id), parse_double(ret), parse_double(norm)});
  }
  flush();
  return out;
}

std::string format_curve(std::span<const EvalRecord> records, envs::Region split) {
  std::string out = "meta_iteration\tmean_return\tstd_over_tasks\n";
  for (const EvalRecord& r : records) {
    if (r.split != split) continue;
    out += fmt::format("{}\t{}\t{}\n", r.meta_iteration, format_number(r.mean_return),
                       format_number(r.std_over_tasks()));
  }
  return out;
}

namespace {

// label -> iteration -> per-seed means, labels in first-seen order.
struct Pooled {
  std::vector<std::string> labels;
  std::map<std::string, std::map<std::size_t, std::vector<double>>> values;
};

Pooled pool(std::span<const RunRecords> runs, envs::Region split) {
  Pooled p;
  for (const RunRecords& run : runs) {
    if (!p.values.contains(run.label)) p.labels.push_back(run.label);
    auto& by_iter = p.values[run.label];
    for (const EvalRecord& r : run.records) {
      if (r.split == split) by_iter[r.meta_iteration].push_back(r.mean_return);
    }
  }
  return p;
}

}  // namespace

std::string format_comparison(std::span<const RunRecords> runs, envs::Region split) {
  const Pooled p = pool(runs, split);
  std::string out = "label\tmeta_iteration\tmean_over_seeds\tstd_over_seeds\tseeds\n";
  for (const std::string& label : p.labels) {
    for (const auto& [iteration, xs] : p.values.at(label)) {
      out += fmt::format("{}\t{}\t{}\t{}\t{}\n", label, iteration, format_number(mean_of(xs)),
                         format_number(std_of(xs)), xs.size());
    }
  }
  return out;
}

std::string format_final_table(std::span<const RunRecords> runs) {
  const envs::Region splits[] = {envs::Region::train, envs::Region::iid_test, envs::Region::ood_test};
  std::vector<std::string> labels;
  std::map<std::string, std::vector<const RunRecords*>> by_label;
  for (const RunRecords& run : runs) {
    if (!by_label.contains(run.label)) labels.push_back(run.label);
    by_label[run.label].push_back(&run);
  }
  std::string out = "label\tseeds";
  for (envs::Region s : splits) out += fmt::format("\t{0}\t{0}_std", envs::region_name(s));
  out += "\tembedding_norm\n";
  for (const std::string& label : labels) {
    out += fmt::format("{}\t{}", label, by_label[label].size());
    std::vector<double> norms;
    for (envs::Region s : splits) {
      std::vector<double> finals;
      for (const RunRecords* run : by_label[label]) {
        const EvalRecord* last = nullptr;
        for (const EvalRecord& r : run->records) {
          if (r.split == s && (last == nullptr || r.meta_iteration >= last->meta_iteration)) last = &r;
        }
        if (last == nullptr) continue;
        finals.push_back(last->mean_return);
        if (s == envs::Region::train) norms.push_back(last->mean_embedding_norm());
      }
      out += fmt::format("\t{}\t{}", format_number(mean_of(finals)), format_number(std_of(finals)));
    }
    out += fmt::format("\t{}\n", format_number(mean_of(norms)));
  }
  return out;
}

}  // namespace metarl::harness
