#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "stafem/bench.hpp"

namespace stafem {

namespace {

struct Column {
  std::string name;
  std::function<double(const FrameMetrics&)> value;
  bool parity_only = false;
  bool aggregate = true;
};

const std::vector<Column>& numeric_columns() {
  static const std::vector<Column> cols = {
      {"frame_time", [](const FrameMetrics& m) { return m.frame_time; }},
      {"update_time", [](const FrameMetrics& m) { return m.update_time; }},
      {"connectivity_time", [](const FrameMetrics& m) { return m.connectivity_time; }},
      {"finalize_time", [](const FrameMetrics& m) { return m.finalize_time; }},
      {"solve_time", [](const FrameMetrics& m) { return m.solve_time; }},
      {"cg_iterations", [](const FrameMetrics& m) { return double(m.cg_iterations); }},
      {"cg_residual", [](const FrameMetrics& m) { return m.cg_residual; }},
      {"cg_converged", [](const FrameMetrics& m) { return m.cg_converged ? 1.0 : 0.0; }},
      {"active_tets", [](const FrameMetrics& m) { return double(m.active_tets); }},
      {"delta_size", [](const FrameMetrics& m) { return double(m.delta_size); }},
      {"edges_visited", [](const FrameMetrics& m) { return double(m.counters.edges_visited); }},
      {"entries_mutated", [](const FrameMetrics& m) { return double(m.counters.entries_mutated); }},
      {"tets_scanned", [](const FrameMetrics& m) { return double(m.counters.tets_scanned); }},
      {"parity_mismatch_count", [](const FrameMetrics& m) { return double(m.parity_mismatch_count); }, true},
      {"parity_max_abs_diff", [](const FrameMetrics& m) { return m.parity_max_abs_diff; }, true},
      {"connectivity_mismatch_rate", [](const FrameMetrics& m) { return m.connectivity_mismatch_rate; }},
      {"components", [](const FrameMetrics& m) { return double(m.components); }},
      {"bfs_components", [](const FrameMetrics& m) { return double(m.bfs_components); }},
      {"state_bytes", [](const FrameMetrics& m) { return double(m.state_bytes); }},
  };
  return cols;
}

// Shortest round-trip representation, so numeric columns are byte-stable across runs.
std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {"seed", "frame", "operator", "scenario", "policy"};
    for (const auto& c : numeric_columns()) n.push_back(c.name);
    return n;
  }();
  return names;
}

void write_csv(std::ostream& out, const std::vector<FrameMetrics>& frames) {
  const auto& names = csv_columns();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (const auto& m : frames) {
    out << m.seed << ',' << m.frame << ',' << to_string(m.op) << ',' << to_string(m.scenario) << ','
        << policy_letter(m.policy);
    for (const auto& c : numeric_columns()) {
      out << ',';
      if (!c.parity_only || m.parity_checked) out << format_double(c.value(m));
    }
    out << '\n';
  }
}

std::string summary_json(const std::vector<FrameMetrics>& frames, const std::vector<RunFailure>& failures) {
  using Key = std::tuple<OperatorKind, Scenario, UpdatePolicy>;
  std::map<Key, std::vector<const FrameMetrics*>> groups;
  std::map<Key, bool> has_later;
  for (const auto& m : frames) {
    const Key k{m.op, m.scenario, m.policy};
    groups[k];
    if (m.frame > 0) has_later[k] = true;
  }
  for (const auto& m : frames) {
    const Key k{m.op, m.scenario, m.policy};
    if (m.frame > 0 || !has_later[k]) groups[k].push_back(&m);
  }

  nlohmann::ordered_json doc;
  doc["warmup_frames_excluded"] = 1;
  doc["groups"] = nlohmann::ordered_json::array();
  for (const auto& [key, rows] : groups) {
    nlohmann::ordered_json g;
    g["operator"] = to_string(std::get<0>(key));
    g["scenario"] = to_string(std::get<1>(key));
    g["policy"] = std::string(1, policy_letter(std::get<2>(key)));
    g["frames"] = rows.size();
    for (const auto& c : numeric_columns()) {
      std::vector<double> v;
      for (const auto* r : rows) {
        if (!c.parity_only || r->parity_checked) v.push_back(c.value(*r));
      }
      if (v.empty()) continue;
      const Stat s = summarize(v);
      g["metrics"][c.name] = {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}, {"count", s.count}};
    }
    doc["groups"].push_back(std::move(g));
  }
  doc["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : failures) {
    doc["failures"].push_back({{"seed", f.seed}, {"policy", std::string(1, policy_letter(f.policy))}, {"message", f.message}});
  }
  return doc.dump(2);
}

void emit_report(const std::filesystem::path& prefix, const std::vector<FrameMetrics>& frames,
                 const std::vector<RunFailure>& failures) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  std::ofstream csv(prefix.string() + ".csv");
  if (!csv) throw std::runtime_error("cannot write " + prefix.string() + ".csv");
  write_csv(csv, frames);
  std::ofstream js(prefix.string() + ".json");
  if (!js) throw std::runtime_error("cannot write " + prefix.string() + ".json");
  js << summary_json(frames, failures) << '\n';
}

}  // namespace stafem
