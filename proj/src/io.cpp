#include "crowdlf/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace crowdlf {

namespace {

using nlohmann::json;

// All floating-point output goes through one formatter with round-trip
// precision so reruns are byte-identical.
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", std::move(rows)}};
}

bool matrix_from_json(const json& j, Matrix& out, std::string& err) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    err = "matrix object needs rows/cols/data";
    return false;
  }
  const int rows = j["rows"].get<int>();
  const int cols = j["cols"].get<int>();
  if (rows < 0 || cols < 0 || !j["data"].is_array() ||
      static_cast<int>(j["data"].size()) != rows) {
    err = "matrix data does not match its declared shape";
    return false;
  }
  out = Matrix(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = j["data"][i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      err = "matrix row " + std::to_string(i) + " has the wrong width";
      return false;
    }
    for (int c = 0; c < cols; ++c) out(i, c) = row[c].get<double>();
  }
  return true;
}

json config_to_json(const ModelConfig& config) {
  return json{{"dim", config.dim},
              {"num_worker_groups", config.num_worker_groups},
              {"lambda", config.lambda},
              {"eta", config.eta},
              {"tol", config.tol},
              {"max_outer", config.max_outer},
              {"max_inner", config.max_inner},
              {"init", init_scheme_name(config.init)},
              {"seed", config.seed},
              {"deterministic", config.deterministic}};
}

bool config_from_json(const json& j, ModelConfig& out, std::string& err) {
  try {
    out.dim = j.at("dim").get<int>();
    out.num_worker_groups = j.at("num_worker_groups").get<int>();
    out.lambda = j.at("lambda").get<double>();
    out.eta = j.at("eta").get<double>();
    out.tol = j.at("tol").get<double>();
    out.max_outer = j.at("max_outer").get<int>();
    out.max_inner = j.at("max_inner").get<int>();
    if (!parse_init_scheme(j.at("init").get<std::string>(), &out.init)) {
      err = "unknown init scheme '" + j.at("init").get<std::string>() + "'";
      return false;
    }
    out.seed = j.at("seed").get<uint64_t>();
    out.deterministic = j.at("deterministic").get<bool>();
  } catch (const json::exception& e) {
    err = std::string("config: ") + e.what();
    return false;
  }
  return true;
}

// Writes text to the path, replacing the file. Throws on failure so callers
// surface a clean error rather than a silent partial file.
void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

bool parse_int_field(const std::string& field, long& out) {
  if (field.empty()) return false;
  size_t pos = 0;
  try {
    out = std::stol(field, &pos);
  } catch (...) {
    return false;
  }
  return pos == field.size();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

json loaded_json(const std::filesystem::path& path, std::vector<std::string>& errors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    errors.push_back("cannot open " + path.string());
    return json();
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    errors.push_back(path.string() + ": not valid JSON");
    return json();
  }
  return j;
}

}  // namespace

Loaded<LabelMatrix> load_labels_csv(const std::filesystem::path& path) {
  Loaded<LabelMatrix> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    out.errors.push_back("cannot open " + path.string());
    return out;
  }
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{
                                     "task", "worker", "label"}) {
    out.errors.push_back(path.string() + ":1: expected header 'task,worker,label'");
    return out;
  }
  LabelMatrix labels;
  long max_task = -1, max_worker = -1, max_label = -1;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    long t, w, l;
    if (fields.size() != 3 || !parse_int_field(fields[0], t) ||
        !parse_int_field(fields[1], w) || !parse_int_field(fields[2], l)) {
      out.errors.push_back(path.string() + ":" + std::to_string(line_no) +
                           ": expected three integers 'task,worker,label'");
      continue;
    }
    if (t < 0 || w < 0 || l < 0) {
      out.errors.push_back(path.string() + ":" + std::to_string(line_no) +
                           ": negative id or label");
      continue;
    }
    labels.entries.push_back({static_cast<int>(t), static_cast<int>(w), static_cast<int>(l)});
    max_task = std::max(max_task, t);
    max_worker = std::max(max_worker, w);
    max_label = std::max(max_label, l);
  }
  if (!out.errors.empty()) return out;
  if (labels.entries.empty()) {
    out.errors.push_back(path.string() + ": no label rows");
    return out;
  }
  labels.num_tasks = static_cast<int>(max_task + 1);
  labels.num_workers = static_cast<int>(max_worker + 1);
  labels.num_categories = std::max(2, static_cast<int>(max_label + 1));
  std::sort(labels.entries.begin(), labels.entries.end(),
            [](const LabelEntry& a, const LabelEntry& b) {
              return a.task != b.task ? a.task < b.task : a.worker < b.worker;
            });
  const ValidationReport report = validate(labels);
  if (!report.ok) {
    for (const std::string& p : report.problems) out.errors.push_back(path.string() + ": " + p);
    return out;
  }
  out.value = std::move(labels);
  return out;
}

void write_labels_csv(const std::filesystem::path& path, const LabelMatrix& labels) {
  std::string text = "task,worker,label\n";
  for (const LabelEntry& e : labels.entries) {
    text += std::to_string(e.task);
    text += ',';
    text += std::to_string(e.worker);
    text += ',';
    text += std::to_string(e.label);
    text += '\n';
  }
  write_text(path, text);
}

namespace {

json scenario_to_json(const ScenarioSpec& spec) {
  json wc = json::array();
  for (const Matrix& m : spec.worker_centroids) wc.push_back(matrix_to_json(m));
  return json{{"name", spec.name},
              {"num_tasks", spec.num_tasks},
              {"num_workers", spec.num_workers},
              {"num_categories", spec.num_categories},
              {"num_worker_groups", spec.num_worker_groups},
              {"dim", spec.dim},
              {"task_centroids", matrix_to_json(spec.task_centroids)},
              {"worker_centroids", std::move(wc)},
              {"task_noise", spec.task_noise},
              {"worker_noise", spec.worker_noise},
              {"missing_prob", spec.missing_prob},
              {"seed", spec.seed}};
}

bool scenario_from_json(const json& j, ScenarioSpec& spec, std::string& err) {
  try {
    spec.name = j.value("name", std::string());
    spec.num_tasks = j.at("num_tasks").get<int>();
    spec.num_workers = j.at("num_workers").get<int>();
    spec.num_categories = j.at("num_categories").get<int>();
    spec.num_worker_groups = j.at("num_worker_groups").get<int>();
    spec.dim = j.at("dim").get<int>();
    if (!matrix_from_json(j.at("task_centroids"), spec.task_centroids, err)) return false;
    spec.worker_centroids.clear();
    for (const json& w : j.at("worker_centroids")) {
      Matrix m;
      if (!matrix_from_json(w, m, err)) return false;
      spec.worker_centroids.push_back(std::move(m));
    }
    spec.task_noise = j.at("task_noise").get<double>();
    spec.worker_noise = j.at("worker_noise").get<double>();
    spec.missing_prob = j.at("missing_prob").get<double>();
    spec.seed = j.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    err = std::string("scenario: ") + e.what();
    return false;
  }
  return true;
}

}  // namespace

Loaded<ScenarioSpec> load_scenario_json(const std::filesystem::path& path) {
  Loaded<ScenarioSpec> out;
  const json j = loaded_json(path, out.errors);
  if (!out.errors.empty()) return out;
  ScenarioSpec spec;
  std::string err;
  if (!scenario_from_json(j, spec, err)) {
    out.errors.push_back(path.string() + ": " + err);
    return out;
  }
  out.value = std::move(spec);
  return out;
}

void write_scenario_json(const std::filesystem::path& path, const ScenarioSpec& spec) {
  write_text(path, scenario_to_json(spec).dump(2) + "\n");
}

Loaded<TruthFile> load_truth_json(const std::filesystem::path& path) {
  Loaded<TruthFile> out;
  const json j = loaded_json(path, out.errors);
  if (!out.errors.empty()) return out;
  TruthFile truth;
  try {
    if (!j.contains("task_labels") || !j["task_labels"].is_array() ||
        j["task_labels"].empty()) {
      out.errors.push_back(path.string() + ": missing non-empty 'task_labels' array");
      return out;
    }
    for (const json& v : j["task_labels"]) truth.task_labels.push_back(v.get<int>());
    if (j.contains("scenario")) {
      ScenarioSpec spec;
      std::string err;
      if (!scenario_from_json(j["scenario"], spec, err)) {
        out.errors.push_back(path.string() + ": " + err);
        return out;
      }
      truth.scenario = std::move(spec);
    }
    if (j.contains("task_groups") && j.contains("worker_groups")) {
      Memberships ms;
      for (const json& v : j["task_groups"]) ms.task_groups.push_back(v.get<int>());
      for (const json& v : j["worker_groups"]) ms.worker_groups.push_back(v.get<int>());
      truth.memberships = std::move(ms);
    }
  } catch (const json::exception& e) {
    out.errors.push_back(path.string() + ": " + e.what());
    return out;
  }
  out.value = std::move(truth);
  return out;
}

void write_truth_json(const std::filesystem::path& path, const ScenarioSpec& spec,
                      const GroundTruth& truth) {
  json factors = json::array();
  for (const Matrix& m : truth.worker_factors) factors.push_back(matrix_to_json(m));
  const json j{{"scenario", scenario_to_json(spec)},
               {"task_labels", truth.task_labels},
               {"task_groups", truth.memberships.task_groups},
               {"worker_groups", truth.memberships.worker_groups},
               {"task_factors", matrix_to_json(truth.task_factors)},
               {"worker_factors", std::move(factors)}};
  write_text(path, j.dump(2) + "\n");
}

void write_truth_labels_json(const std::filesystem::path& path,
                             const std::vector<int>& task_labels) {
  write_text(path, json{{"task_labels", task_labels}}.dump(2) + "\n");
}

namespace {

json decision_to_json(const LabelDecision& decision) {
  return json{{"category_label", decision.category_label},
              {"category_source", decision.category_source},
              {"category_score", decision.category_score},
              {"task_labels", decision.task_labels},
              {"degenerate", decision.degenerate},
              {"collision", decision.collision}};
}

}  // namespace

Loaded<ModelFile> load_model_json(const std::filesystem::path& path) {
  Loaded<ModelFile> out;
  const json j = loaded_json(path, out.errors);
  if (!out.errors.empty()) return out;
  ModelFile mf;
  std::string err;
  try {
    if (!config_from_json(j.at("config"), mf.config, err)) {
      out.errors.push_back(path.string() + ": " + err);
      return out;
    }
    mf.num_tasks = j.at("num_tasks").get<int>();
    mf.num_workers = j.at("num_workers").get<int>();
    mf.num_categories = j.at("num_categories").get<int>();
    mf.num_observed = j.at("num_observed").get<size_t>();
    if (!matrix_from_json(j.at("task_factors"), mf.state.factors.task_factors, err) ||
        !matrix_from_json(j.at("worker_factors"), mf.state.factors.worker_factors, err)) {
      out.errors.push_back(path.string() + ": " + err);
      return out;
    }
    const json& rot = j.at("rotations");
    mf.state.rotations.num_groups = rot.at("num_groups").get<int>();
    mf.state.rotations.num_categories = rot.at("num_categories").get<int>();
    mf.state.rotations.dim = rot.at("dim").get<int>();
    mf.state.rotations.data = rot.at("data").get<std::vector<double>>();
    const size_t want = static_cast<size_t>(mf.state.rotations.num_groups) *
                        mf.state.rotations.num_categories * mf.state.rotations.dim *
                        mf.state.rotations.dim;
    if (mf.state.rotations.data.size() != want) {
      out.errors.push_back(path.string() + ": rotation data length mismatch");
      return out;
    }
    mf.state.memberships.task_groups = j.at("task_groups").get<std::vector<int>>();
    mf.state.memberships.worker_groups = j.at("worker_groups").get<std::vector<int>>();
    mf.state.initial_loss = j.at("initial_loss").get<double>();
    mf.state.converged = j.at("converged").get<bool>();
    mf.state.iterations = j.at("iterations").get<int>();
    mf.state.worker_reassign_rejected = j.value("worker_reassign_rejected", 0);
    if (j.contains("warnings")) {
      mf.state.warnings = j["warnings"].get<std::vector<std::string>>();
    }
    for (const json& row : j.at("trace")) {
      TraceRow tr;
      tr.iteration = row.at("iteration").get<int>();
      tr.nll = row.at("nll").get<double>();
      tr.penalty = row.at("penalty").get<double>();
      tr.total = row.at("total").get<double>();
      tr.task_changes = row.at("task_changes").get<int>();
      tr.worker_changes = row.at("worker_changes").get<int>();
      mf.state.trace.push_back(tr);
    }
    const json& d = j.at("decision");
    mf.decision.category_label = d.at("category_label").get<std::vector<int>>();
    mf.decision.category_source = d.at("category_source").get<std::vector<int>>();
    mf.decision.category_score = d.at("category_score").get<std::vector<double>>();
    mf.decision.task_labels = d.at("task_labels").get<std::vector<int>>();
    mf.decision.degenerate = d.at("degenerate").get<bool>();
    mf.decision.collision = d.at("collision").get<bool>();
  } catch (const json::exception& e) {
    out.errors.push_back(path.string() + ": " + e.what());
    return out;
  }
  out.value = std::move(mf);
  return out;
}

void write_model_json(const std::filesystem::path& path, const ModelConfig& config,
                      const LabelMatrix& labels, const FitState& state,
                      const LabelDecision& decision) {
  json trace = json::array();
  for (const TraceRow& r : state.trace) {
    trace.push_back(json{{"iteration", r.iteration},
                         {"nll", r.nll},
                         {"penalty", r.penalty},
                         {"total", r.total},
                         {"task_changes", r.task_changes},
                         {"worker_changes", r.worker_changes}});
  }
  const json j{{"config", config_to_json(config)},
               {"num_tasks", labels.num_tasks},
               {"num_workers", labels.num_workers},
               {"num_categories", labels.num_categories},
               {"num_observed", labels.entries.size()},
               {"task_factors", matrix_to_json(state.factors.task_factors)},
               {"worker_factors", matrix_to_json(state.factors.worker_factors)},
               {"rotations", json{{"num_groups", state.rotations.num_groups},
                                  {"num_categories", state.rotations.num_categories},
                                  {"dim", state.rotations.dim},
                                  {"data", state.rotations.data}}},
               {"task_groups", state.memberships.task_groups},
               {"worker_groups", state.memberships.worker_groups},
               {"initial_loss", state.initial_loss},
               {"converged", state.converged},
               {"iterations", state.iterations},
               {"worker_reassign_rejected", state.worker_reassign_rejected},
               {"warnings", state.warnings},
               {"trace", std::move(trace)},
               {"decision", decision_to_json(decision)}};
  write_text(path, j.dump(2) + "\n");
}

void write_trace_tsv(const std::filesystem::path& path, const FitState& state) {
  std::string text = "iteration\tnll\tpenalty\ttotal\ttask_changes\tworker_changes\n";
  for (const TraceRow& r : state.trace) {
    text += std::to_string(r.iteration);
    text += '\t';
    text += fmt(r.nll);
    text += '\t';
    text += fmt(r.penalty);
    text += '\t';
    text += fmt(r.total);
    text += '\t';
    text += std::to_string(r.task_changes);
    text += '\t';
    text += std::to_string(r.worker_changes);
    text += '\n';
  }
  write_text(path, text);
}

Loaded<std::vector<int>> load_predictions_csv(const std::filesystem::path& path) {
  Loaded<std::vector<int>> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    out.errors.push_back("cannot open " + path.string());
    return out;
  }
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"task", "predicted_label"}) {
    out.errors.push_back(path.string() + ":1: expected header 'task,predicted_label'");
    return out;
  }
  std::vector<std::pair<long, long>> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    long t, l;
    if (fields.size() != 2 || !parse_int_field(fields[0], t) || !parse_int_field(fields[1], l) ||
        t < 0 || l < 0) {
      out.errors.push_back(path.string() + ":" + std::to_string(line_no) +
                           ": expected 'task,predicted_label' as non-negative integers");
      continue;
    }
    rows.emplace_back(t, l);
  }
  if (!out.errors.empty()) return out;
  if (rows.empty()) {
    out.errors.push_back(path.string() + ": no prediction rows");
    return out;
  }
  std::sort(rows.begin(), rows.end());
  std::vector<int> labels(rows.size(), 0);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<long>(i)) {
      out.errors.push_back(path.string() + ": task ids must cover 0.." +
                           std::to_string(rows.size() - 1) + " exactly once");
      return out;
    }
    labels[i] = static_cast<int>(rows[i].second);
  }
  out.value = std::move(labels);
  return out;
}

void write_predictions_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::string text = "task,predicted_label\n";
  for (size_t i = 0; i < labels.size(); ++i) {
    text += std::to_string(i);
    text += ',';
    text += std::to_string(labels[i]);
    text += '\n';
  }
  write_text(path, text);
}

namespace {

json cell_to_json(const TuningCell& cell, bool stage_a) {
  json j{{"D", cell.D}, {"lambda", cell.lambda}, {"k", cell.k}, {"objective", cell.objective}};
  if (stage_a) {
    j["bic"] = cell.bic_value;
  } else {
    j["skipped"] = cell.skipped;
    if (cell.qh) j["qh"] = *cell.qh;
  }
  return j;
}

}  // namespace

void write_tuning_json(const std::filesystem::path& path, const TuningReport& report) {
  json stage_a = json::array();
  for (const TuningCell& c : report.stage_a) stage_a.push_back(cell_to_json(c, true));
  json stage_b = json::array();
  for (const TuningCell& c : report.stage_b) stage_b.push_back(cell_to_json(c, false));
  const json j{{"stage_a", std::move(stage_a)},
               {"stage_b", std::move(stage_b)},
               {"chosen_D", report.chosen_D},
               {"chosen_lambda", report.chosen_lambda},
               {"chosen_k", report.chosen_k},
               {"chosen_config", config_to_json(report.chosen_config)},
               {"warnings", report.warnings}};
  write_text(path, j.dump(2) + "\n");
}

void write_tuning_tsv(const std::filesystem::path& path, const TuningReport& report) {
  std::string text = "stage\tD\tlambda\tk\tobjective\tcriterion\tchosen\n";
  for (const TuningCell& c : report.stage_a) {
    const bool chosen = c.D == report.chosen_D;
    text += "A\t" + std::to_string(c.D) + '\t' + fmt(c.lambda) + '\t' + std::to_string(c.k) +
            '\t' + fmt(c.objective) + '\t' + fmt(c.bic_value) + '\t' + (chosen ? "1" : "0") +
            '\n';
  }
  for (const TuningCell& c : report.stage_b) {
    const bool chosen = c.lambda == report.chosen_lambda && c.k == report.chosen_k;
    text += "B\t" + std::to_string(c.D) + '\t' + fmt(c.lambda) + '\t' + std::to_string(c.k) +
            '\t' + fmt(c.objective) + '\t' + (c.qh ? fmt(*c.qh) : std::string("skipped")) +
            '\t' + (chosen ? "1" : "0") + '\n';
  }
  write_text(path, text);
}

Loaded<ConvertResult> convert_raw_csv(const std::filesystem::path& raw_path,
                                      const std::optional<std::filesystem::path>& raw_truth) {
  Loaded<ConvertResult> out;
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) {
    out.errors.push_back("cannot open " + raw_path.string());
    return out;
  }
  std::string line;
  if (!std::getline(in, line)) {
    out.errors.push_back(raw_path.string() + ": empty file");
    return out;
  }
  struct RawRow {
    std::string task, worker, label;
  };
  std::vector<RawRow> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      out.errors.push_back(raw_path.string() + ":" + std::to_string(line_no) +
                           ": expected three non-empty fields");
      continue;
    }
    rows.push_back({fields[0], fields[1], fields[2]});
  }
  if (!out.errors.empty()) return out;
  if (rows.empty()) {
    out.errors.push_back(raw_path.string() + ": no data rows");
    return out;
  }

  std::map<std::string, int> task_map, worker_map, label_map;
  for (const RawRow& r : rows) {
    task_map.emplace(r.task, 0);
    worker_map.emplace(r.worker, 0);
    label_map.emplace(r.label, 0);
  }

  std::vector<RawRow> truth_rows;
  if (raw_truth) {
    std::ifstream tin(*raw_truth, std::ios::binary);
    if (!tin) {
      out.errors.push_back("cannot open " + raw_truth->string());
      return out;
    }
    if (!std::getline(tin, line)) {
      out.errors.push_back(raw_truth->string() + ": empty file");
      return out;
    }
    line_no = 1;
    while (std::getline(tin, line)) {
      ++line_no;
      if (line.empty() || line == "\r") continue;
      const std::vector<std::string> fields = split_csv_line(line);
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
        out.errors.push_back(raw_truth->string() + ":" + std::to_string(line_no) +
                             ": expected 'task,label'");
        continue;
      }
      truth_rows.push_back({fields[0], "", fields[1]});
      label_map.emplace(fields[1], 0);
    }
    if (!out.errors.empty()) return out;
  }

  ConvertResult result;
  for (auto& [id, idx] : task_map) {
    idx = static_cast<int>(result.task_ids.size());
    result.task_ids.push_back(id);
  }
  for (auto& [id, idx] : worker_map) {
    idx = static_cast<int>(result.worker_ids.size());
    result.worker_ids.push_back(id);
  }
  for (auto& [id, idx] : label_map) {
    idx = static_cast<int>(result.label_ids.size());
    result.label_ids.push_back(id);
  }

  result.labels.num_tasks = static_cast<int>(result.task_ids.size());
  result.labels.num_workers = static_cast<int>(result.worker_ids.size());
  result.labels.num_categories = std::max<int>(2, static_cast<int>(result.label_ids.size()));
  for (const RawRow& r : rows) {
    result.labels.entries.push_back(
        {task_map[r.task], worker_map[r.worker], label_map[r.label]});
  }
  std::sort(result.labels.entries.begin(), result.labels.entries.end(),
            [](const LabelEntry& a, const LabelEntry& b) {
              return a.task != b.task ? a.task < b.task : a.worker < b.worker;
            });
  // Duplicate (task, worker) pairs: keep the first occurrence in sorted order.
  std::vector<LabelEntry> dedup;
  for (const LabelEntry& e : result.labels.entries) {
    if (!dedup.empty() && dedup.back().task == e.task && dedup.back().worker == e.worker) {
      continue;
    }
    dedup.push_back(e);
  }
  result.labels.entries = std::move(dedup);

  if (raw_truth) {
    result.truth_labels.assign(result.task_ids.size(), -1);
    for (const RawRow& r : truth_rows) {
      const auto it = task_map.find(r.task);
      if (it == task_map.end()) continue;  // truth for an unlabeled task: ignore
      result.truth_labels[it->second] = label_map[r.label];
    }
    for (size_t i = 0; i < result.truth_labels.size(); ++i) {
      if (result.truth_labels[i] < 0) {
        out.errors.push_back(raw_truth->string() + ": no truth label for task id '" +
                             result.task_ids[i] + "'");
      }
    }
    if (!out.errors.empty()) return out;
  }

  const ValidationReport report = validate(result.labels);
  if (!report.ok) {
    for (const std::string& p : report.problems) {
      out.errors.push_back(raw_path.string() + ": " + p);
    }
    return out;
  }
  out.value = std::move(result);
  return out;
}

void write_id_map_json(const std::filesystem::path& path, const ConvertResult& result) {
  const json j{{"task_ids", result.task_ids},
               {"worker_ids", result.worker_ids},
               {"label_ids", result.label_ids}};
  write_text(path, j.dump(2) + "\n");
}

}  // namespace crowdlf
