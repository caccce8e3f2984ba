#include "ipr/evalkit.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ipr::evalkit {

using scenegen::RelationFamily;

Verdict judge_image(const StructuredPrompt& p, const DetectionSet& d, const WorldConfig& world,
                    double tau) {
  if (!p.is_relational())
    throw std::invalid_argument("judge_image evaluates relational prompts only");
  Verdict v;
  v.count_ok = relabel::check_counts(p, d, world).matches;
  if (v.count_ok) {
    const auto& r = p.relational();
    const detector::DetectedObject* da = nullptr;
    const detector::DetectedObject* db = nullptr;
    for (const auto& obj : d.objects) {
      if (obj.category == r.subject_a && da == nullptr) da = &obj;
      if (obj.category == r.subject_b && db == nullptr) db = &obj;
    }
    const auto actual = relabel::determine_relation(*da, *db, scenegen::family_of(r.relation), tau);
    v.relation_ok = actual.has_value() && *actual == r.relation;
  }
  v.overall = v.count_ok && v.relation_ok;
  return v;
}

void finalize_fractions(AccuracyReport& r) {
  const auto frac = [](long num, long den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.overall = frac(r.overall_num, r.n_samples);
  r.left_right = frac(r.left_right_num, r.left_right_den);
  r.above_below = frac(r.above_below_num, r.above_below_den);
  r.object_number = frac(r.count_num, r.n_samples);
}

AccuracyReport spatial_accuracy(const ModelState& model,
                                const std::vector<StructuredPrompt>& prompts,
                                const WorldConfig& world, const DetectorConfig& det_cfg,
                                int samples_per_prompt, SeedLineage& lineage,
                                const std::string& split_tag, int iteration) {
  if (prompts.empty()) throw std::invalid_argument("empty prompt set");
  if (samples_per_prompt < 1) throw std::invalid_argument("samples_per_prompt must be >= 1");

  AccuracyReport report;
  report.split_tag = split_tag;
  for (int pi = 0; pi < static_cast<int>(prompts.size()); ++pi) {
    const StructuredPrompt& p = prompts[static_cast<std::size_t>(pi)];
    const bool horizontal =
        scenegen::family_of(p.relational().relation) == RelationFamily::Horizontal;
    for (int si = 0; si < samples_per_prompt; ++si) {
      const std::string stem = "eval:" + split_tag + ":" + std::to_string(iteration) + ":" +
                               std::to_string(pi) + ":" + std::to_string(si);
      Rng sample_rng = lineage.stream(stem);
      Rng detect_rng = lineage.stream(stem + ":detect");
      const auto latent = ddpm::sample_latent(model, p, sample_rng);
      auto detections = detector::detect(latent, world, det_cfg, detect_rng);
      const Verdict v = judge_image(p, detections, world);

      report.n_samples += 1;
      report.overall_num += v.overall ? 1 : 0;
      report.count_num += v.count_ok ? 1 : 0;
      if (horizontal) {
        report.left_right_den += 1;
        report.left_right_num += v.overall ? 1 : 0;
      } else {
        report.above_below_den += 1;
        report.above_below_num += v.overall ? 1 : 0;
      }
      report.details.push_back(SampleRecord{pi, si, std::move(detections), v});
    }
  }
  finalize_fractions(report);
  return report;
}

void write_detail_jsonl(const std::string& path, const AccuracyReport& report,
                        const WorldConfig& world) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const SampleRecord& rec : report.details) {
    nlohmann::json j;
    j["prompt_index"] = rec.prompt_index;
    j["sample_index"] = rec.sample_index;
    j["detections"] = detector::detections_to_json(rec.detections, world);
    j["count_ok"] = rec.verdict.count_ok;
    j["relation_ok"] = rec.verdict.relation_ok;
    j["overall"] = rec.verdict.overall;
    out << j.dump() << "\n";
  }
}

std::vector<SampleRecord> read_detail_jsonl(const std::string& path, const WorldConfig& world) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<SampleRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    SampleRecord rec;
    rec.prompt_index = j.at("prompt_index").get<int>();
    rec.sample_index = j.at("sample_index").get<int>();
    rec.detections = detector::detections_from_json(j.at("detections"), world);
    rec.verdict.count_ok = j.at("count_ok").get<bool>();
    rec.verdict.relation_ok = j.at("relation_ok").get<bool>();
    rec.verdict.overall = j.at("overall").get<bool>();
    out.push_back(std::move(rec));
  }
  return out;
}

const MetricsRow& RunView::final_row(const std::string& split) const {
  const MetricsRow* best = nullptr;
  for (const MetricsRow& row : rows)
    if (row.split == split && (best == nullptr || row.iteration > best->iteration)) best = &row;
  if (best == nullptr) throw std::runtime_error("run has no rows for split " + split);
  return *best;
}

Comparison compare_runs(const std::vector<RunView>& runs) {
  if (runs.empty()) throw std::invalid_argument("compare_runs needs at least one run");

  const nlohmann::json& ref = runs.front().compat;
  for (const RunView& run : runs) {
    std::vector<std::string> mismatched;
    for (auto it = ref.begin(); it != ref.end(); ++it)
      if (!run.compat.contains(it.key()) || run.compat.at(it.key()) != it.value())
        mismatched.push_back(it.key());
    for (auto it = run.compat.begin(); it != run.compat.end(); ++it)
      if (!ref.contains(it.key())) mismatched.push_back(it.key());
    if (!mismatched.empty()) {
      std::string msg = "incompatible run configs; mismatched fields:";
      for (const auto& f : mismatched) msg += " " + f;
      throw ConfigError(msg);
    }
  }

  Comparison c;
  for (const RunView& run : runs) {
    std::set<std::string> splits;
    for (const MetricsRow& row : run.rows) splits.insert(row.split);
    for (const std::string& split : splits)
      c.rows.push_back(Comparison::Entry{run.method, run.final_row(split)});
  }

  const auto overall_of = [&](const std::string& method) -> const MetricsRow* {
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (runs[i].method == method) return &runs[i].final_row("train");
    return nullptr;
  };
  const auto check_pair = [&](const char* lo, const char* hi, bool& pass) {
    const MetricsRow* a = overall_of(lo);
    const MetricsRow* b = overall_of(hi);
    if (a == nullptr || b == nullptr) return;
    const bool ok = a->overall <= b->overall;
    std::ostringstream note;
    note << lo << " (" << a->overall << ") " << (ok ? "<=" : ">") << " " << hi << " ("
         << b->overall << ")";
    c.ordering_notes.push_back(note.str());
    pass = pass && ok;
  };
  bool pass = true;
  check_pair("direct", "rldf", pass);
  check_pair("direct", "pr", pass);
  check_pair("pr", "pr_rldf", pass);
  check_pair("pr_rldf", "ipr_rldf", pass);
  c.ordering_pass = pass;
  return c;
}

std::string comparison_to_csv(const Comparison& c) {
  std::ostringstream out;
  out << "method,split,iteration,overall,left_right,above_below,object_number,n\n";
  for (const Comparison::Entry& e : c.rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%ld\n", e.method.c_str(),
                  e.row.split.c_str(), e.row.iteration, e.row.overall, e.row.left_right,
                  e.row.above_below, e.row.object_number, e.row.n);
    out << buf;
  }
  return out.str();
}

}  // namespace ipr::evalkit
