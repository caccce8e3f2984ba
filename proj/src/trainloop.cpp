#include "ipr/trainloop.hpp"

#include "ipr/checkpoint.hpp"
#include "ipr/detector.hpp"
#include "ipr/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace ipr::trainloop {
namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Pretraining minibatch size is part of the pinned base recipe, independent
// of the fine-tuning batch size.
constexpr int kPretrainBatchSize = 8;

std::vector<StructuredPrompt> with_template(std::vector<StructuredPrompt> prompts,
                                            int template_id) {
  for (auto& p : prompts) p.template_id = template_id;
  return prompts;
}

double run_epochs(ModelState& model, std::span<const TrainingExample> examples, int epochs,
                  int batch_size, Rng& rng, std::vector<double>* epoch_losses = nullptr) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainingExample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));

  double last_epoch_mean = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double acc = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      const ddpm::LossGrads lg = ddpm::weighted_batch_loss(model, batch, rng);
      if (!std::isfinite(lg.loss))
        throw DivergenceError("training loss became non-finite (epoch " + std::to_string(epoch) +
                              ")");
      tensornet::adam_step(model.opt, model.denoiser.params, lg.grads);
      acc += lg.loss;
      ++batches;
    }
    last_epoch_mean = acc / batches;
    if (epoch_losses != nullptr) epoch_losses->push_back(last_epoch_mean);
    if (std::getenv("IPR_TRACE") != nullptr)
      std::fprintf(stderr, "epoch %d loss %.4f\n", epoch, last_epoch_mean);
  }
  return last_epoch_mean;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ModelState init_untrained(const ExperimentConfig& cfg, SeedLineage& lineage) {
  cfg.validate();
  Rng rng = lineage.stream("model:init");
  const auto embed = ddpm::EmbedConfig::from_world(cfg.world);
  const auto schedule = ddpm::make_schedule(cfg.model.t_d, cfg.model.beta_start, cfg.model.beta_end);
  return ddpm::init_model(embed, schedule, cfg.model.hidden, cfg.model.activation,
                          cfg.train.pretrain_lr, rng);
}

ModelState pretrain_base(const ExperimentConfig& cfg, SeedLineage& lineage) {
  ModelState model = init_untrained(cfg, lineage);

  Rng data_rng = lineage.stream("pretrain:data");
  std::vector<StructuredPrompt> prompts;
  {
    const int v = cfg.world.vocab.size();
    for (int a = 0; a < v; ++a)
      for (int b = 0; b < v; ++b) {
        if (a == b) continue;
        for (const auto rel : scenegen::all_relations()) {
          scenegen::RelationalPrompt rp;
          rp.subject_a = a;
          rp.subject_b = b;
          rp.relation = rel;
          if (cfg.world.color_mode) {
            rp.color_a = data_rng.uniform_index(cfg.world.palette_size());
            rp.color_b = data_rng.uniform_index(cfg.world.palette_size());
          }
          prompts.push_back(StructuredPrompt{rp, 0});
        }
      }
    data_rng.shuffle(prompts);
  }

  std::vector<TrainingExample> examples;
  examples.reserve(static_cast<std::size_t>(cfg.train.pretrain_examples));
  for (int i = 0; i < cfg.train.pretrain_examples; ++i) {
    const StructuredPrompt& p = prompts[static_cast<std::size_t>(i) % prompts.size()];
    const auto [scene, prompt] = scenegen::synth_pretraining_example(p, data_rng, cfg.world);
    examples.push_back(
        TrainingExample{scenegen::encode_scene(scene, cfg.world), prompt, 1.0, 0});
  }

  Rng train_rng = lineage.stream("pretrain:train");
  run_epochs(model, examples, cfg.train.pretrain_epochs, kPretrainBatchSize, train_rng);
  return model;
}

IterationDataset build_iteration_dataset(const ModelState& model,
                                         const std::vector<StructuredPrompt>& prompts,
                                         Method method, const ExperimentConfig& cfg,
                                         SeedLineage& lineage, int iteration) {
  if (method == Method::Direct)
    throw std::invalid_argument("direct runs never build a training dataset");
  if (prompts.empty()) throw std::invalid_argument("prompt pool is empty");

  IterationDataset ds;
  ds.examples.reserve(static_cast<std::size_t>(cfg.train.samples_per_iter));
  const std::string iter_tag = "iter:" + std::to_string(iteration);

  for (int j = 0; j < cfg.train.samples_per_iter; ++j) {
    const StructuredPrompt& p = prompts[static_cast<std::size_t>(j) % prompts.size()];
    Rng sample_rng = lineage.stream(iter_tag + ":sample:" + std::to_string(j));
    const auto latent = ddpm::sample_latent(model, p, sample_rng);
    Rng detect_rng = lineage.stream(iter_tag + ":detect:" + std::to_string(j));
    const auto detections = detector::detect(latent, cfg.world, cfg.detector, detect_rng);
    const auto outcome = relabel::relabel(p, detections, cfg.relabel, cfg.world);

    switch (outcome.kind) {
      case relabel::OutcomeKind::Matched: ds.prov.matched += 1; break;
      case relabel::OutcomeKind::RelationFix: ds.prov.relation_fix += 1; break;
      case relabel::OutcomeKind::CountFix: ds.prov.count_fix += 1; break;
      case relabel::OutcomeKind::ColorFix: ds.prov.color_fix += 1; break;
      case relabel::OutcomeKind::Empty: ds.prov.empty += 1; break;
    }

    TrainingExample ex;
    ex.latent = latent;
    ex.iteration_tag = iteration;
    switch (method) {
      case Method::PR:
        ex.prompt = outcome.new_prompt;
        ex.weight = 1.0;
        break;
      case Method::RLDF:
        ex.prompt = p;
        ex.weight = outcome.matched ? 1.0 : cfg.relabel.lambda_relabel;
        break;
      default:
        ex.prompt = outcome.new_prompt;
        ex.weight = outcome.weight;
        break;
    }
    ds.examples.push_back(std::move(ex));

    nlohmann::json rec = relabel::outcome_to_json(p, detections, outcome, cfg.world);
    rec["iteration"] = iteration;
    rec["sample"] = j;
    ds.relabel_log.push_back(std::move(rec));
  }
  return ds;
}

double train_iteration(ModelState& model, std::span<const TrainingExample> examples,
                       const ExperimentConfig& cfg, SeedLineage& lineage, int iteration,
                       std::vector<double>* epoch_losses) {
  if (examples.empty()) throw std::invalid_argument("training dataset is empty");
  Rng rng = lineage.stream("iter:" + std::to_string(iteration) + ":train");
  return run_epochs(model, examples, cfg.train.epochs_per_iter, cfg.train.batch_size, rng,
                    epoch_losses);
}

GrowthDecision overfit_guard(const std::vector<IterationMetrics>& history) {
  if (history.size() < 2)
    throw std::invalid_argument("overfit_guard needs at least 2 iterations of history");
  const IterationMetrics& prev = history[history.size() - 2];
  const IterationMetrics& last = history[history.size() - 1];
  GrowthDecision d;
  d.overfit = last.train_loss < prev.train_loss &&
              last.unseen_eval.overall < prev.unseen_eval.overall - 0.02;
  return d;
}

RunResult run_method(const ModelState& base, const ExperimentConfig& cfg, Method method,
                     SeedLineage& lineage) {
  cfg.validate();
  RunResult result;
  result.cfg = cfg;
  result.cfg.train.method = method;
  result.method = method;

  const auto& relations = scenegen::all_relations();
  const int n = cfg.eval.n_prompts;
  const auto eval_train = scenegen::prompt_slice(cfg.train.seed, 0, n, cfg.world, relations);
  const auto eval_unseen = scenegen::prompt_slice(cfg.train.seed, n, n, cfg.world, relations);

  if (method == Method::Direct) {
    IterationMetrics m;
    m.iteration = 0;
    m.train_eval = evalkit::spatial_accuracy(base, eval_train, cfg.world, cfg.detector,
                                             cfg.eval.samples_per_prompt, lineage, "train", 0);
    m.unseen_eval = evalkit::spatial_accuracy(base, eval_unseen, cfg.world, cfg.detector,
                                              cfg.eval.samples_per_prompt, lineage, "unseen", 0);
    m.train_loss = kNaN;
    m.matched_frac = kNaN;
    result.iterations.push_back(std::move(m));
    result.final_state = base;
    result.lineage_labels = lineage.labels();
    return result;
  }

  ModelState model = base;
  const int total_iters = method == Method::IPR_RLDF ? cfg.train.iterations : 1;
  std::vector<StructuredPrompt> pool = with_template(eval_train, cfg.eval.template_id);
  std::vector<TrainingExample> accumulated;
  int growth_batches = 0;
  bool pending_growth = false;

  for (int k = 1; k <= total_iters; ++k) {
    int growth_added = 0;
    if (pending_growth) {
      const int offset = 2 * n + growth_batches * cfg.train.growth_step;
      auto fresh = scenegen::prompt_slice(cfg.train.seed, offset, cfg.train.growth_step, cfg.world,
                                          relations);
      for (auto& p : with_template(std::move(fresh), cfg.eval.template_id))
        pool.push_back(std::move(p));
      ++growth_batches;
      growth_added = cfg.train.growth_step;
      pending_growth = false;
    }

    IterationDataset ds = build_iteration_dataset(model, pool, method, cfg, lineage, k);
    for (auto& rec : ds.relabel_log) result.relabel_log.push_back(std::move(rec));

    std::span<const TrainingExample> train_span(ds.examples);
    if (cfg.train.accumulate_datasets) {
      for (const auto& ex : ds.examples) accumulated.push_back(ex);
      train_span = std::span<const TrainingExample>(accumulated);
    }

    // Fresh optimizer per training phase; each iteration is its own Train()
    // call with the fine-tuning learning rate.
    tensornet::AdamConfig adam;
    adam.lr = cfg.train.learning_rate;
    model.opt = tensornet::AdamState::init(model.denoiser.params, adam);

    IterationMetrics m;
    m.iteration = k;
    m.prov = ds.prov;
    m.matched_frac = static_cast<double>(ds.prov.matched) / static_cast<double>(ds.prov.total());
    m.train_loss = train_iteration(model, train_span, cfg, lineage, k);
    m.train_eval = evalkit::spatial_accuracy(model, eval_train, cfg.world, cfg.detector,
                                             cfg.eval.samples_per_prompt, lineage, "train", k);
    m.unseen_eval = evalkit::spatial_accuracy(model, eval_unseen, cfg.world, cfg.detector,
                                              cfg.eval.samples_per_prompt, lineage, "unseen", k);
    result.iterations.push_back(std::move(m));

    if (result.iterations.size() >= 2) {
      const GrowthDecision d = overfit_guard(result.iterations);
      if (d.overfit) {
        result.iterations.back().overfit_flagged = true;
        pending_growth = true;
      }
    }
    result.iterations.back().growth_added = growth_added;
    result.iteration_states.push_back(model);
  }

  result.final_state = std::move(model);
  result.lineage_labels = lineage.labels();
  return result;
}

std::string metrics_csv(const RunResult& result) {
  std::ostringstream out;
  out << "iteration,split,overall_acc,leftright_acc,abovebelow_acc,count_acc,train_loss,"
         "matched_frac\n";
  for (const IterationMetrics& m : result.iterations) {
    for (const auto* report : {&m.train_eval, &m.unseen_eval}) {
      out << m.iteration << "," << report->split_tag << "," << fmt_g(report->overall) << ","
          << fmt_g(report->left_right) << "," << fmt_g(report->above_below) << ","
          << fmt_g(report->object_number) << "," << fmt_g(m.train_loss) << ","
          << fmt_g(m.matched_frac) << "\n";
    }
  }
  return out.str();
}

void persist_run(const std::string& dir, const RunResult& result) {
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "config.json", std::ios::binary);
    out << config::config_to_json(result.cfg).dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "metrics.csv", std::ios::binary);
    out << metrics_csv(result);
  }
  {
    std::ofstream out(fs::path(dir) / "relabel_log.jsonl", std::ios::binary);
    for (const auto& rec : result.relabel_log) out << rec.dump() << "\n";
  }
  {
    nlohmann::json lineage;
    lineage["master_seed"] = result.cfg.train.seed;
    lineage["labels"] = result.lineage_labels;
    std::ofstream out(fs::path(dir) / "lineage.json", std::ios::binary);
    out << lineage.dump(2) << "\n";
  }
  for (const IterationMetrics& m : result.iterations) {
    const std::string train_path =
        (fs::path(dir) / ("eval_detail_train_iter" + std::to_string(m.iteration) + ".jsonl"))
            .string();
    const std::string unseen_path =
        (fs::path(dir) / ("eval_detail_unseen_iter" + std::to_string(m.iteration) + ".jsonl"))
            .string();
    evalkit::write_detail_jsonl(train_path, m.train_eval, result.cfg.world);
    evalkit::write_detail_jsonl(unseen_path, m.unseen_eval, result.cfg.world);
  }

  for (std::size_t i = 0; i < result.iteration_states.size(); ++i) {
    const int iter = result.iterations[i].iteration;
    const std::string stem = "model_iter" + std::to_string(iter);
    checkpoint::save_model((fs::path(dir) / (stem + ".bin")).string(),
                           (fs::path(dir) / (stem + ".manifest.json")).string(),
                           result.iteration_states[i], result.cfg.train.seed,
                           "iter:" + std::to_string(iter));
  }

  const std::string final_label = result.iterations.empty() || result.method == Method::Direct
                                      ? "pretrain"
                                      : "iter:" + std::to_string(result.iterations.back().iteration);
  checkpoint::save_model((fs::path(dir) / "model_final.bin").string(),
                         (fs::path(dir) / "model_final.manifest.json").string(),
                         result.final_state, result.cfg.train.seed, final_label);
}

evalkit::RunView view_of(const RunResult& result) {
  evalkit::RunView view;
  view.method = config::method_token(result.method);
  view.master_seed = result.cfg.train.seed;
  view.compat = config::compat_json(result.cfg);
  for (const IterationMetrics& m : result.iterations) {
    for (const auto* report : {&m.train_eval, &m.unseen_eval}) {
      evalkit::MetricsRow row;
      row.iteration = m.iteration;
      row.split = report->split_tag;
      row.overall = report->overall;
      row.left_right = report->left_right;
      row.above_below = report->above_below;
      row.object_number = report->object_number;
      row.train_loss = m.train_loss;
      row.matched_frac = m.matched_frac;
      row.n = report->n_samples;
      view.rows.push_back(std::move(row));
    }
  }
  return view;
}

evalkit::RunView load_run_view(const std::string& dir) {
  std::ifstream cfg_in(fs::path(dir) / "config.json", std::ios::binary);
  if (!cfg_in) throw std::runtime_error("no config.json under " + dir);
  nlohmann::json cfg_json;
  cfg_in >> cfg_json;

  // The echo stores canonical strings per key; rebuild the config through the
  // normal parser so validation and defaults apply uniformly.
  std::ostringstream text;
  for (const auto& [section, keys] : cfg_json.items()) {
    text << "[" << section << "]\n";
    for (const auto& [key, value] : keys.items()) text << key << " = " << value.get<std::string>() << "\n";
  }
  const config::ExperimentConfig cfg = config::parse_config_text(text.str());

  evalkit::RunView view;
  view.method = config::method_token(cfg.train.method);
  view.master_seed = cfg.train.seed;
  view.compat = config::compat_json(cfg);

  std::ifstream in(fs::path(dir) / "metrics.csv", std::ios::binary);
  if (!in) throw std::runtime_error("no metrics.csv under " + dir);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    evalkit::MetricsRow r;
    std::getline(row, field, ',');
    r.iteration = std::stoi(field);
    std::getline(row, r.split, ',');
    std::getline(row, field, ',');
    r.overall = std::stod(field);
    std::getline(row, field, ',');
    r.left_right = std::stod(field);
    std::getline(row, field, ',');
    r.above_below = std::stod(field);
    std::getline(row, field, ',');
    r.object_number = std::stod(field);
    std::getline(row, field, ',');
    r.train_loss = std::stod(field);
    std::getline(row, field, ',');
    r.matched_frac = std::stod(field);
    r.n = static_cast<long>(cfg.eval.n_prompts) * cfg.eval.samples_per_prompt;
    view.rows.push_back(std::move(r));
  }
  return view;
}

}  // namespace ipr::trainloop
