#include "ipr/config.hpp"

#include "ipr/ddpm.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ipr::config {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ",";
    out += items[i];
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError(key + ": expected an unsigned integer, got '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string fmt_double(double v) {
  // Shortest decimal form that parses back exactly.
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& item : split_list(value)) out.push_back(static_cast<int>(parse_int(key, item)));
  return out;
}

struct KeyEntry {
  std::string section;
  std::string key;
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> apply;
  std::function<std::string(const ExperimentConfig&)> render;
};

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = {
      {"world", "categories", "object category names (comma-separated, unique)",
       [](ExperimentConfig& c, const std::string& v) {
         c.world.vocab = scenegen::CategoryVocab(split_list(v));
       },
       [](const ExperimentConfig& c) { return join_list(c.world.vocab.names()); }},
      {"world", "k_max", "maximum objects per scene (latent slots)",
       [](ExperimentConfig& c, const std::string& v) {
         c.world.k_max = static_cast<int>(parse_int("world.k_max", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.world.k_max); }},
      {"world", "color_mode", "enable color attributes on objects and prompts",
       [](ExperimentConfig& c, const std::string& v) {
         c.world.color_mode = parse_bool("world.color_mode", v);
       },
       [](const ExperimentConfig& c) { return c.world.color_mode ? "true" : "false"; }},
      {"world", "palette", "color names (comma-separated), used in color mode",
       [](ExperimentConfig& c, const std::string& v) { c.world.palette = split_list(v); },
       [](const ExperimentConfig& c) { return join_list(c.world.palette); }},
      {"world", "p_align", "probability a pretraining scene honors the prompted relation",
       [](ExperimentConfig& c, const std::string& v) {
         c.world.p_align = parse_double("world.p_align", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.world.p_align); }},
      {"world", "margin", "minimum center separation along a relation axis",
       [](ExperimentConfig& c, const std::string& v) {
         c.world.margin = parse_double("world.margin", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.world.margin); }},

      {"model", "hidden", "denoiser hidden layer widths (comma-separated)",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.hidden = parse_int_list("model.hidden", v);
       },
       [](const ExperimentConfig& c) { return fmt_int_list(c.model.hidden); }},
      {"model", "activation", "hidden activation: tanh or identity",
       [](ExperimentConfig& c, const std::string& v) { c.model.activation = v; },
       [](const ExperimentConfig& c) { return c.model.activation; }},
      {"model", "t_d", "diffusion step count",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.t_d = static_cast<int>(parse_int("model.t_d", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.model.t_d); }},
      {"model", "beta_start", "first noise-schedule beta",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.beta_start = parse_double("model.beta_start", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.model.beta_start); }},
      {"model", "beta_end", "last noise-schedule beta",
       [](ExperimentConfig& c, const std::string& v) {
         c.model.beta_end = parse_double("model.beta_end", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.model.beta_end); }},

      {"detector", "score_threshold", "minimum confidence for a detection (paper settings: 0.45, 0.60)",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.score_threshold = parse_double("detector.score_threshold", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.detector.score_threshold); }},
      {"detector", "flip_prob", "probability a detection's category is misread",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.flip_prob = parse_double("detector.flip_prob", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.detector.flip_prob); }},
      {"detector", "drop_prob", "probability a detection is missed",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.drop_prob = parse_double("detector.drop_prob", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.detector.drop_prob); }},
      {"detector", "jitter_sigma", "stddev of Gaussian center jitter",
       [](ExperimentConfig& c, const std::string& v) {
         c.detector.jitter_sigma = parse_double("detector.jitter_sigma", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.detector.jitter_sigma); }},

      {"relabel", "lambda_relabel", "loss weight for relabeled pairs (paper ablation: 0.1, 0.5, 0.7)",
       [](ExperimentConfig& c, const std::string& v) {
         c.relabel.lambda_relabel = parse_double("relabel.lambda_relabel", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.relabel.lambda_relabel); }},
      {"relabel", "tau", "center-difference margin below which a relation is ambiguous",
       [](ExperimentConfig& c, const std::string& v) {
         c.relabel.tau = parse_double("relabel.tau", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.relabel.tau); }},

      {"train", "method", "direct | pr | rldf | pr_rldf | ipr_rldf",
       [](ExperimentConfig& c, const std::string& v) { c.train.method = parse_method(v); },
       [](const ExperimentConfig& c) { return method_token(c.train.method); }},
      {"train", "iterations", "self-training iterations (ipr_rldf; others run one)",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.iterations = static_cast<int>(parse_int("train.iterations", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.iterations); }},
      {"train", "samples_per_iter", "self-generated examples per iteration",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.samples_per_iter = static_cast<int>(parse_int("train.samples_per_iter", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.samples_per_iter); }},
      {"train", "epochs_per_iter", "training epochs per iteration",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.epochs_per_iter = static_cast<int>(parse_int("train.epochs_per_iter", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.epochs_per_iter); }},
      {"train", "batch_size", "minibatch size",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.batch_size = static_cast<int>(parse_int("train.batch_size", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.batch_size); }},
      {"train", "learning_rate", "fine-tuning Adam learning rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.learning_rate = parse_double("train.learning_rate", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.learning_rate); }},
      {"train", "pretrain_epochs", "base-model pretraining epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.pretrain_epochs = static_cast<int>(parse_int("train.pretrain_epochs", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.pretrain_epochs); }},
      {"train", "pretrain_examples", "base-model pretraining dataset size",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.pretrain_examples = static_cast<int>(parse_int("train.pretrain_examples", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.pretrain_examples); }},
      {"train", "pretrain_lr", "base-model pretraining learning rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.pretrain_lr = parse_double("train.pretrain_lr", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.train.pretrain_lr); }},
      {"train", "growth_step", "prompts added to the pool when overfitting is flagged",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.growth_step = static_cast<int>(parse_int("train.growth_step", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.train.growth_step); }},
      {"train", "accumulate_datasets", "keep earlier iterations' examples in later datasets",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.accumulate_datasets = parse_bool("train.accumulate_datasets", v);
       },
       [](const ExperimentConfig& c) { return c.train.accumulate_datasets ? "true" : "false"; }},
      {"train", "seed", "master seed; every random stream derives from it",
       [](ExperimentConfig& c, const std::string& v) { c.train.seed = parse_u64("train.seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.train.seed); }},

      {"eval", "n_prompts", "prompts per split (train and unseen)",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval.n_prompts = static_cast<int>(parse_int("eval.n_prompts", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.eval.n_prompts); }},
      {"eval", "samples_per_prompt", "generated samples per prompt during evaluation",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval.samples_per_prompt = static_cast<int>(parse_int("eval.samples_per_prompt", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.eval.samples_per_prompt); }},
      {"eval", "template_id", "surface template applied to generated prompt sets",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval.template_id = static_cast<int>(parse_int("eval.template_id", v));
       },
       [](const ExperimentConfig& c) { return std::to_string(c.eval.template_id); }},
  };
  return table;
}

const std::vector<std::string>& section_order() {
  static const std::vector<std::string> order = {"world",   "model", "detector",
                                                 "relabel", "train", "eval"};
  return order;
}

}  // namespace

std::string method_token(Method m) {
  switch (m) {
    case Method::Direct: return "direct";
    case Method::PR: return "pr";
    case Method::RLDF: return "rldf";
    case Method::PR_RLDF: return "pr_rldf";
    case Method::IPR_RLDF: return "ipr_rldf";
  }
  return {};
}

Method parse_method(const std::string& token) {
  for (const Method m :
       {Method::Direct, Method::PR, Method::RLDF, Method::PR_RLDF, Method::IPR_RLDF})
    if (method_token(m) == token) return m;
  throw ConfigError("unknown method '" + token + "' (expected direct|pr|rldf|pr_rldf|ipr_rldf)");
}

void ExperimentConfig::validate() const {
  world.validate();
  if (model.hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
  for (const int h : model.hidden)
    if (h < 1) throw ConfigError("model.hidden widths must be >= 1");
  if (model.activation != "tanh" && model.activation != "identity")
    throw ConfigError("model.activation must be tanh or identity");
  // Constructs the schedule to check both the beta preconditions and the
  // signal-destruction requirement for trained schedules.
  const auto schedule = ddpm::make_schedule(model.t_d, model.beta_start, model.beta_end);
  if (!(schedule.alpha_bar[schedule.t_d - 1] < 0.05))
    throw ConfigError("noise schedule too weak: alpha_bar at the final step must be < 0.05");
  detector.validate();
  relabel.validate();
  if (train.iterations < 1) throw ConfigError("train.iterations must be >= 1");
  if (train.samples_per_iter < 1) throw ConfigError("train.samples_per_iter must be >= 1");
  if (train.epochs_per_iter < 1) throw ConfigError("train.epochs_per_iter must be >= 1");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (train.pretrain_epochs < 1) throw ConfigError("train.pretrain_epochs must be >= 1");
  if (train.pretrain_examples < 1) throw ConfigError("train.pretrain_examples must be >= 1");
  if (!(train.pretrain_lr > 0.0)) throw ConfigError("train.pretrain_lr must be > 0");
  if (train.growth_step < 1) throw ConfigError("train.growth_step must be >= 1");
  if (eval.n_prompts < 1) throw ConfigError("eval.n_prompts must be >= 1");
  if (eval.samples_per_prompt < 1) throw ConfigError("eval.samples_per_prompt must be >= 1");
  if (eval.template_id < 0 || eval.template_id >= scenegen::kTemplatesPerKind)
    throw ConfigError("eval.template_id must lie in [0, " +
                      std::to_string(scenegen::kTemplatesPerKind) + ")");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& s : section_order()) known = known || s == section;
      if (!known) throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                    section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any [section]");
    bool applied = false;
    for (const auto& entry : key_table()) {
      if (entry.section == section && entry.key == key) {
        entry.apply(cfg, value);
        applied = true;
        break;
      }
    }
    if (!applied)
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key " + section + "." + key);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const auto& section : section_order()) {
    out << "[" << section << "]\n";
    for (const auto& entry : key_table())
      if (entry.section == section) out << entry.key << " = " << entry.render(cfg) << "\n";
    out << "\n";
  }
  return out.str();
}

std::vector<ConfigKeyDoc> config_key_docs() {
  static const ExperimentConfig defaults;
  std::vector<ConfigKeyDoc> docs;
  for (const auto& entry : key_table())
    docs.push_back(ConfigKeyDoc{entry.section, entry.key, entry.render(defaults), entry.doc});
  return docs;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  for (const auto& entry : key_table()) j[entry.section][entry.key] = entry.render(cfg);
  return j;
}

nlohmann::json compat_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["categories"] = join_list(cfg.world.vocab.names());
  j["k_max"] = cfg.world.k_max;
  j["color_mode"] = cfg.world.color_mode;
  j["seed"] = cfg.train.seed;
  j["n_prompts"] = cfg.eval.n_prompts;
  j["samples_per_prompt"] = cfg.eval.samples_per_prompt;
  j["score_threshold"] = cfg.detector.score_threshold;
  j["flip_prob"] = cfg.detector.flip_prob;
  j["drop_prob"] = cfg.detector.drop_prob;
  j["jitter_sigma"] = cfg.detector.jitter_sigma;
  return j;
}

}  // namespace ipr::config
