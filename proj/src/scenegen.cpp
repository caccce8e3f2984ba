#include "ipr/scenegen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace ipr::scenegen {
namespace {

using nlohmann::json;

const char* kVowels = "aeiou";

std::string article(const std::string& phrase) {
  if (!phrase.empty() && std::string(kVowels).find(phrase[0]) != std::string::npos) return "an";
  return "a";
}

std::string plural(const std::string& name) {
  const auto ends_with = [&](const char* suffix) {
    const std::string s(suffix);
    return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with("ch") || ends_with("sh") || ends_with("s") || ends_with("x") || ends_with("z"))
    return name + "es";
  return name + "s";
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string relation_words(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left of";
    case Relation::RightOf: return "right of";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
  }
  return {};
}

std::string noun_phrase(int category, std::optional<int> color, const WorldConfig& world) {
  std::string phrase;
  if (color) phrase = world.palette.at(static_cast<std::size_t>(*color)) + " ";
  phrase += world.vocab.name(category);
  return phrase;
}

std::string counted_phrase(const CountEntry& e, const WorldConfig& world) {
  const std::string name = world.vocab.name(e.category);
  return std::to_string(e.count) + " " + (e.count == 1 ? name : plural(name));
}

}  // namespace

CategoryVocab::CategoryVocab(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("category vocabulary must be non-empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("category names must be non-empty");
    if (!seen.insert(n).second) throw ConfigError("duplicate category name: " + n);
  }
}

CategoryVocab CategoryVocab::default_vocab() {
  return CategoryVocab({"dog", "cat", "car", "chair", "bird", "clock", "suitcase", "airplane",
                        "bench", "pizza"});
}

int CategoryVocab::index_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (names_[static_cast<std::size_t>(i)] == name) return i;
  return -1;
}

RelationFamily family_of(Relation r) {
  return (r == Relation::LeftOf || r == Relation::RightOf) ? RelationFamily::Horizontal
                                                           : RelationFamily::Vertical;
}

Relation opposite(Relation r) {
  switch (r) {
    case Relation::LeftOf: return Relation::RightOf;
    case Relation::RightOf: return Relation::LeftOf;
    case Relation::Above: return Relation::Below;
    case Relation::Below: return Relation::Above;
  }
  return r;
}

const std::vector<Relation>& all_relations() {
  static const std::vector<Relation> rels = {Relation::LeftOf, Relation::RightOf, Relation::Above,
                                             Relation::Below};
  return rels;
}

std::string relation_token(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left_of";
    case Relation::RightOf: return "right_of";
    case Relation::Above: return "above";
    case Relation::Below: return "below";
  }
  return {};
}

std::optional<Relation> relation_from_token(const std::string& token) {
  for (const Relation r : all_relations())
    if (relation_token(r) == token) return r;
  return std::nullopt;
}

int WorldConfig::color_index(const std::string& name) const {
  for (int i = 0; i < palette_size(); ++i)
    if (palette[static_cast<std::size_t>(i)] == name) return i;
  return -1;
}

void WorldConfig::validate() const {
  if (vocab.size() < 2) throw ConfigError("world.categories needs at least 2 entries");
  if (k_max < 2) throw ConfigError("world.k_max must be >= 2");
  if (color_mode) {
    if (palette.empty()) throw ConfigError("world.palette must be non-empty in color mode");
    std::set<std::string> seen(palette.begin(), palette.end());
    if (seen.size() != palette.size()) throw ConfigError("world.palette has duplicates");
  }
  if (!(p_align >= 0.0 && p_align <= 1.0)) throw ConfigError("world.p_align must lie in [0,1]");
  if (!(margin >= 0.0 && margin < 0.5)) throw ConfigError("world.margin must lie in [0,0.5)");
}

double quantize_unit(double v) { return std::round(v * 0x1.0p32) * 0x1.0p-32; }

ObjectInstance ObjectInstance::make(int category, std::optional<int> color, double cx, double cy,
                                    double w, double h) {
  if (category < 0) throw std::invalid_argument("object category must be >= 0");
  if (!(cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0))
    throw std::invalid_argument("object center must lie in the unit square");
  if (!(w > 0.0 && w <= kMaxObjectSize && h > 0.0 && h <= kMaxObjectSize))
    throw std::invalid_argument("object size must lie in (0, 0.5]");
  ObjectInstance o;
  o.category = category;
  o.color = color;
  o.cx = quantize_unit(cx);
  o.cy = quantize_unit(cy);
  o.w = std::max(quantize_unit(w), 0x1.0p-32);
  o.h = std::max(quantize_unit(h), 0x1.0p-32);
  return o;
}

Scene canonical_order(Scene s) {
  std::stable_sort(s.objects.begin(), s.objects.end(),
                   [](const ObjectInstance& a, const ObjectInstance& b) {
                     const int ca = a.color.value_or(-1);
                     const int cb = b.color.value_or(-1);
                     return std::tie(a.category, a.cx, a.cy, a.w, a.h, ca) <
                            std::tie(b.category, b.cx, b.cy, b.w, b.h, cb);
                   });
  return s;
}

int relational_capacity(const WorldConfig& world, const std::vector<Relation>& relations) {
  const int v = world.vocab.size();
  return v * (v - 1) * static_cast<int>(relations.size());
}

std::vector<StructuredPrompt> prompt_slice(std::uint64_t seed, int offset, int n,
                                           const WorldConfig& world,
                                           const std::vector<Relation>& relations) {
  if (n < 1) throw ConfigError("prompt set size must be >= 1");
  if (relations.empty()) throw ConfigError("relation set must be non-empty");
  world.validate();

  struct Triple {
    int a, b;
    Relation rel;
  };
  std::vector<Triple> triples;
  triples.reserve(static_cast<std::size_t>(relational_capacity(world, relations)));
  for (int a = 0; a < world.vocab.size(); ++a)
    for (int b = 0; b < world.vocab.size(); ++b) {
      if (a == b) continue;
      for (const Relation r : relations) triples.push_back({a, b, r});
    }

  const int capacity = static_cast<int>(triples.size());
  if (offset + n > capacity)
    throw ConfigError("requested " + std::to_string(offset + n) +
                      " distinct relational prompts but only " + std::to_string(capacity) +
                      " exist for this vocabulary and relation set");

  Rng shuffle_rng(derive_seed(seed, "promptset"));
  shuffle_rng.shuffle(triples);

  std::vector<StructuredPrompt> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = offset; i < offset + n; ++i) {
    const Triple& t = triples[static_cast<std::size_t>(i)];
    RelationalPrompt rp;
    rp.subject_a = t.a;
    rp.subject_b = t.b;
    rp.relation = t.rel;
    if (world.color_mode) {
      const std::string key = "promptset:colors:" + std::to_string(t.a) + ":" +
                              relation_token(t.rel) + ":" + std::to_string(t.b);
      Rng color_rng(derive_seed(seed, key));
      rp.color_a = color_rng.uniform_index(world.palette_size());
      rp.color_b = color_rng.uniform_index(world.palette_size());
    }
    out.push_back(StructuredPrompt{rp, 0});
  }
  return out;
}

std::vector<StructuredPrompt> generate_prompt_set(std::uint64_t seed, int n,
                                                  const WorldConfig& world,
                                                  const std::vector<Relation>& relations,
                                                  const std::string& split_tag) {
  int offset = 0;
  if (split_tag == "train")
    offset = 0;
  else if (split_tag == "unseen")
    offset = n;
  else
    throw ConfigError("unknown split tag '" + split_tag + "' (expected train or unseen)");
  return prompt_slice(seed, offset, n, world, relations);
}

std::string render_prompt(const StructuredPrompt& p, int template_id, const WorldConfig& world) {
  if (template_id < 0 || template_id >= kTemplatesPerKind)
    throw std::invalid_argument("unknown template id " + std::to_string(template_id));

  if (p.is_relational()) {
    const RelationalPrompt& r = p.relational();
    const std::string a = noun_phrase(r.subject_a, r.color_a, world);
    const std::string b = noun_phrase(r.subject_b, r.color_b, world);
    const std::string rel = relation_words(r.relation);
    switch (template_id) {
      case 0: return article(a) + " " + a + " " + rel + " " + article(b) + " " + b;
      case 1: return "positioned " + rel + " " + article(b) + " " + b + " is " + article(a) + " " + a;
      case 2: return article(b) + " " + b + " with " + article(a) + " " + a + " " + rel + " it";
    }
  }
  if (p.is_counting()) {
    std::string body;
    for (std::size_t i = 0; i < p.counting().entries.size(); ++i) {
      if (i > 0) body += " and ";
      body += counted_phrase(p.counting().entries[i], world);
    }
    switch (template_id) {
      case 0: return body;
      case 1: return "an image with " + body;
      case 2: return "exactly " + body;
    }
  }
  switch (template_id) {
    case 0: return "an empty scene";
    case 1: return "a scene with no objects";
    case 2: return "nothing at all";
  }
  return {};
}

std::string render_prompt(const StructuredPrompt& p, const WorldConfig& world) {
  return render_prompt(p, p.template_id, world);
}

namespace {

// Token-stream matching helpers for parse_prompt.
struct Cursor {
  const std::vector<std::string>* toks;
  std::size_t pos = 0;
  bool done() const { return pos >= toks->size(); }
  const std::string& peek() const { return (*toks)[pos]; }
  bool eat(const std::string& word) {
    if (done() || peek() != word) return false;
    ++pos;
    return true;
  }
  bool eat_article() { return eat("a") || eat("an"); }
};

bool parse_noun(Cursor& c, const WorldConfig& world, int& category, std::optional<int>& color) {
  if (c.done()) return false;
  color.reset();
  if (world.color_mode) {
    const int ci = world.color_index(c.peek());
    if (ci >= 0) {
      ++c.pos;
      if (c.done()) return false;
      color = ci;
    }
  }
  const int cat = world.vocab.index_of(c.peek());
  if (cat < 0) return false;
  ++c.pos;
  category = cat;
  return true;
}

bool parse_relation_words(Cursor& c, Relation& rel) {
  if (c.eat("above")) {
    rel = Relation::Above;
    return true;
  }
  if (c.eat("below")) {
    rel = Relation::Below;
    return true;
  }
  if (c.eat("left")) {
    if (!c.eat("of")) return false;
    rel = Relation::LeftOf;
    return true;
  }
  if (c.eat("right")) {
    if (!c.eat("of")) return false;
    rel = Relation::RightOf;
    return true;
  }
  return false;
}

bool parse_count_item(Cursor& c, const WorldConfig& world, CountEntry& entry) {
  if (c.done()) return false;
  const std::string& num = c.peek();
  if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) return false;
  const int count = std::stoi(num);
  if (count < 1) return false;
  ++c.pos;
  if (c.done()) return false;
  const std::string& word = c.peek();
  for (int cat = 0; cat < world.vocab.size(); ++cat) {
    const std::string& name = world.vocab.name(cat);
    if (word == (count == 1 ? name : plural(name))) {
      ++c.pos;
      entry = CountEntry{count, cat};
      return true;
    }
  }
  return false;
}

std::optional<StructuredPrompt> try_relational(const std::vector<std::string>& toks,
                                               const WorldConfig& world, int template_id) {
  Cursor c{&toks};
  RelationalPrompt r;
  switch (template_id) {
    case 0: {
      if (!c.eat_article()) return std::nullopt;
      if (!parse_noun(c, world, r.subject_a, r.color_a)) return std::nullopt;
      if (!parse_relation_words(c, r.relation)) return std::nullopt;
      if (!c.eat_article()) return std::nullopt;
      if (!parse_noun(c, world, r.subject_b, r.color_b)) return std::nullopt;
      break;
    }
    case 1: {
      if (!c.eat("positioned")) return std::nullopt;
      if (!parse_relation_words(c, r.relation)) return std::nullopt;
      if (!c.eat_article()) return std::nullopt;
      if (!parse_noun(c, world, r.subject_b, r.color_b)) return std::nullopt;
      if (!c.eat("is")) return std::nullopt;
      if (!c.eat_article()) return std::nullopt;
      if (!parse_noun(c, world, r.subject_a, r.color_a)) return std::nullopt;
      break;
    }
    case 2: {
      if (!c.eat_article()) return std::nullopt;
      if (!parse_noun(c, world, r.subject_b, r.color_b)) return std::nullopt;
      if (!c.eat("with")) return std::nullopt;
      if (!c.eat_article()) return std::nullopt;
      if (!parse_noun(c, world, r.subject_a, r.color_a)) return std::nullopt;
      if (!parse_relation_words(c, r.relation)) return std::nullopt;
      if (!c.eat("it")) return std::nullopt;
      break;
    }
    default: return std::nullopt;
  }
  if (!c.done()) return std::nullopt;
  if (r.subject_a == r.subject_b) return std::nullopt;
  return StructuredPrompt{r, template_id};
}

std::optional<StructuredPrompt> try_counting(const std::vector<std::string>& toks,
                                             const WorldConfig& world, int template_id) {
  Cursor c{&toks};
  if (template_id == 1) {
    if (!c.eat("an") || !c.eat("image") || !c.eat("with")) return std::nullopt;
  } else if (template_id == 2) {
    if (!c.eat("exactly")) return std::nullopt;
  }
  CountingPrompt counting;
  CountEntry entry;
  if (!parse_count_item(c, world, entry)) return std::nullopt;
  counting.entries.push_back(entry);
  while (!c.done()) {
    if (!c.eat("and")) return std::nullopt;
    if (!parse_count_item(c, world, entry)) return std::nullopt;
    counting.entries.push_back(entry);
  }
  return StructuredPrompt{counting, template_id};
}

}  // namespace

StructuredPrompt parse_prompt(const std::string& text, const WorldConfig& world) {
  for (int t = 0; t < kTemplatesPerKind; ++t)
    if (text == render_prompt(StructuredPrompt{EmptyScenePrompt{}, t}, world))
      return StructuredPrompt{EmptyScenePrompt{}, t};

  const std::vector<std::string> toks = tokenize(text);
  // Counting templates have disjoint prefixes; try the marked ones first so a
  // leading "an" is not mistaken for a relational article.
  for (const int t : {1, 2, 0})
    if (auto p = try_counting(toks, world, t)) return *p;
  for (const int t : {1, 2, 0})
    if (auto p = try_relational(toks, world, t)) return *p;
  throw std::invalid_argument("unparseable prompt text: " + text);
}

SceneLatent encode_scene(const Scene& s, const WorldConfig& world) {
  if (static_cast<int>(s.objects.size()) > world.k_max)
    throw std::invalid_argument("scene has more objects than k_max");
  const Scene canon = canonical_order(s);
  const int sd = world.slot_dim();
  Vec z = Vec::Zero(world.latent_dim());
  for (int slot = 0; slot < world.k_max; ++slot) {
    const int base = slot * sd;
    if (slot < static_cast<int>(canon.objects.size())) {
      const ObjectInstance& o = canon.objects[static_cast<std::size_t>(slot)];
      if (o.category >= world.vocab.size())
        throw std::invalid_argument("object category outside vocabulary");
      z[base] = 1.0;
      int off = base + 1;
      for (int c = 0; c < world.vocab.size(); ++c) z[off + c] = (c == o.category) ? 1.0 : -1.0;
      off += world.vocab.size();
      if (world.color_mode) {
        if (!o.color) throw std::invalid_argument("color mode requires object colors");
        for (int c = 0; c < world.palette_size(); ++c) z[off + c] = (c == *o.color) ? 1.0 : -1.0;
        off += world.palette_size();
      }
      z[off + 0] = 2.0 * o.cx - 1.0;
      z[off + 1] = 2.0 * o.cy - 1.0;
      z[off + 2] = 2.0 * o.w - 1.0;
      z[off + 3] = 2.0 * o.h - 1.0;
    } else {
      z[base] = -1.0;
      for (int c = 0; c < world.vocab.size(); ++c) z[base + 1 + c] = -1.0;
      if (world.color_mode)
        for (int c = 0; c < world.palette_size(); ++c) z[base + 1 + world.vocab.size() + c] = -1.0;
      // geometry of empty slots stays 0
    }
  }
  return SceneLatent{std::move(z)};
}

Scene decode_latent(const SceneLatent& z, const WorldConfig& world, double presence_threshold) {
  if (z.values.size() != world.latent_dim())
    throw std::invalid_argument("latent has dimension " + std::to_string(z.values.size()) +
                                ", expected " + std::to_string(world.latent_dim()));
  if (!(presence_threshold > -1.0 && presence_threshold < 1.0))
    throw std::invalid_argument("presence threshold must lie in (-1, 1)");
  const int sd = world.slot_dim();
  Scene s;
  for (int slot = 0; slot < world.k_max; ++slot) {
    const int base = slot * sd;
    if (!(z.values[base] > presence_threshold)) continue;
    int off = base + 1;
    int category = 0;
    for (int c = 1; c < world.vocab.size(); ++c)
      if (z.values[off + c] > z.values[off + category]) category = c;
    off += world.vocab.size();
    std::optional<int> color;
    if (world.color_mode) {
      int best = 0;
      for (int c = 1; c < world.palette_size(); ++c)
        if (z.values[off + c] > z.values[off + best]) best = c;
      color = best;
      off += world.palette_size();
    }
    const auto unmap = [](double v) { return (v + 1.0) / 2.0; };
    const double cx = std::clamp(unmap(z.values[off + 0]), 0.0, 1.0);
    const double cy = std::clamp(unmap(z.values[off + 1]), 0.0, 1.0);
    const double w = std::clamp(unmap(z.values[off + 2]), kMinObjectSize, kMaxObjectSize);
    const double h = std::clamp(unmap(z.values[off + 3]), kMinObjectSize, kMaxObjectSize);
    s.objects.push_back(ObjectInstance::make(category, color, cx, cy, w, h));
  }
  return s;
}

std::pair<Scene, StructuredPrompt> synth_pretraining_example(const StructuredPrompt& p, Rng& rng,
                                                             const WorldConfig& world) {
  if (!p.is_relational())
    throw std::invalid_argument("pretraining scenes are synthesized from relational prompts only");
  const RelationalPrompt& rp = p.relational();

  const double u = rng.uniform();
  const Relation chosen =
      (u < world.p_align) ? rp.relation : all_relations()[static_cast<std::size_t>(rng.uniform_index(4))];

  const double wa = rng.uniform_range(0.05, 0.3);
  const double ha = rng.uniform_range(0.05, 0.3);
  const double wb = rng.uniform_range(0.05, 0.3);
  const double hb = rng.uniform_range(0.05, 0.3);

  double u1 = 0.0, u2 = 0.0;
  do {
    u1 = rng.uniform();
    u2 = rng.uniform();
  } while (std::abs(u1 - u2) < world.margin);
  const double lo = std::min(u1, u2);
  const double hi = std::max(u1, u2);
  const double off_a = rng.uniform();
  const double off_b = rng.uniform();

  double ax = 0.0, ay = 0.0, bx = 0.0, by = 0.0;
  switch (chosen) {
    case Relation::LeftOf: ax = lo, bx = hi, ay = off_a, by = off_b; break;
    case Relation::RightOf: ax = hi, bx = lo, ay = off_a, by = off_b; break;
    case Relation::Above: ay = hi, by = lo, ax = off_a, bx = off_b; break;  // cy grows upward
    case Relation::Below: ay = lo, by = hi, ax = off_a, bx = off_b; break;
  }

  Scene s;
  s.objects.push_back(ObjectInstance::make(rp.subject_a, rp.color_a, ax, ay, wa, ha));
  s.objects.push_back(ObjectInstance::make(rp.subject_b, rp.color_b, bx, by, wb, hb));
  return {std::move(s), p};
}

nlohmann::json prompt_to_json(const StructuredPrompt& p, const WorldConfig& world,
                              const std::string& split_tag) {
  json j;
  if (p.is_relational()) {
    const RelationalPrompt& r = p.relational();
    j["kind"] = "relational";
    j["subject_a"] = world.vocab.name(r.subject_a);
    j["subject_b"] = world.vocab.name(r.subject_b);
    j["relation"] = relation_token(r.relation);
    if (r.color_a) j["color_a"] = world.palette.at(static_cast<std::size_t>(*r.color_a));
    if (r.color_b) j["color_b"] = world.palette.at(static_cast<std::size_t>(*r.color_b));
  } else if (p.is_counting()) {
    j["kind"] = "counting";
    json counts = json::array();
    for (const CountEntry& e : p.counting().entries)
      counts.push_back({{"count", e.count}, {"category", world.vocab.name(e.category)}});
    j["counts"] = std::move(counts);
  } else {
    j["kind"] = "empty";
  }
  j["template_id"] = p.template_id;
  j["split_tag"] = split_tag;
  j["surface_text"] = render_prompt(p, world);
  return j;
}

StructuredPrompt prompt_from_json(const nlohmann::json& j, const WorldConfig& world) {
  const std::string kind = j.at("kind").get<std::string>();
  const int template_id = j.at("template_id").get<int>();
  if (kind == "relational") {
    RelationalPrompt r;
    r.subject_a = world.vocab.index_of(j.at("subject_a").get<std::string>());
    r.subject_b = world.vocab.index_of(j.at("subject_b").get<std::string>());
    if (r.subject_a < 0 || r.subject_b < 0) throw ConfigError("prompt category not in vocabulary");
    const auto rel = relation_from_token(j.at("relation").get<std::string>());
    if (!rel) throw ConfigError("unknown relation token in prompt record");
    r.relation = *rel;
    if (j.contains("color_a")) r.color_a = world.color_index(j.at("color_a").get<std::string>());
    if (j.contains("color_b")) r.color_b = world.color_index(j.at("color_b").get<std::string>());
    return StructuredPrompt{r, template_id};
  }
  if (kind == "counting") {
    CountingPrompt c;
    for (const auto& item : j.at("counts")) {
      const int cat = world.vocab.index_of(item.at("category").get<std::string>());
      if (cat < 0) throw ConfigError("prompt category not in vocabulary");
      c.entries.push_back(CountEntry{item.at("count").get<int>(), cat});
    }
    return StructuredPrompt{c, template_id};
  }
  if (kind == "empty") return StructuredPrompt{EmptyScenePrompt{}, template_id};
  throw ConfigError("unknown prompt kind: " + kind);
}

}  // namespace ipr::scenegen
