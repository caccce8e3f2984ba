#pragma once

#include "ipr/rng.hpp"
#include "ipr/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ipr::scenegen {

/// Ordered, immutable label set; indices are stable identifiers.
class CategoryVocab {
 public:
  explicit CategoryVocab(std::vector<std::string> names);
  static CategoryVocab default_vocab();

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& names() const { return names_; }
  /// -1 when absent.
  int index_of(const std::string& name) const;

  bool operator==(const CategoryVocab&) const = default;

 private:
  std::vector<std::string> names_;
};

enum class Relation { LeftOf, RightOf, Above, Below };
enum class RelationFamily { Horizontal, Vertical };

RelationFamily family_of(Relation r);
Relation opposite(Relation r);
const std::vector<Relation>& all_relations();
std::string relation_token(Relation r);
std::optional<Relation> relation_from_token(const std::string& token);

/// Colors are indices into the world's palette; objects and prompt subjects
/// carry std::nullopt when color mode is off.

struct RelationalPrompt {
  int subject_a = 0;
  std::optional<int> color_a;
  Relation relation = Relation::LeftOf;
  int subject_b = 0;
  std::optional<int> color_b;
  bool operator==(const RelationalPrompt&) const = default;
};

struct CountEntry {
  int count = 1;
  int category = 0;
  bool operator==(const CountEntry&) const = default;
};

struct CountingPrompt {
  std::vector<CountEntry> entries;
  bool operator==(const CountingPrompt&) const = default;
};

struct EmptyScenePrompt {
  bool operator==(const EmptyScenePrompt&) const = default;
};

struct StructuredPrompt {
  std::variant<RelationalPrompt, CountingPrompt, EmptyScenePrompt> content;
  int template_id = 0;

  bool is_relational() const { return std::holds_alternative<RelationalPrompt>(content); }
  bool is_counting() const { return std::holds_alternative<CountingPrompt>(content); }
  bool is_empty_scene() const { return std::holds_alternative<EmptyScenePrompt>(content); }
  const RelationalPrompt& relational() const { return std::get<RelationalPrompt>(content); }
  const CountingPrompt& counting() const { return std::get<CountingPrompt>(content); }

  bool operator==(const StructuredPrompt&) const = default;
};

constexpr int kTemplatesPerKind = 3;

/// World geometry and latent-layout parameters shared by every module.
struct WorldConfig {
  CategoryVocab vocab = CategoryVocab::default_vocab();
  int k_max = 3;
  bool color_mode = false;
  std::vector<std::string> palette = {"red", "green", "blue", "yellow"};
  double p_align = 0.35;
  double margin = 0.05;

  int palette_size() const { return static_cast<int>(palette.size()); }
  int color_index(const std::string& name) const;
  /// Slot layout: [presence, category one-hot, color one-hot?, cx, cy, w, h].
  int slot_dim() const { return 1 + vocab.size() + (color_mode ? palette_size() : 0) + 4; }
  int latent_dim() const { return k_max * slot_dim(); }

  void validate() const;
};

/// Object geometry lives on a 2^-32 grid so the signed latent encoding is
/// exactly invertible; see ObjectInstance::make.
double quantize_unit(double v);

constexpr double kMinObjectSize = 0.015625;  // 1/64
constexpr double kMaxObjectSize = 0.5;

struct ObjectInstance {
  int category = 0;
  std::optional<int> color;
  double cx = 0.5, cy = 0.5;      // centers in [0,1]^2; cy measured from the bottom
  double w = 0.1, h = 0.1;        // extents in (0, 0.5]

  /// Validates ranges, then snaps geometry to the quantization grid.
  static ObjectInstance make(int category, std::optional<int> color, double cx, double cy,
                             double w, double h);

  bool operator==(const ObjectInstance&) const = default;
};

struct Scene {
  std::vector<ObjectInstance> objects;
  bool operator==(const Scene&) const = default;
};

struct SceneLatent {
  Vec values;
};

/// Objects reordered by (category, cx, cy, w, h, color); the slot order used
/// by encode_scene.
Scene canonical_order(Scene s);

/// n distinct relational (A, rel, B) triples for the given split. Splits
/// "train" and "unseen" drawn with the same (seed, n) are disjoint slices of
/// one master permutation; errors name the maximum when n exceeds capacity.
std::vector<StructuredPrompt> generate_prompt_set(std::uint64_t seed, int n,
                                                  const WorldConfig& world,
                                                  const std::vector<Relation>& relations,
                                                  const std::string& split_tag);

/// Internal slice access used for growth pools; offset counts prompts already
/// allocated out of the master permutation.
std::vector<StructuredPrompt> prompt_slice(std::uint64_t seed, int offset, int n,
                                           const WorldConfig& world,
                                           const std::vector<Relation>& relations);

/// Number of distinct relational triples (the capacity named in errors).
int relational_capacity(const WorldConfig& world, const std::vector<Relation>& relations);

std::string render_prompt(const StructuredPrompt& p, const WorldConfig& world);
std::string render_prompt(const StructuredPrompt& p, int template_id, const WorldConfig& world);
/// Inverse of render_prompt over the shipped templates; throws on no match.
StructuredPrompt parse_prompt(const std::string& text, const WorldConfig& world);

SceneLatent encode_scene(const Scene& s, const WorldConfig& world);
Scene decode_latent(const SceneLatent& z, const WorldConfig& world,
                    double presence_threshold = 0.0);

/// Scene with exactly the prompted pair; centers honor the prompted relation
/// with probability p_align, otherwise a uniformly random relation.
std::pair<Scene, StructuredPrompt> synth_pretraining_example(const StructuredPrompt& p, Rng& rng,
                                                             const WorldConfig& world);

nlohmann::json prompt_to_json(const StructuredPrompt& p, const WorldConfig& world,
                              const std::string& split_tag);
StructuredPrompt prompt_from_json(const nlohmann::json& j, const WorldConfig& world);

}  // namespace ipr::scenegen
