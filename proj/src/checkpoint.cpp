#include "ipr/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace ipr::checkpoint {
namespace {

constexpr char kMagic[8] = {'I', 'P', 'R', 'M', 'O', 'D', 'E', 'L'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("truncated checkpoint");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v = 0.0;
  std::memcpy(&v, &bits, 8);
  return v;
}

nlohmann::json header_json(const ddpm::ModelState& model, std::uint64_t master_seed,
                           const std::string& lineage_label) {
  nlohmann::json h;
  h["arch"] = {{"widths", model.denoiser.arch.widths},
               {"activation", model.denoiser.arch.activation}};
  h["schedule"] = {{"t_d", model.schedule.t_d},
                   {"beta_start", model.schedule.beta[0]},
                   {"beta_end", model.schedule.beta[model.schedule.t_d - 1]}};
  h["embed"] = {{"vocab_size", model.embed.vocab_size},
                {"k_max", model.embed.k_max},
                {"color_mode", model.embed.color_mode},
                {"palette_size", model.embed.palette_size},
                {"relation_count", model.embed.relation_count},
                {"time_dim", model.embed.time_dim}};
  h["seed_lineage"] = {{"master_seed", master_seed}, {"label", lineage_label}};
  return h;
}

}  // namespace

void save_model(const std::string& bin_path, const std::string& manifest_path,
                const ddpm::ModelState& model, std::uint64_t master_seed,
                const std::string& lineage_label) {
  std::ofstream out(bin_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + bin_path + " for writing");

  const nlohmann::json header = header_json(model, master_seed, lineage_label);
  const std::string header_str = header.dump();

  out.write(kMagic, 8);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  const auto& params = model.denoiser.params;
  put_u32(out, static_cast<std::uint32_t>(params.count()));
  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t i = 0; i < params.count(); ++i) {
    const auto& arr = params.array(i);
    put_u32(out, static_cast<std::uint32_t>(arr.name.size()));
    out.write(arr.name.data(), static_cast<std::streamsize>(arr.name.size()));
    put_u32(out, static_cast<std::uint32_t>(arr.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(arr.value.cols()));
    for (Index k = 0; k < arr.value.size(); ++k) put_f64(out, arr.value.data()[k]);
    shapes.push_back(
        {{"name", arr.name}, {"rows", arr.value.rows()}, {"cols", arr.value.cols()}});
  }
  if (!out) throw std::runtime_error("failed writing " + bin_path);
  out.close();

  nlohmann::json manifest = header;
  manifest["format_version"] = kFormatVersion;
  manifest["arrays"] = std::move(shapes);
  std::ofstream mout(manifest_path, std::ios::binary);
  if (!mout) throw std::runtime_error("cannot open " + manifest_path + " for writing");
  mout << manifest.dump(2) << "\n";
}

ddpm::ModelState load_model(const std::string& bin_path) {
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + bin_path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(bin_path + " is not a model checkpoint");
  const std::uint32_t version = get_u32(in);
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  const std::uint32_t header_len = get_u32(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw std::runtime_error("truncated checkpoint header");
  const nlohmann::json header = nlohmann::json::parse(header_str);

  ddpm::ModelState model;
  model.denoiser.arch.widths = header.at("arch").at("widths").get<std::vector<int>>();
  model.denoiser.arch.activation = header.at("arch").at("activation").get<std::string>();
  model.schedule = ddpm::make_schedule(header.at("schedule").at("t_d").get<int>(),
                                       header.at("schedule").at("beta_start").get<double>(),
                                       header.at("schedule").at("beta_end").get<double>());
  const auto& e = header.at("embed");
  model.embed.vocab_size = e.at("vocab_size").get<int>();
  model.embed.k_max = e.at("k_max").get<int>();
  model.embed.color_mode = e.at("color_mode").get<bool>();
  model.embed.palette_size = e.at("palette_size").get<int>();
  model.embed.relation_count = e.at("relation_count").get<int>();
  model.embed.time_dim = e.at("time_dim").get<int>();

  const std::uint32_t n_arrays = get_u32(in);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    Mat value(rows, cols);
    for (Index k = 0; k < value.size(); ++k) value.data()[k] = get_f64(in);
    if (!value.allFinite()) throw std::runtime_error("non-finite values in checkpoint " + bin_path);
    model.denoiser.params.add(std::move(name), std::move(value));
  }

  model.denoiser.arch.validate();
  if (model.denoiser.arch.input_width() != model.embed.input_dim() ||
      model.denoiser.arch.output_width() != model.embed.latent_dim())
    throw std::runtime_error("checkpoint arch does not match its embedding config");
  model.opt = tensornet::AdamState::init(model.denoiser.params, tensornet::AdamConfig{});
  return model;
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<std::uint8_t>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace ipr::checkpoint
