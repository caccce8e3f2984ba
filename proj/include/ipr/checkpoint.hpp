#pragma once

#include "ipr/ddpm.hpp"

#include <cstdint>
#include <string>

namespace ipr::checkpoint {

/// Binary layout (all integers little-endian u32, floats little-endian f64):
///   magic "IPRMODEL" | version | header_len | header JSON | n_arrays |
///   per array: name_len | name | rows | cols | rows*cols values
/// (column-major). The header JSON carries arch, schedule, embedding config,
/// and the seed lineage (master seed + phase label). A JSON manifest written
/// next to the binary mirrors the shapes.
inline constexpr std::uint32_t kFormatVersion = 1;

void save_model(const std::string& bin_path, const std::string& manifest_path,
                const ddpm::ModelState& model, std::uint64_t master_seed,
                const std::string& lineage_label);

/// Validates magic, version, shapes, and finiteness; the optimizer state
/// comes back freshly initialized.
ddpm::ModelState load_model(const std::string& bin_path);

/// FNV-1a over the file bytes; checkpoint identity checks.
std::uint64_t file_hash(const std::string& path);

}  // namespace ipr::checkpoint
