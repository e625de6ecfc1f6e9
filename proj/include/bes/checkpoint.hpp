#pragma once

#include <filesystem>

#include "json.hpp"

#include "bes/autodiff.hpp"

namespace bes {

/// Writes `dir/manifest.json` plus one raw little-endian f64 blob per parameter
/// (column-major, shape recorded in the manifest). `extra` is stored under "meta".
void save_checkpoint(const std::filesystem::path& dir, const ad::ParameterSet& params,
                     const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
  ad::ParameterSet params;
  nlohmann::json meta;
};

/// Throws DatasetMissing when the manifest is absent and ParseError on malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace bes
