#pragma once

#include "edl/unet.hpp"

#include <filesystem>
#include <string>

namespace edl::nn {

/// One-line `key=value` rendering of a network config, and its inverse.
std::string describe(const UNetConfig& cfg);
UNetConfig parse_unet_config(const std::string& line);

/// Text manifest followed by a little-endian float32 blob:
///
///   # <provenance>
///   edlseg-checkpoint 1
///   config <describe(cfg)>
///   params <count>
///   <name> <d0,d1,...> <byte offset into blob>   (one line per parameter)
///   end
///   <blob>
///
/// The file is written beside the target and renamed into place, so an
/// interrupted save never leaves a partial checkpoint.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const UNet<Scalar>& model, const std::string& provenance = {});

/// Throws ParseError naming the file and byte offset on malformed input.
template <typename Scalar>
UNet<Scalar> load_checkpoint(const std::filesystem::path& path);

}  // namespace edl::nn
