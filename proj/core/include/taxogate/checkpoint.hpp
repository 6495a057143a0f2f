#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "taxogate/param_store.hpp"

namespace taxogate {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text checkpoint, version 1:
///
///   #checkpoint v1 seed=<u64> init=uniform:<range>
///   <name>\t<d0[,d1]>\t<v0> <v1> ...
///
/// One record per tensor in name order; values use the shortest decimal
/// form that round-trips exactly.
std::string format_checkpoint(const ParamStore& store);
ParamStore parse_checkpoint(const std::string& text);

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

/// Overwrites values of `store` from the file; names and shapes must match.
void load_checkpoint_into(ParamStore& store, const std::filesystem::path& path);

/// Shortest round-trip decimal for a double.
std::string format_double_exact(double v);

}  // namespace taxogate
