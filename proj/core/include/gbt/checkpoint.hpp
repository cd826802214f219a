#pragma once

#include <string>

#include "gbt/param_store.hpp"

namespace gbt {

// Single-file checkpoint: magic, a JSON manifest (tensor names, shapes,
// offsets, aliases), then the raw little-endian float64 blob. Loading into a
// store declared from the same architecture is bit-exact.
void save_checkpoint(const ParamStore& ps, const std::string& path);

// Fills an already-declared store. Throws CorruptManifest on malformed or
// truncated files, ShapeMismatch when the manifest does not match the store
// (different tensors, shapes, or aliases).
void load_checkpoint(ParamStore& ps, const std::string& path);

}  // namespace gbt
