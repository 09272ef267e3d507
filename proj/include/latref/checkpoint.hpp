#pragma once

// Versioned checkpoint files for the MLP backend.
//
// A checkpoint is a single JSON document:
//
//   {
//     "format_version": 1,
//     "backend_tag": "mlp",
//     "d": <latent dim>, "H": <hidden width>, "n_choices": <C>,
//     "labels": ["a", ...],
//     "params": {
//       "W1": [[...], ...], "b1": [...],
//       "W2": [[...], ...], "b2": [...],
//       "decode_W": [[...], ...], "decode_b": [...],
//       "encoder_W": [[...], ...]
//     }
//   }
//
// Numbers are written as shortest round-trip decimals, so save followed by
// load reproduces every 64-bit parameter bit for bit.

#include <stdexcept>
#include <string>

#include "latref/dynamics.hpp"

namespace latref {

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};
// Unreadable or syntactically invalid file.
struct CheckpointParseError : CheckpointError {
  explicit CheckpointParseError(const std::string& m) : CheckpointError(m) {}
};
// Readable file with an unsupported format_version or backend_tag.
struct CheckpointVersionError : CheckpointError {
  explicit CheckpointVersionError(const std::string& m) : CheckpointError(m) {}
};
// Parameter arrays inconsistent with the declared shapes.
struct CheckpointShapeError : CheckpointError {
  explicit CheckpointShapeError(const std::string& m) : CheckpointError(m) {}
};

void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

}  // namespace latref
