#pragma once

#include <cstdint>
#include <string>

#include "dvip/config.hpp"
#include "dvip/data.hpp"
#include "dvip/training.hpp"

namespace dvip {

// Binary checkpoint: magic, format version, a text descriptor of the
// architecture and task, the iteration counter, and named little-endian f64
// blocks for every parameter, optimizer moment and the standardizer. Writing
// is canonical, so save -> load -> save reproduces the file byte for byte.
void save_checkpoint(const std::string& path, DvipModel& model, TaskKind task,
                     const AdamState& adam, std::int64_t iteration,
                     const Standardizer& scaler);

struct LoadedCheckpoint {
  DvipModel model;
  TaskKind task = TaskKind::kRegression;
  AdamState adam;
  std::int64_t iteration = 0;
  Standardizer scaler;
};

// FormatError on bad magic, unsupported version, truncation, missing or
// unexpected blocks, and name/shape mismatches; each case gets its own
// message.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dvip
