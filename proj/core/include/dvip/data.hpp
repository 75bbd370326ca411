#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dvip/tensor.hpp"

namespace dvip {

enum class TaskKind { kRegression, kBinary };

struct Dataset {
  Tensor x;  // {N, D}
  Tensor y;  // {N, 1}; binary labels live in {-1, +1}
  TaskKind task = TaskKind::kRegression;
  std::vector<std::string> columns;  // header names, target last
  std::size_t size() const { return x.rank() == 2 ? x.dim(0) : 0; }
  std::size_t input_dim() const { return x.rank() == 2 ? x.dim(1) : 0; }
};

// Numeric CSV with a mandatory header row; the last column is the target.
// Binary targets may be written as {0,1} or {-1,+1} and are mapped to
// {-1,+1}. Missing file, empty file, header-only file, ragged rows and
// non-numeric cells raise DataError with distinct messages.
Dataset load_csv(const std::string& path, TaskKind task = TaskKind::kRegression);
void save_csv(const std::string& path, const Dataset& data);

// Feature (and optionally target) standardization fitted on training data.
struct Standardizer {
  Tensor x_mean, x_scale;  // {D}
  double y_mean = 0.0;
  double y_scale = 1.0;
  bool scale_targets = true;

  static Standardizer fit(const Dataset& train, bool scale_targets);
  Dataset apply(const Dataset& d) const;
  double y_to_raw(double standardized) const { return standardized * y_scale + y_mean; }
};

struct SplitSpec {
  int index = 0;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Deterministic train/test split: a permutation keyed by (seed, index) with
// the first round(N * test_fraction) rows (at least one, at most N-1) held
// out. Requires at least 10 rows.
std::pair<Dataset, Dataset> make_split(const Dataset& all, const SplitSpec& spec);

// Synthetic fixtures.
Dataset make_sine(int n, std::uint64_t seed, double noise_sd);
// Two interleaved half-circles with +-1 labels.
Dataset make_two_moons(int n, std::uint64_t seed, double noise_sd);

}  // namespace dvip
