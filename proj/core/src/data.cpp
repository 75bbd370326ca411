#include "dvip/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dvip/errors.hpp"
#include "dvip/rng.hpp"

namespace dvip {

namespace {
constexpr std::uint64_t kTagSplit = 201;
constexpr std::uint64_t kTagSine = 202;
constexpr std::uint64_t kTagMoons = 203;

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}
}  // namespace

Dataset load_csv(const std::string& path, TaskKind task) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset '" + path + "' is empty");
  Dataset d;
  d.task = task;
  d.columns = split_commas(strip_cr(line));
  const std::size_t width = d.columns.size();
  if (width < 2) throw DataError("dataset '" + path + "' needs at least two columns");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_commas(line);
    if (cells.size() != width)
      throw DataError("row at line " + std::to_string(lineno) + " of '" + path +
                      "' has " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(width));
    std::vector<double> vals(width);
    for (std::size_t i = 0; i < width; ++i)
      if (!parse_double(cells[i], vals[i]))
        throw DataError("non-numeric cell at line " + std::to_string(lineno) +
                        ", column " + std::to_string(i + 1) + " of '" + path + "'");
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw DataError("dataset '" + path + "' has no data rows");

  const std::size_t n = rows.size(), dcols = width - 1;
  d.x = Tensor({n, dcols});
  d.y = Tensor({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dcols; ++j) d.x.at(i, j) = rows[i][j];
    double y = rows[i][dcols];
    if (task == TaskKind::kBinary) {
      if (y == 0.0) y = -1.0;
      if (y != 1.0 && y != -1.0)
        throw DataError("binary label at line " + std::to_string(i + 2) + " of '" +
                        path + "' must be 0/1 or -1/+1");
    }
    d.y[i] = y;
  }
  return d;
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  out.precision(17);
  const std::size_t dcols = data.input_dim();
  if (data.columns.size() == dcols + 1) {
    for (std::size_t j = 0; j <= dcols; ++j)
      out << data.columns[j] << (j == dcols ? '\n' : ',');
  } else {
    for (std::size_t j = 0; j < dcols; ++j) out << 'x' << j + 1 << ',';
    out << "y\n";
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < dcols; ++j) out << data.x.at(i, j) << ',';
    out << data.y[i] << '\n';
  }
}

Standardizer Standardizer::fit(const Dataset& train, bool scale_targets_) {
  const std::size_t n = train.size(), d = train.input_dim();
  if (n < 2) throw ContractViolation("standardizer: need at least two rows");
  Standardizer s;
  s.scale_targets = scale_targets_;
  s.x_mean = Tensor({d});
  s.x_scale = Tensor({d});
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += train.x.at(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = train.x.at(i, j) - m;
      v += c * c;
    }
    v /= static_cast<double>(n);
    s.x_mean[j] = m;
    s.x_scale[j] = (v > 0.0) ? std::sqrt(v) : 1.0;  // constant column guard
  }
  if (scale_targets_) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += train.y[i];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = train.y[i] - m;
      v += c * c;
    }
    v /= static_cast<double>(n);
    s.y_mean = m;
    s.y_scale = (v > 0.0) ? std::sqrt(v) : 1.0;
  }
  return s;
}

Dataset Standardizer::apply(const Dataset& d) const {
  Dataset out = d;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.input_dim(); ++j)
      out.x.at(i, j) = (d.x.at(i, j) - x_mean[j]) / x_scale[j];
  if (scale_targets)
    for (std::size_t i = 0; i < d.size(); ++i)
      out.y[i] = (d.y[i] - y_mean) / y_scale;
  return out;
}

std::pair<Dataset, Dataset> make_split(const Dataset& all, const SplitSpec& spec) {
  const std::size_t n = all.size();
  if (n < 10) throw ContractViolation("make_split: need at least 10 rows");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw ContractViolation("make_split: test_fraction must lie in (0,1)");
  auto test_n = static_cast<std::size_t>(
      std::lround(spec.test_fraction * static_cast<double>(n)));
  test_n = std::max<std::size_t>(1, std::min(test_n, n - 1));

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng::Key key =
      rng::Key(spec.seed).fold(kTagSplit).fold(static_cast<std::uint64_t>(spec.index));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = key.bits(i) % (i + 1);
    std::swap(perm[i], perm[j]);
  }

  const std::size_t d = all.input_dim();
  Dataset test, train;
  test.task = train.task = all.task;
  test.columns = train.columns = all.columns;
  test.x = Tensor({test_n, d});
  test.y = Tensor({test_n, 1});
  train.x = Tensor({n - test_n, d});
  train.y = Tensor({n - test_n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t src = perm[i];
    if (i < test_n) {
      for (std::size_t j = 0; j < d; ++j) test.x.at(i, j) = all.x.at(src, j);
      test.y[i] = all.y[src];
    } else {
      std::size_t r = i - test_n;
      for (std::size_t j = 0; j < d; ++j) train.x.at(r, j) = all.x.at(src, j);
      train.y[r] = all.y[src];
    }
  }
  return {std::move(train), std::move(test)};
}

Dataset make_sine(int n, std::uint64_t seed, double noise_sd) {
  if (n < 1) throw ContractViolation("make_sine: n must be >= 1");
  rng::Key kx = rng::Key(seed).fold(kTagSine).fold(1);
  rng::Key ke = rng::Key(seed).fold(kTagSine).fold(2);
  Dataset d;
  d.task = TaskKind::kRegression;
  d.columns = {"x1", "y"};
  auto nu = static_cast<std::size_t>(n);
  d.x = Tensor({nu, 1});
  d.y = Tensor({nu, 1});
  for (std::size_t i = 0; i < nu; ++i) {
    double x = -4.0 + 8.0 * kx.uniform(i);
    d.x[i] = x;
    d.y[i] = std::sin(x) + noise_sd * ke.normal(i);
  }
  return d;
}

Dataset make_two_moons(int n, std::uint64_t seed, double noise_sd) {
  if (n < 2) throw ContractViolation("make_two_moons: n must be >= 2");
  rng::Key kt = rng::Key(seed).fold(kTagMoons).fold(1);
  rng::Key ke = rng::Key(seed).fold(kTagMoons).fold(2);
  Dataset d;
  d.task = TaskKind::kBinary;
  d.columns = {"x1", "x2", "y"};
  auto nu = static_cast<std::size_t>(n);
  d.x = Tensor({nu, 2});
  d.y = Tensor({nu, 1});
  for (std::size_t i = 0; i < nu; ++i) {
    double t = M_PI * kt.uniform(i);
    double x0, x1, label;
    if (i % 2 == 0) {
      x0 = std::cos(t);
      x1 = std::sin(t);
      label = 1.0;
    } else {
      x0 = 1.0 - std::cos(t);
      x1 = 0.5 - std::sin(t);
      label = -1.0;
    }
    d.x.at(i, 0) = x0 + noise_sd * ke.normal(2 * i);
    d.x.at(i, 1) = x1 + noise_sd * ke.normal(2 * i + 1);
    d.y[i] = label;
  }
  return d;
}

}  // namespace dvip
