#include "dvip/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "dvip/errors.hpp"

namespace dvip {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  long long out = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw FormatError("config key '" + key + "': bad integer '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  double out = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw FormatError("config key '" + key + "': bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (cur.empty()) continue;
    out.push_back(static_cast<int>(parse_int(key, cur)));
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* to_string(TaskKind t) {
  return t == TaskKind::kRegression ? "regression" : "binary";
}
const char* to_string(PriorKind p) {
  return p == PriorKind::kBnn ? "bnn" : "cosine_gp";
}
const char* to_string(LikelihoodKind l) {
  return l == LikelihoodKind::kGaussian ? "gaussian" : "probit";
}
const char* to_string(ObjectiveKind o) {
  return o == ObjectiveKind::kElbo ? "elbo" : "alpha_energy";
}

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task") {
    if (value == "regression")
      cfg.task = TaskKind::kRegression;
    else if (value == "binary")
      cfg.task = TaskKind::kBinary;
    else
      throw FormatError("config key 'task': expected regression|binary, got '" +
                        value + "'");
  } else if (key == "dataset") {
    cfg.dataset = value;
  } else if (key == "input_dim") {
    cfg.model.input_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "depth") {
    cfg.model.depth = static_cast<int>(parse_int(key, value));
  } else if (key == "inner_width") {
    cfg.model.inner_width = static_cast<int>(parse_int(key, value));
  } else if (key == "num_prior_samples") {
    cfg.model.num_prior_samples = static_cast<int>(parse_int(key, value));
  } else if (key == "prior") {
    if (value == "bnn")
      cfg.model.prior_kind = PriorKind::kBnn;
    else if (value == "cosine_gp")
      cfg.model.prior_kind = PriorKind::kCosineGp;
    else
      throw FormatError("config key 'prior': expected bnn|cosine_gp, got '" + value +
                        "'");
  } else if (key == "bnn_hidden") {
    cfg.model.bnn.hidden = parse_int_list(key, value);
  } else if (key == "bnn_per_weight") {
    cfg.model.bnn.per_weight = parse_bool(key, value);
  } else if (key == "cosine_width") {
    cfg.model.cosgp.width = static_cast<int>(parse_int(key, value));
  } else if (key == "likelihood") {
    if (value == "gaussian")
      cfg.model.likelihood = LikelihoodKind::kGaussian;
    else if (value == "probit")
      cfg.model.likelihood = LikelihoodKind::kProbit;
    else
      throw FormatError("config key 'likelihood': expected gaussian|probit, got '" +
                        value + "'");
  } else if (key == "probit_quad_order") {
    cfg.model.probit_quad_order = static_cast<int>(parse_int(key, value));
  } else if (key == "input_propagation") {
    cfg.model.input_propagation = parse_bool(key, value);
  } else if (key == "objective") {
    if (value == "elbo")
      cfg.model.objective = ObjectiveKind::kElbo;
    else if (value == "alpha_energy")
      cfg.model.objective = ObjectiveKind::kAlphaEnergy;
    else
      throw FormatError("config key 'objective': expected elbo|alpha_energy, got '" +
                        value + "'");
  } else if (key == "alpha") {
    cfg.model.alpha = parse_real(key, value);
  } else if (key == "seed") {
    cfg.model.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "iterations") {
    cfg.iterations = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "learning_rate") {
    cfg.learning_rate = parse_real(key, value);
  } else if (key == "r_train") {
    cfg.r_train = static_cast<int>(parse_int(key, value));
  } else if (key == "r_test") {
    cfg.r_test = static_cast<int>(parse_int(key, value));
  } else if (key == "test_fraction") {
    cfg.test_fraction = parse_real(key, value);
  } else if (key == "split_index") {
    cfg.split_index = static_cast<int>(parse_int(key, value));
  } else {
    throw FormatError("unknown config key '" + key + "'");
  }
}

namespace {

void for_each_pair(const std::string& text,
                   const std::function<void(const std::string&, const std::string&)>& f) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    f(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  for_each_pair(text, [&](const std::string& k, const std::string& v) {
    apply_config_key(cfg, k, v);
  });
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_model_descriptor(const ModelConfig& model, TaskKind task,
                                       std::int64_t train_size) {
  std::ostringstream os;
  os << "task = " << to_string(task) << '\n';
  os << "input_dim = " << model.input_dim << '\n';
  os << "depth = " << model.depth << '\n';
  os << "inner_width = " << model.inner_width << '\n';
  os << "num_prior_samples = " << model.num_prior_samples << '\n';
  os << "prior = " << to_string(model.prior_kind) << '\n';
  os << "bnn_hidden = ";
  for (std::size_t i = 0; i < model.bnn.hidden.size(); ++i)
    os << (i ? "," : "") << model.bnn.hidden[i];
  os << '\n';
  os << "bnn_per_weight = " << (model.bnn.per_weight ? "true" : "false") << '\n';
  os << "cosine_width = " << model.cosgp.width << '\n';
  os << "likelihood = " << to_string(model.likelihood) << '\n';
  os << "probit_quad_order = " << model.probit_quad_order << '\n';
  os << "input_propagation = " << (model.input_propagation ? "true" : "false") << '\n';
  os << "objective = " << to_string(model.objective) << '\n';
  os << "alpha = " << fmt_real(model.alpha) << '\n';
  os << "seed = " << model.seed << '\n';
  os << "train_size = " << train_size << '\n';
  return os.str();
}

ModelDescriptor parse_model_descriptor(const std::string& text) {
  ModelDescriptor d;
  RunConfig tmp;
  bool saw_train_size = false;
  for_each_pair(text, [&](const std::string& k, const std::string& v) {
    if (k == "train_size") {
      d.train_size = parse_int(k, v);
      saw_train_size = true;
      return;
    }
    apply_config_key(tmp, k, v);
  });
  if (!saw_train_size)
    throw FormatError("model descriptor: missing train_size");
  d.model = tmp.model;
  d.task = tmp.task;
  return d;
}

}  // namespace dvip
