#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dvip/checkpoint.hpp"
#include "dvip/errors.hpp"
#include "dvip/likelihood.hpp"
#include "dvip/metrics.hpp"

namespace {

using namespace dvip;

struct Overrides {
  std::optional<std::string> dataset;
  std::optional<std::uint64_t> seed;
  std::optional<int> depth;
  std::optional<int> samples;
};

RunConfig load_cfg(const std::string& path, const Overrides& o) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  if (o.dataset) cfg.dataset = *o.dataset;
  if (o.seed) cfg.model.seed = *o.seed;
  if (o.depth) cfg.model.depth = *o.depth;
  if (o.samples) cfg.model.num_prior_samples = *o.samples;
  return cfg;
}

// Fills input_dim from the data, or checks an explicit value against it.
void resolve_input_dim(ModelConfig& m, const Dataset& data) {
  const int d = static_cast<int>(data.input_dim());
  if (m.input_dim == 0) m.input_dim = d;
  if (m.input_dim != d)
    throw DataError("config input_dim=" + std::to_string(m.input_dim) +
                    " does not match dataset width " + std::to_string(d));
}

struct SplitData {
  Dataset train_raw, test_raw, train_std;
  Standardizer scaler;
};

SplitData prepare(const RunConfig& cfg) {
  if (cfg.dataset.empty())
    throw DataError("no dataset given (config key 'dataset' or --dataset)");
  Dataset all = load_csv(cfg.dataset, cfg.task);
  SplitSpec spec;
  spec.index = cfg.split_index;
  spec.test_fraction = cfg.test_fraction;
  spec.seed = cfg.model.seed;
  auto [tr, te] = make_split(all, spec);
  SplitData s;
  s.scaler = Standardizer::fit(tr, cfg.task == TaskKind::kRegression);
  s.train_std = s.scaler.apply(tr);
  s.train_raw = std::move(tr);
  s.test_raw = std::move(te);
  return s;
}

struct Metrics {
  bool binary = false;
  double rmse = 0.0, nll = 0.0, crps = 0.0;  // regression
  double accuracy = 0.0, loglik = 0.0;       // binary
};

Metrics evaluate(const DvipModel& model, const Standardizer& scaler,
                 const Dataset& raw, TaskKind task, int r) {
  Dataset std_d = scaler.apply(raw);
  PredictiveMixture mix = model.predict(std_d.x, r, model.config().seed);
  Metrics m;
  m.binary = (task == TaskKind::kBinary);
  if (m.binary) {
    Tensor proba = binary_predictive_proba(mix.means, mix.vars);
    BinaryMetrics bm = binary_metrics(proba, raw.y);
    m.accuracy = bm.accuracy;
    m.loglik = bm.mean_loglik;
  } else {
    const double noise = model.likelihood_noise_var();
    std::vector<double> pred = mixture_mean(mix);
    std::vector<double> raw_pred(pred.size()), raw_y(raw.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      raw_pred[i] = scaler.y_to_raw(pred[i]);
      raw_y[i] = raw.y[i];
    }
    m.rmse = rmse(raw_pred, raw_y);
    m.nll = test_nll(mix, std_d.y, noise, scaler.y_scale);
    m.crps = crps_mixture(mix, std_d.y, noise, scaler.y_scale);
  }
  return m;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f.precision(17);
  return f;
}

std::string metric_header(bool binary) {
  return binary ? "accuracy,loglik" : "rmse,nll,crps";
}

void put_metrics(std::ostream& os, const Metrics& m) {
  if (m.binary)
    os << m.accuracy << ',' << m.loglik;
  else
    os << m.rmse << ',' << m.nll << ',' << m.crps;
}

std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw FormatError(std::string(what) + ": bad integer '" + item + "'");
    }
  }
  if (out.empty()) throw FormatError(std::string(what) + ": empty list");
  return out;
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_train(const std::string& config_path, const Overrides& o,
              const std::string& checkpoint_in, const std::string& out_dir) {
  RunConfig cfg = load_cfg(config_path, o);
  SplitData sd = prepare(cfg);
  resolve_input_dim(cfg.model, sd.train_raw);
  std::filesystem::create_directories(out_dir);

  std::optional<LoadedCheckpoint> resume;
  if (!checkpoint_in.empty()) resume.emplace(load_checkpoint(checkpoint_in));

  DvipModel model = resume ? std::move(resume->model)
                           : DvipModel(cfg.model, static_cast<std::int64_t>(
                                                      sd.train_std.size()));
  if (model.train_size() != static_cast<std::int64_t>(sd.train_std.size()))
    throw DataError("checkpoint was trained on " +
                    std::to_string(model.train_size()) + " rows, split has " +
                    std::to_string(sd.train_std.size()));
  AdamState adam = resume ? std::move(resume->adam)
                          : make_adam_state(model.parameters());
  const std::int64_t start = resume ? resume->iteration : 0;
  if (resume) sd.scaler = resume->scaler;  // keep the original standardization

  TrainConfig tc;
  tc.iterations = static_cast<int>(std::max<std::int64_t>(0, cfg.iterations - start));
  tc.batch_size = cfg.batch_size;
  tc.r_train = cfg.r_train;
  tc.seed = cfg.model.seed;
  tc.adam.learning_rate = cfg.learning_rate;
  tc.start_iteration = start;

  const Dataset train_std = resume ? resume->scaler.apply(sd.train_raw) : sd.train_std;
  auto t0 = std::chrono::steady_clock::now();
  TrainResult res = train(model, train_std, tc, &adam);
  const double wall = elapsed_seconds(t0);

  const std::filesystem::path out(out_dir);
  {
    auto f = open_out(out / "history.csv");
    f << "iteration,objective\n";
    for (std::size_t i = 0; i < res.objective_history.size(); ++i)
      f << start + static_cast<std::int64_t>(i) << ',' << res.objective_history[i]
        << '\n';
  }
  save_checkpoint((out / "checkpoint.bin").string(), model, cfg.task, adam,
                  start + tc.iterations, sd.scaler);

  Metrics m = evaluate(model, sd.scaler, sd.train_raw, cfg.task, cfg.r_test);
  {
    auto f = open_out(out / "summary.csv");
    f << "dataset,depth,samples,seed,iterations,wall_seconds," << metric_header(m.binary)
      << '\n';
    f << dataset_name(cfg.dataset) << ',' << model.config().depth << ','
      << model.config().num_prior_samples << ',' << model.config().seed << ','
      << start + tc.iterations << ',' << wall << ',';
    put_metrics(f, m);
    f << '\n';
  }
  std::cout.precision(10);
  std::cout << "summary dataset=" << dataset_name(cfg.dataset)
            << " depth=" << model.config().depth
            << " samples=" << model.config().num_prior_samples
            << " seed=" << model.config().seed
            << " iterations=" << start + tc.iterations << " wall_seconds=" << wall
            << '\n';
  return 0;
}

int cmd_eval(const std::string& config_path, const Overrides& o,
             const std::string& checkpoint_path, const std::string& out_dir,
             int r_test, const std::string& portion) {
  RunConfig cfg = load_cfg(config_path, o);
  LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
  cfg.task = lc.task;
  cfg.model.seed = lc.model.config().seed;  // the split belongs to the run

  if (cfg.dataset.empty())
    throw DataError("no dataset given (config key 'dataset' or --dataset)");
  Dataset all = load_csv(cfg.dataset, cfg.task);
  if (all.input_dim() != static_cast<std::size_t>(lc.model.config().input_dim))
    throw DataError("dataset width " + std::to_string(all.input_dim()) +
                    " does not match checkpoint input_dim " +
                    std::to_string(lc.model.config().input_dim));
  SplitSpec spec;
  spec.index = cfg.split_index;
  spec.test_fraction = cfg.test_fraction;
  spec.seed = cfg.model.seed;
  auto [tr, te] = make_split(all, spec);
  const Dataset& part = (portion == "train") ? tr : te;

  const int r = (r_test > 0) ? r_test : cfg.r_test;
  Metrics m = evaluate(lc.model, lc.scaler, part, cfg.task, r);

  std::filesystem::create_directories(out_dir);
  auto f = open_out(std::filesystem::path(out_dir) / "metrics.csv");
  f << "dataset,model,depth,split," << metric_header(m.binary) << ",train_seconds\n";
  f << dataset_name(cfg.dataset) << ',' << to_string(lc.model.config().prior_kind)
    << ',' << lc.model.config().depth << ',' << cfg.split_index << ',';
  put_metrics(f, m);
  f << ",nan\n";

  std::cout.precision(10);
  std::cout << "metrics ";
  put_metrics(std::cout, m);
  std::cout << '\n';
  return 0;
}

int cmd_predict(const std::string& config_path, const Overrides& o,
                const std::string& checkpoint_path, const std::string& out_dir,
                int r_test) {
  RunConfig cfg = load_cfg(config_path, o);
  LoadedCheckpoint lc = load_checkpoint(checkpoint_path);
  if (cfg.dataset.empty())
    throw DataError("no dataset given (config key 'dataset' or --dataset)");
  Dataset raw = load_csv(cfg.dataset, lc.task);
  if (raw.input_dim() != static_cast<std::size_t>(lc.model.config().input_dim))
    throw DataError("dataset width " + std::to_string(raw.input_dim()) +
                    " does not match checkpoint input_dim " +
                    std::to_string(lc.model.config().input_dim));
  Dataset std_d = lc.scaler.apply(raw);
  const int r = (r_test > 0) ? r_test : cfg.r_test;
  PredictiveMixture mix = lc.model.predict(std_d.x, r, lc.model.config().seed);

  std::filesystem::create_directories(out_dir);
  auto f = open_out(std::filesystem::path(out_dir) / "predictions.csv");
  if (lc.task == TaskKind::kBinary) {
    Tensor proba = binary_predictive_proba(mix.means, mix.vars);
    f << "target,p_plus\n";
    for (std::size_t i = 0; i < raw.size(); ++i)
      f << raw.y[i] << ',' << proba[i] << '\n';
    return 0;
  }
  // Raw-unit component means and total variances (model + observation noise).
  const double noise = lc.model.likelihood_noise_var();
  const double s2 = lc.scaler.y_scale * lc.scaler.y_scale;
  f << "target";
  for (int j = 0; j < r; ++j) f << ",mean_" << j + 1;
  for (int j = 0; j < r; ++j) f << ",var_" << j + 1;
  f << '\n';
  for (std::size_t i = 0; i < raw.size(); ++i) {
    f << raw.y[i];
    for (int j = 0; j < r; ++j)
      f << ',' << lc.scaler.y_to_raw(mix.means.at(i, static_cast<std::size_t>(j)));
    for (int j = 0; j < r; ++j)
      f << ',' << (mix.vars.at(i, static_cast<std::size_t>(j)) + noise) * s2;
    f << '\n';
  }
  return 0;
}

int cmd_sample_prior(const std::string& config_path, const Overrides& o,
                     const std::string& checkpoint_path, const std::string& out_dir,
                     int dim) {
  RunConfig cfg = load_cfg(config_path, o);
  std::optional<LoadedCheckpoint> lc;
  if (!checkpoint_path.empty()) lc.emplace(load_checkpoint(checkpoint_path));
  if (!lc && cfg.model.input_dim == 0) cfg.model.input_dim = 1;
  DvipModel model = lc ? std::move(lc->model) : DvipModel(cfg.model, 1);

  const int d = model.config().input_dim;
  if (dim < 0 || dim >= d)
    throw ContractViolation("--dim must lie in [0, " + std::to_string(d - 1) + "]");
  const int s = model.config().num_prior_samples;
  constexpr std::size_t kGrid = 200;
  Tensor x = Tensor::zeros({kGrid, static_cast<std::size_t>(d)});
  for (std::size_t i = 0; i < kGrid; ++i)
    x.at(i, static_cast<std::size_t>(dim)) =
        -5.0 + 10.0 * static_cast<double>(i) / static_cast<double>(kGrid - 1);

  PriorSampleSet set = model.sample_prior_functions(0, x, s);

  std::filesystem::create_directories(out_dir);
  auto f = open_out(std::filesystem::path(out_dir) / "prior_samples.csv");
  f << "x";
  for (int j = 0; j < s; ++j) f << ",f" << j + 1;
  f << '\n';
  for (std::size_t i = 0; i < kGrid; ++i) {
    f << x.at(i, static_cast<std::size_t>(dim));
    for (int j = 0; j < s; ++j)
      f << ',' << set.values.at(static_cast<std::size_t>(j), i);
    f << '\n';
  }
  return 0;
}

struct CellResult {
  Metrics metrics;
  double wall = 0.0;
  bool ok = false;
  std::string error;
};

CellResult run_cell(RunConfig cfg) {
  CellResult out;
  try {
    SplitData sd = prepare(cfg);
    resolve_input_dim(cfg.model, sd.train_raw);
    DvipModel model(cfg.model, static_cast<std::int64_t>(sd.train_std.size()));
    AdamState adam = make_adam_state(model.parameters());
    TrainConfig tc;
    tc.iterations = cfg.iterations;
    tc.batch_size = cfg.batch_size;
    tc.r_train = cfg.r_train;
    tc.seed = cfg.model.seed;
    tc.adam.learning_rate = cfg.learning_rate;
    auto t0 = std::chrono::steady_clock::now();
    train(model, sd.train_std, tc, &adam);
    out.wall = elapsed_seconds(t0);
    out.metrics = evaluate(model, sd.scaler, sd.test_raw, cfg.task, cfg.r_test);
    out.ok = true;
  } catch (const NumericError& e) {
    out.error = e.what();
  }
  return out;
}

void put_aggregate(std::ostream& os, bool binary, const std::vector<Metrics>& ok_runs,
                   const std::vector<double>& walls) {
  auto col = [&](auto get) {
    std::vector<double> xs;
    xs.reserve(ok_runs.size());
    for (const Metrics& m : ok_runs) xs.push_back(get(m));
    Aggregate a = aggregate(xs);
    os << a.mean << ',' << a.stderr_of_mean << ',';
  };
  if (binary) {
    col([](const Metrics& m) { return m.accuracy; });
    col([](const Metrics& m) { return m.loglik; });
  } else {
    col([](const Metrics& m) { return m.rmse; });
    col([](const Metrics& m) { return m.nll; });
    col([](const Metrics& m) { return m.crps; });
  }
  os << aggregate(walls).mean;
}

std::string aggregate_header(bool binary) {
  return binary ? "accuracy_mean,accuracy_stderr,loglik_mean,loglik_stderr"
                : "rmse_mean,rmse_stderr,nll_mean,nll_stderr,crps_mean,crps_stderr";
}

int cmd_benchmark(const std::string& config_path, const Overrides& o,
                  std::vector<std::string> datasets, const std::string& out_dir,
                  const std::string& depths_text, int splits) {
  RunConfig base = load_cfg(config_path, o);
  if (datasets.empty() && !base.dataset.empty()) datasets.push_back(base.dataset);
  if (datasets.empty()) throw DataError("benchmark: no datasets given");
  std::vector<int> depths = parse_int_list(depths_text, "--depths");
  if (splits < 1) throw ContractViolation("--splits must be >= 1");

  const bool binary = (base.task == TaskKind::kBinary);
  std::filesystem::create_directories(out_dir);
  auto runs = open_out(std::filesystem::path(out_dir) / "benchmark_runs.csv");
  auto agg = open_out(std::filesystem::path(out_dir) / "benchmark_aggregate.csv");
  runs << "dataset,model,depth,split," << metric_header(binary)
       << ",train_seconds,status\n";
  agg << "dataset,model,depth,n_ok," << aggregate_header(binary)
      << ",train_seconds_mean,status\n";

  bool all_ok = true;
  for (const std::string& ds : datasets) {
    for (int depth : depths) {
      std::vector<Metrics> ok_runs;
      std::vector<double> walls;
      for (int split = 0; split < splits; ++split) {
        RunConfig cfg = base;
        cfg.dataset = ds;
        cfg.model.depth = depth;
        cfg.split_index = split;
        CellResult r = run_cell(cfg);
        runs << dataset_name(ds) << ',' << to_string(cfg.model.prior_kind) << ','
             << depth << ',' << split << ',';
        if (r.ok) {
          put_metrics(runs, r.metrics);
          runs << ',' << r.wall << ",ok\n";
          ok_runs.push_back(r.metrics);
          walls.push_back(r.wall);
        } else {
          all_ok = false;
          if (binary)
            runs << "nan,nan";
          else
            runs << "nan,nan,nan";
          runs << ",nan,failed: " << r.error << '\n';
        }
      }
      agg << dataset_name(ds) << ',' << to_string(base.model.prior_kind) << ','
          << depth << ',' << ok_runs.size() << ',';
      if (ok_runs.empty()) {
        const int ncols = binary ? 4 : 6;
        for (int i = 0; i < ncols; ++i) agg << "nan,";
        agg << "nan,failed\n";
      } else {
        put_aggregate(agg, binary, ok_runs, walls);
        agg << (ok_runs.size() == static_cast<std::size_t>(splits) ? ",ok\n"
                                                                   : ",partial\n");
      }
    }
  }
  return all_ok ? 0 : 4;
}

int cmd_ablate_samples(const std::string& config_path, const Overrides& o,
                       const std::string& out_dir, const std::string& samples_text,
                       int splits) {
  RunConfig base = load_cfg(config_path, o);
  if (base.dataset.empty()) throw DataError("ablate-samples: no dataset given");
  std::vector<int> sample_counts = parse_int_list(samples_text, "--samples-list");
  if (splits < 1) throw ContractViolation("--splits must be >= 1");

  const bool binary = (base.task == TaskKind::kBinary);
  std::filesystem::create_directories(out_dir);
  auto runs = open_out(std::filesystem::path(out_dir) / "ablate_runs.csv");
  auto agg = open_out(std::filesystem::path(out_dir) / "ablate_aggregate.csv");
  runs << "dataset,model,depth,samples,split," << metric_header(binary)
       << ",train_seconds,status\n";
  agg << "dataset,model,depth,samples,n_ok," << aggregate_header(binary)
      << ",train_seconds_mean,status\n";

  bool all_ok = true;
  for (int s : sample_counts) {
    std::vector<Metrics> ok_runs;
    std::vector<double> walls;
    for (int split = 0; split < splits; ++split) {
      RunConfig cfg = base;
      cfg.model.num_prior_samples = s;
      cfg.split_index = split;
      CellResult r = run_cell(cfg);
      runs << dataset_name(base.dataset) << ',' << to_string(cfg.model.prior_kind)
           << ',' << cfg.model.depth << ',' << s << ',' << split << ',';
      if (r.ok) {
        put_metrics(runs, r.metrics);
        runs << ',' << r.wall << ",ok\n";
        ok_runs.push_back(r.metrics);
        walls.push_back(r.wall);
      } else {
        all_ok = false;
        if (binary)
          runs << "nan,nan";
        else
          runs << "nan,nan,nan";
        runs << ",nan,failed: " << r.error << '\n';
      }
    }
    agg << dataset_name(base.dataset) << ',' << to_string(base.model.prior_kind)
        << ',' << base.model.depth << ',' << s << ',' << ok_runs.size() << ',';
    if (ok_runs.empty()) {
      const int ncols = binary ? 4 : 6;
      for (int i = 0; i < ncols; ++i) agg << "nan,";
      agg << "nan,failed\n";
    } else {
      put_aggregate(agg, binary, ok_runs, walls);
      agg << (ok_runs.size() == static_cast<std::size_t>(splits) ? ",ok\n"
                                                                 : ",partial\n");
    }
  }
  return all_ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep variational implicit-process regression and classification"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_dir = ".";
  std::vector<std::string> datasets;
  Overrides o;
  int r_test = 0, dim = 0, splits = 20, ablate_splits = 1;
  std::string portion = "test", depths_text = "2,3,4,5", samples_text = "10,20,40";

  auto add_common = [&](CLI::App* c, bool need_config) {
    auto* copt = c->add_option("--config", config_path, "key = value config file");
    if (need_config) copt->required();
    c->add_option("--dataset", datasets, "dataset CSV path");
    c->add_option("--out", out_dir, "output directory");
    c->add_option("--seed", o.seed, "seed override");
    c->add_option("--depth", o.depth, "number of layers override");
    c->add_option("--samples", o.samples, "prior sample count override");
  };

  CLI::App* tr = app.add_subcommand("train", "fit a model, write checkpoint + history");
  add_common(tr, true);
  tr->add_option("--checkpoint", checkpoint_path, "resume from this checkpoint");

  CLI::App* ev = app.add_subcommand("eval", "metrics of a checkpoint on a split");
  add_common(ev, false);
  ev->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  ev->add_option("--r-test", r_test, "mixture components (default from config)");
  ev->add_option("--portion", portion, "evaluate 'test' (default) or 'train' rows")
      ->check(CLI::IsMember({"test", "train"}));

  CLI::App* pr = app.add_subcommand("predict", "per-point mixture predictions");
  add_common(pr, false);
  pr->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  pr->add_option("--r-test", r_test, "mixture components (default from config)");

  CLI::App* sp = app.add_subcommand("sample-prior", "prior function draws on a grid");
  add_common(sp, false);
  sp->add_option("--checkpoint", checkpoint_path, "optional trained checkpoint");
  sp->add_option("--dim", dim, "input dimension swept on the grid (0-based)");

  CLI::App* bm = app.add_subcommand("benchmark", "dataset x depth x split grid");
  add_common(bm, true);
  bm->add_option("--depths", depths_text, "comma-separated depth list");
  bm->add_option("--splits", splits, "number of train/test splits");

  CLI::App* ab = app.add_subcommand("ablate-samples", "sweep the prior sample count");
  add_common(ab, true);
  ab->add_option("--samples-list", samples_text, "comma-separated S list");
  ab->add_option("--splits", ablate_splits, "number of train/test splits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (!datasets.empty()) o.dataset = datasets.front();
  try {
    if (app.got_subcommand(tr))
      return cmd_train(config_path, o, checkpoint_path, out_dir);
    if (app.got_subcommand(ev))
      return cmd_eval(config_path, o, checkpoint_path, out_dir, r_test, portion);
    if (app.got_subcommand(pr))
      return cmd_predict(config_path, o, checkpoint_path, out_dir, r_test);
    if (app.got_subcommand(sp))
      return cmd_sample_prior(config_path, o, checkpoint_path, out_dir, dim);
    if (app.got_subcommand(bm))
      return cmd_benchmark(config_path, o, datasets, out_dir, depths_text, splits);
    if (app.got_subcommand(ab))
      return cmd_ablate_samples(config_path, o, out_dir, samples_text, ablate_splits);
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
