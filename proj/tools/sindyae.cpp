#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "sindyae/datagen.hpp"
#include "sindyae/eval.hpp"
#include "sindyae/io.hpp"
#include "sindyae/stlsq.hpp"
#include "sindyae/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { ok = 0, failure = 1, usage = 2, consistency = 3, corruption = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

// Timestamps and durations live only here so every other output is
// byte-identical across reruns.
void write_run_manifest(const fs::path& dir, const std::string& command, json details,
                        Clock::time_point started) {
  details["command"] = command;
  details["tool_version"] = sindyae::version_string();
  details["created_utc"] = utc_timestamp();
  details["wall_clock_seconds"] = std::chrono::duration<double>(Clock::now() - started).count();
  sindyae::write_json(dir / "manifest.json", details);
}

int worker_threads(int requested) {
  int cap = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SINDY_AE_THREADS")) {
    try {
      cap = std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw UsageError(std::string("SINDY_AE_THREADS is not an integer: ") + env);
    }
  }
  return std::clamp(requested, 1, cap);
}

std::vector<double> parse_vector(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": expected comma-separated numbers");
  return out;
}

sindyae::RowVector to_row(const std::vector<double>& v) {
  sindyae::RowVector r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Eigen::Index>(i)) = v[i];
  return r;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string system;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::string out;
  bool latent = false;
};

sindyae::Dataset latent_only(const sindyae::Dataset& d) {
  sindyae::Dataset out;
  out.x = *d.latent;
  out.dx = *d.dlatent;
  if (d.ddlatent) out.ddx = *d.ddlatent;
  out.dt = d.dt;
  out.trajectories = d.trajectories;
  out.metadata = d.metadata;
  out.metadata["coordinates"] = "latent";
  return out;
}

int cmd_gen_data(const GenDataArgs& a, const std::string& command) {
  const auto started = Clock::now();
  const bool paper = a.preset == "paper";
  sindyae::DatasetSplits splits;
  if (a.system == "lorenz") {
    splits = sindyae::generate_lorenz(paper ? sindyae::lorenz_paper_preset(a.seed)
                                            : sindyae::lorenz_desk_preset(a.seed));
  } else if (a.system == "reaction-diffusion") {
    if (a.latent) throw UsageError("--latent is only available for lorenz and pendulum");
    splits = sindyae::generate_reaction_diffusion(
        paper ? sindyae::reaction_diffusion_paper_preset(a.seed)
              : sindyae::reaction_diffusion_desk_preset(a.seed));
  } else {
    splits = sindyae::generate_pendulum(paper ? sindyae::pendulum_paper_preset(a.seed)
                                              : sindyae::pendulum_desk_preset(a.seed));
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  const std::pair<const char*, sindyae::Dataset*> parts[] = {
      {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
  json hashes;
  for (const auto& [name, data] : parts) {
    sindyae::write_dataset(out / name, a.latent ? latent_only(*data) : *data);
    hashes[name] = sindyae::dataset_hash(out / name);
  }
  json details = splits.manifest;
  details["dataset_hash"] = hashes;
  details["coordinates"] = a.latent ? "latent" : "snapshot";
  details["seeds"] = {a.seed};
  write_run_manifest(out, command, details, started);
  std::cout << "wrote " << a.system << " (" << a.preset << ") to " << out.string() << ": "
            << splits.train.samples() << "/" << splits.val.samples() << "/" << splits.test.samples()
            << " samples, n = " << (a.latent ? splits.train.latent->cols() : splits.train.x.cols())
            << "\n";
  return ok;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  int seeds = 1;
  std::string out;
  std::optional<std::uint64_t> seed;
};

fs::path split_dir(const fs::path& data, const char* name) {
  const fs::path dir = data / name;
  return fs::exists(dir / "manifest.json") ? dir : fs::path();
}

int cmd_train(const TrainArgs& a, const std::string& command) {
  const auto started = Clock::now();
  sindyae::TrainConfig config;
  try {
    config = sindyae::read_train_config(a.config);
  } catch (const std::invalid_argument& e) {
    throw ConsistencyError(e.what());
  }
  if (a.seed) config.seed = *a.seed;
  const fs::path data(a.data);
  const fs::path train_dir = split_dir(data, "train");
  if (train_dir.empty()) throw sindyae::DataCorruptionError(data.string() + ": no train/manifest.json");
  const sindyae::Dataset train = sindyae::read_dataset(train_dir);
  if (static_cast<int>(train.dim()) != config.input_dim) {
    std::ostringstream msg;
    msg << "dataset n = " << train.dim() << " but config input_dim = " << config.input_dim;
    throw ConsistencyError(msg.str());
  }
  if (config.library.model_order == 2 && !train.ddx)
    throw ConsistencyError("config has model order 2 but the dataset has no ddX");
  std::optional<sindyae::Dataset> val, test;
  if (auto dir = split_dir(data, "val"); !dir.empty()) val = sindyae::read_dataset(dir);
  if (auto dir = split_dir(data, "test"); !dir.empty()) test = sindyae::read_dataset(dir);
  const sindyae::Dataset& selection_set = val ? *val : train;
  const sindyae::Dataset& report_set = test ? *test : selection_set;

  const fs::path out(a.out);
  fs::create_directories(out);
  const int threads = worker_threads(a.seeds);
  std::cerr << "training " << a.seeds << " seed(s) from " << config.seed << " on "
            << train.samples() << " samples with " << threads << " worker(s)\n";
  const auto outcomes =
      sindyae::run_multi_seed(train, val ? &*val : nullptr, config, a.seeds, threads);

  std::vector<sindyae::ModelCandidate> candidates;
  std::vector<std::size_t> candidate_run;
  json runs = json::array();
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto& o = outcomes[k];
    const std::uint64_t seed = sindyae::run_seed(config, static_cast<int>(k));
    const std::string suffix = "_seed" + std::to_string(seed);
    sindyae::write_history_csv(out / ("history" + suffix + ".csv"), o.history);
    json run = {{"seed", seed}, {"failed", o.failed}};
    if (o.failed) {
      run["failure"] = o.failure;
      sindyae::write_json(out / ("eval" + suffix + ".json"), run);
      runs.push_back(run);
      continue;
    }
    sindyae::write_json(out / ("model" + suffix + ".json"), sindyae::model_to_json(o.model));
    const auto selection = sindyae::evaluate_model(&o.model.network, o.model.sindy, selection_set, false);
    const auto report = sindyae::evaluate_model(&o.model.network, o.model.sindy, report_set, true);
    json eval = {{"seed", seed},
                 {"validation", sindyae::to_json(selection)},
                 {"test", sindyae::to_json(report)}};
    sindyae::write_json(out / ("eval" + suffix + ".json"), eval);
    candidates.push_back({selection.active_terms, selection.fuv_dx, seed});
    candidate_run.push_back(k);
    run["active_terms"] = selection.active_terms;
    run["validation_fuv_dx"] = selection.fuv_dx;
    run["test_fuv_dx"] = report.fuv_dx;
    runs.push_back(run);
  }

  json details = {{"config", sindyae::to_json(config)},
                  {"dataset_hash", sindyae::dataset_hash(train_dir)},
                  {"seeds", json::array()},
                  {"runs", runs}};
  for (int k = 0; k < a.seeds; ++k) details["seeds"].push_back(sindyae::run_seed(config, k));
  if (candidates.empty()) {
    write_run_manifest(out, command, details, started);
    std::cerr << "every run failed\n";
    return failure;
  }
  const std::size_t best = candidate_run[sindyae::select_model(candidates)];
  const auto& model = outcomes[best].model;
  details["selected_seed"] = model.config.seed;
  write_run_manifest(out, command, details, started);

  std::cout << "selected seed " << model.config.seed << " (" << model.sindy.active_terms()
            << " active terms, validation FUV " << std::setprecision(4)
            << candidates[sindyae::select_model(candidates)].validation_fuv << ")\n";
  for (const auto& line : sindyae::render_equations(model.sindy)) std::cout << "  " << line << "\n";
  return ok;
}

// ---------------------------------------------------------------------------
// eval / simulate / stlsq
// ---------------------------------------------------------------------------

fs::path resolve_dataset(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) {
    const json m = sindyae::read_json(dir / "manifest.json");
    if (m.value("format", "") == "sindyae-dataset") return dir;
  }
  for (const char* name : {"test", "val", "train"})
    if (auto sub = split_dir(dir, name); !sub.empty()) return sub;
  throw sindyae::DataCorruptionError(dir.string() + ": not a dataset directory");
}

int cmd_eval(const std::string& model_path, const std::string& data_dir, const std::string& out_path,
             bool simulate) {
  const auto model = sindyae::read_model(model_path);
  const sindyae::Dataset data = sindyae::read_dataset(resolve_dataset(data_dir));
  const auto expected = model.network ? model.network->encoder.input_width()
                                      : static_cast<Eigen::Index>(model.sindy.spec.state_dim);
  if (static_cast<Eigen::Index>(data.dim()) != expected) {
    std::ostringstream msg;
    msg << "dataset n = " << data.dim() << " but model expects " << expected;
    throw ConsistencyError(msg.str());
  }
  if (model.sindy.spec.model_order == 2 && !data.ddx)
    throw ConsistencyError("second-order model needs a dataset with ddX");
  const auto report = sindyae::evaluate_model(model.network ? &*model.network : nullptr, model.sindy,
                                              data, simulate);
  const std::string text = sindyae::to_json(report).dump(2);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream(out_path) << text << "\n";
  }
  for (const auto& line : report.rendered) std::cerr << line << "\n";
  return ok;
}

struct SimulateArgs {
  std::string model;
  std::string z0;
  std::string dz0;
  double t_end = 1.0;
  double dt = 0.01;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  if (!(a.dt > 0.0)) throw UsageError("--dt must be positive");
  if (!(a.t_end > 0.0)) throw UsageError("--t-end must be positive");
  const auto model = sindyae::read_model(a.model);
  const int d = model.sindy.spec.state_dim;
  const auto z0 = to_row(parse_vector(a.z0, "--z0"));
  if (z0.size() != d) {
    std::ostringstream msg;
    msg << "--z0 has " << z0.size() << " values but the model has d = " << d;
    throw ConsistencyError(msg.str());
  }
  std::optional<sindyae::RowVector> dz0;
  if (model.sindy.spec.model_order == 2) {
    if (a.dz0.empty()) throw UsageError("second-order model needs --dz0");
    dz0 = to_row(parse_vector(a.dz0, "--dz0"));
    if (dz0->size() != d) throw ConsistencyError("--dz0 length differs from d");
  }
  sindyae::SimulationResult sim;
  try {
    sim = sindyae::simulate_model(model.sindy, z0, dz0, a.t_end, a.dt);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open " + a.out);
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out << "t";
  for (int k = 1; k <= d; ++k) out << ",z" << k;
  if (dz0)
    for (int k = 1; k <= d; ++k) out << ",dz" << k;
  out << "\n" << std::setprecision(17);
  const auto& s = sim.trajectory.states;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    out << sim.trajectory.times[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < s.cols(); ++j) out << "," << s(i, j);
    out << "\n";
  }
  if (sim.diverged) {
    std::cerr << "simulation diverged at t = " << sim.trajectory.times.back() << "\n";
  }
  return ok;
}

struct StlsqArgs {
  std::string csv;
  double threshold = 0.1;
  int poly_order = 3;
  bool sine = false;
  int max_iters = 10;
  std::string out;
};

int cmd_stlsq(const StlsqArgs& a) {
  if (a.poly_order < 0) throw UsageError("--poly-order must be >= 0");
  const auto table = sindyae::read_csv(a.csv);
  int d = 0;
  while (table.column("z" + std::to_string(d + 1)) >= 0) ++d;
  if (d == 0) throw sindyae::DataCorruptionError(a.csv + ": header has no z1 column");
  sindyae::Matrix z(table.values.rows(), d), dz(table.values.rows(), d);
  for (int k = 0; k < d; ++k) {
    const int zc = table.column("z" + std::to_string(k + 1));
    const int dc = table.column("dz" + std::to_string(k + 1));
    if (dc < 0) throw sindyae::DataCorruptionError(a.csv + ": header lacks dz" + std::to_string(k + 1));
    z.col(k) = table.values.col(zc);
    dz.col(k) = table.values.col(dc);
  }
  const sindyae::LibrarySpec spec{d, a.poly_order, a.sine, 1};
  const auto theta = sindyae::evaluate_library(z, spec);
  const auto result = sindyae::stlsq(theta, dz, a.threshold, a.max_iters);
  if (result.underdetermined) std::cerr << "warning: fewer samples than library terms\n";
  if (result.rank_deficient) std::cerr << "warning: rank-deficient active set, minimum-norm solution used\n";
  sindyae::SindyModel model{spec, result.xi, result.active};
  for (const auto& line : sindyae::render_equations(model)) std::cout << line << "\n";
  if (!a.out.empty()) {
    json j = sindyae::sindy_model_to_json(model);
    j["stlsq"] = {{"threshold", a.threshold},
                  {"iterations", result.iterations},
                  {"residual_norms", result.residual_norms}};
    sindyae::write_json(a.out, j);
  }
  return ok;
}

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  sindyae::retain_large_allocations();
  CLI::App app{"Joint discovery of coordinates and sparse dynamics (SINDy autoencoders)"};
  app.set_version_flag("--version", sindyae::version_string());
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a benchmark dataset");
  gen_cmd->add_option("--system", gen.system, "lorenz | reaction-diffusion | pendulum")
      ->required()
      ->check(CLI::IsMember({"lorenz", "reaction-diffusion", "pendulum"}));
  gen_cmd->add_option("--preset", gen.preset, "paper | desk")
      ->capture_default_str()
      ->check(CLI::IsMember({"paper", "desk"}));
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_flag("--latent", gen.latent, "Write the latent state instead of snapshots");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train autoencoder + SINDy models");
  train_cmd->add_option("--data", tr.data, "Dataset directory from gen-data")->required();
  train_cmd->add_option("--config", tr.config, "Training config JSON")->required();
  train_cmd->add_option("--seeds", tr.seeds, "Number of seeds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "Override the config's base seed");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  std::string eval_model, eval_data, eval_out;
  bool eval_simulate = true;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--out", eval_out, "Write the report here instead of stdout");
  eval_cmd->add_flag("!--no-simulate", eval_simulate, "Skip the divergence-time simulation");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate a discovered model");
  sim_cmd->add_option("--model", sim.model, "Model JSON")->required();
  sim_cmd->add_option("--z0", sim.z0, "Initial state, comma separated")->required();
  sim_cmd->add_option("--dz0", sim.dz0, "Initial velocity for second-order models");
  sim_cmd->add_option("--t-end", sim.t_end, "Final time")->capture_default_str();
  sim_cmd->add_option("--dt", sim.dt, "Step size")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "CSV path (stdout when omitted)");

  StlsqArgs st;
  auto* stlsq_cmd = app.add_subcommand("stlsq", "Classic SINDy on low-dimensional CSV data");
  stlsq_cmd->add_option("--csv", st.csv, "CSV with columns z1..zd and dz1..dzd")->required();
  stlsq_cmd->add_option("--threshold", st.threshold, "Threshold")->capture_default_str();
  stlsq_cmd->add_option("--poly-order", st.poly_order, "Polynomial order")->capture_default_str();
  stlsq_cmd->add_flag("--sine", st.sine, "Include sine terms");
  stlsq_cmd->add_option("--max-iters", st.max_iters, "Iteration cap")->capture_default_str();
  stlsq_cmd->add_option("--out", st.out, "Write the model JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  const std::string command = joined_args(argc, argv);
  try {
    if (*gen_cmd) return cmd_gen_data(gen, command);
    if (*train_cmd) return cmd_train(tr, command);
    if (*eval_cmd) return cmd_eval(eval_model, eval_data, eval_out, eval_simulate);
    if (*sim_cmd) return cmd_simulate(sim);
    if (*stlsq_cmd) return cmd_stlsq(st);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const ConsistencyError& e) {
    std::cerr << "inconsistent inputs: " << e.what() << "\n";
    return consistency;
  } catch (const sindyae::DimensionError& e) {
    std::cerr << "inconsistent inputs: " << e.what() << "\n";
    return consistency;
  } catch (const sindyae::DataCorruptionError& e) {
    std::cerr << "corrupt input: " << e.what() << "\n";
    return corruption;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return usage;
}
