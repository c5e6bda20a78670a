#include "sindyae/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sindyae {

namespace {

std::size_t sample_count(double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("t_end and dt must be positive");
  return static_cast<std::size_t>(std::llround(t_end / dt));
}

nlohmann::json base_metadata(const std::string& system, const std::string& preset,
                             std::uint64_t seed, const std::string& split) {
  return {{"system", system},
          {"preset", preset},
          {"paper_scale", preset == "paper"},
          {"seed", seed},
          {"split", split}};
}

// Contiguous runs of consecutive source indices become trajectory spans.
std::vector<TrajectorySpan> runs_of(const std::vector<std::size_t>& indices) {
  std::vector<TrajectorySpan> spans;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (k == 0 || indices[k] != indices[k - 1] + 1)
      spans.push_back({k, 1});
    else
      ++spans.back().length;
  }
  return spans;
}

}  // namespace

void Dataset::validate() const {
  if (dx.rows() != x.rows() || dx.cols() != x.cols())
    throw DimensionError("Dataset: dX shape differs from X");
  if (ddx && (ddx->rows() != x.rows() || ddx->cols() != x.cols()))
    throw DimensionError("Dataset: ddX shape differs from X");
  std::size_t covered = 0;
  for (const auto& t : trajectories) {
    if (t.start != covered) throw std::invalid_argument("Dataset: trajectories must partition rows");
    covered += t.length;
  }
  if (!trajectories.empty() && covered != samples())
    throw std::invalid_argument("Dataset: trajectories must partition rows");
}

Dataset Dataset::rows(const std::vector<std::size_t>& indices) const {
  auto take = [&](const Matrix& src) {
    Matrix out(static_cast<Eigen::Index>(indices.size()), src.cols());
    for (std::size_t k = 0; k < indices.size(); ++k)
      out.row(static_cast<Eigen::Index>(k)) = src.row(static_cast<Eigen::Index>(indices[k]));
    return out;
  };
  Dataset out;
  out.x = take(x);
  out.dx = take(dx);
  if (ddx) out.ddx = take(*ddx);
  if (latent) out.latent = take(*latent);
  if (dlatent) out.dlatent = take(*dlatent);
  if (ddlatent) out.ddlatent = take(*ddlatent);
  out.dt = dt;
  out.metadata = metadata;
  out.trajectories = runs_of(indices);
  return out;
}

// ---------------------------------------------------------------------------
// Lorenz
// ---------------------------------------------------------------------------

LorenzOptions lorenz_paper_preset(std::uint64_t seed) {
  LorenzOptions o;
  o.seed = seed;
  return o;
}

LorenzOptions lorenz_desk_preset(std::uint64_t seed) {
  LorenzOptions o;
  o.n_ic_train = 64;
  o.n_ic_val = 8;
  o.n_ic_test = 16;
  o.seed = seed;
  o.preset = "desk";
  return o;
}

void lorenz_rhs(const Vector& z, Vector& dz, double sigma, double rho, double beta) {
  dz.resize(3);
  dz(0) = sigma * (z(1) - z(0));
  dz(1) = z(0) * (rho - z(2)) - z(1);
  dz(2) = z(0) * z(1) - beta * z(2);
}

std::pair<Matrix, Matrix> lorenz_lift(const Matrix& z, const Matrix& dz, const Matrix& modes) {
  if (z.cols() != 3 || dz.cols() != 3 || modes.cols() != 6)
    throw DimensionError("lorenz_lift expects 3 latent variables and 6 modes");
  const Eigen::Index m = z.rows();
  Matrix g(m, 6), dg(m, 6);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double v = z(i, k);
      g(i, k) = v;
      g(i, 3 + k) = v * v * v;
      dg(i, k) = dz(i, k);
      dg(i, 3 + k) = 3.0 * v * v * dz(i, k);
    }
  }
  return {g * modes.transpose(), dg * modes.transpose()};
}

std::pair<Matrix, Matrix> lorenz_trajectory(const LorenzOptions& opt, const Vector& z0) {
  const std::size_t n = sample_count(opt.t_end, opt.dt);
  const RhsFunction rhs = [&](double, const Vector& s, Vector& ds) {
    lorenz_rhs(s, ds, opt.sigma, opt.rho, opt.beta);
  };
  auto traj = rk4_integrate(rhs, z0, 0.0, static_cast<double>(n - 1) * opt.dt, opt.dt);
  Matrix dz(traj.states.rows(), 3);
  Vector s(3), ds(3);
  for (Eigen::Index i = 0; i < traj.states.rows(); ++i) {
    s = traj.states.row(i).transpose();
    lorenz_rhs(s, ds, opt.sigma, opt.rho, opt.beta);
    dz.row(i) = ds.transpose();
  }
  return {std::move(traj.states), std::move(dz)};
}

namespace {

Dataset lorenz_split(const LorenzOptions& opt, int n_ic, std::uint64_t stream,
                     const std::string& split, const Matrix& modes) {
  RngStream rng(split_seed(opt.seed, stream));
  const std::size_t per = sample_count(opt.t_end, opt.dt);
  const auto total = static_cast<Eigen::Index>(per * static_cast<std::size_t>(n_ic));
  Matrix z(total, 3), dz(total, 3);
  Dataset ds;
  for (int ic = 0; ic < n_ic; ++ic) {
    Vector z0(3);
    z0(0) = rng.uniform(-36.0, 36.0);
    z0(1) = rng.uniform(-48.0, 48.0);
    z0(2) = rng.uniform(-16.0, 66.0);
    auto [zt, dzt] = lorenz_trajectory(opt, z0);
    const auto start = static_cast<Eigen::Index>(per * static_cast<std::size_t>(ic));
    z.middleRows(start, zt.rows()) = zt;
    dz.middleRows(start, dzt.rows()) = dzt;
    ds.trajectories.push_back({static_cast<std::size_t>(start), per});
  }
  auto [x, dx] = lorenz_lift(opt.latent_scale * z, opt.latent_scale * dz, modes);
  ds.x = std::move(x);
  ds.dx = std::move(dx);
  ds.dt = opt.dt;
  ds.latent = std::move(z);
  ds.dlatent = std::move(dz);
  ds.metadata = base_metadata("lorenz", opt.preset, opt.seed, split);
  ds.metadata["parameters"] = {{"sigma", opt.sigma}, {"rho", opt.rho},   {"beta", opt.beta},
                               {"n_grid", opt.n_grid}, {"t_end", opt.t_end}, {"dt", opt.dt},
                               {"latent_scale", opt.latent_scale}, {"n_ic", n_ic}};
  return ds;
}

}  // namespace

DatasetSplits generate_lorenz(const LorenzOptions& opt) {
  const Matrix modes = legendre_modes(static_cast<std::size_t>(opt.n_grid), 6);
  DatasetSplits out;
  out.train = lorenz_split(opt, opt.n_ic_train, 0, "train", modes);
  out.val = lorenz_split(opt, opt.n_ic_val, 1, "val", modes);
  out.test = lorenz_split(opt, opt.n_ic_test, 2, "test", modes);
  out.manifest = {{"system", "lorenz"},
                  {"preset", opt.preset},
                  {"seed", opt.seed},
                  {"n_ic", {{"train", opt.n_ic_train}, {"val", opt.n_ic_val}, {"test", opt.n_ic_test}}},
                  {"samples",
                   {{"train", out.train.samples()}, {"val", out.val.samples()}, {"test", out.test.samples()}}}};
  return out;
}

// ---------------------------------------------------------------------------
// Reaction-diffusion
// ---------------------------------------------------------------------------

ReactionDiffusionOptions reaction_diffusion_paper_preset(std::uint64_t seed) {
  ReactionDiffusionOptions o;
  o.seed = seed;
  return o;
}

ReactionDiffusionOptions reaction_diffusion_desk_preset(std::uint64_t seed) {
  ReactionDiffusionOptions o;
  o.grid = 64;
  o.t_end = 50.0;
  o.seed = seed;
  o.preset = "desk";
  return o;
}

namespace {

std::string cfl_message(double dt, double suggested) {
  std::ostringstream msg;
  msg << "reaction-diffusion step dt=" << dt << " violates the RK4 diffusion stability limit; "
      << "use dt <= " << suggested << " (or more substeps)";
  return msg.str();
}

}  // namespace

CflError::CflError(double dt, double suggested_dt)
    : std::invalid_argument(cfl_message(dt, suggested_dt)), suggested_(suggested_dt) {}

ReactionDiffusionSolver::ReactionDiffusionSolver(const ReactionDiffusionOptions& opt)
    : grid_(opt.grid),
      half_width_(opt.half_width),
      h_(2.0 * opt.half_width / opt.grid),
      d1_(opt.d1),
      d2_(opt.d2),
      beta_(opt.beta) {
  if (opt.grid < 16) throw std::invalid_argument("reaction-diffusion grid must be >= 16 per axis");
}

double ReactionDiffusionSolver::max_stable_dt() const {
  // RK4 stability interval on the negative real axis is about [-2.785, 0];
  // the periodic 5-point Laplacian has spectral radius 8 / h^2.
  const double dmax = std::max(d1_, d2_);
  if (dmax <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.785 * h_ * h_ / (8.0 * dmax);
}

void ReactionDiffusionSolver::rhs(const Vector& state, Vector& out) const {
  const int n = grid_;
  const Eigen::Index cells = static_cast<Eigen::Index>(n) * n;
  out.resize(2 * cells);
  const double inv_h2 = 1.0 / (h_ * h_);
  auto idx = [n](int row, int col) {
    return static_cast<Eigen::Index>(((row + n) % n) * n + ((col + n) % n));
  };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Eigen::Index k = idx(r, c);
      const double u = state(k);
      const double v = state(cells + k);
      const double lap_u = (state(idx(r - 1, c)) + state(idx(r + 1, c)) + state(idx(r, c - 1)) +
                            state(idx(r, c + 1)) - 4.0 * u) *
                           inv_h2;
      const double lap_v = (state(cells + idx(r - 1, c)) + state(cells + idx(r + 1, c)) +
                            state(cells + idx(r, c - 1)) + state(cells + idx(r, c + 1)) - 4.0 * v) *
                           inv_h2;
      const double r2 = u * u + v * v;
      out(k) = (1.0 - r2) * u + beta_ * r2 * v + d1_ * lap_u;
      out(cells + k) = -beta_ * r2 * u + (1.0 - r2) * v + d2_ * lap_v;
    }
  }
}

void ReactionDiffusionSolver::step(Vector& state, double dt) const {
  const RhsFunction f = [this](double, const Vector& s, Vector& ds) { rhs(s, ds); };
  rk4_step(f, 0.0, dt, state);
}

Vector ReactionDiffusionSolver::spiral_initial_condition() const {
  const Eigen::Index cells = static_cast<Eigen::Index>(grid_) * grid_;
  Vector s(2 * cells);
  for (int r = 0; r < grid_; ++r) {
    for (int c = 0; c < grid_; ++c) {
      const double y1 = coordinate(c);
      const double y2 = coordinate(r);
      const double radius = std::hypot(y1, y2);
      const double angle = std::atan2(y2, y1);
      const Eigen::Index k = static_cast<Eigen::Index>(r) * grid_ + c;
      s(k) = std::tanh(radius * std::cos(angle - radius));
      s(cells + k) = std::tanh(radius * std::sin(angle - radius));
    }
  }
  return s;
}

Vector ReactionDiffusionSolver::homogeneous_initial_condition(double amplitude, double phase) const {
  const Eigen::Index cells = static_cast<Eigen::Index>(grid_) * grid_;
  Vector s(2 * cells);
  s.head(cells).setConstant(amplitude * std::cos(phase));
  s.tail(cells).setConstant(amplitude * std::sin(phase));
  return s;
}

RowVector ReactionDiffusionSolver::gaussian_mask() const {
  RowVector mask(static_cast<Eigen::Index>(grid_) * grid_);
  for (int r = 0; r < grid_; ++r)
    for (int c = 0; c < grid_; ++c) {
      const double y1 = coordinate(c);
      const double y2 = coordinate(r);
      mask(static_cast<Eigen::Index>(r) * grid_ + c) = std::exp(-0.1 * (y1 * y1 + y2 * y2));
    }
  return mask;
}

ReactionDiffusionRun simulate_reaction_diffusion(const ReactionDiffusionOptions& opt,
                                                 const Vector& initial_state) {
  const ReactionDiffusionSolver solver(opt);
  if (opt.substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  const double h = opt.dt / opt.substeps;
  const double limit = solver.max_stable_dt();
  if (h > limit) throw CflError(opt.dt, 0.9 * limit * opt.substeps);

  const std::size_t n = sample_count(opt.t_end, opt.dt);
  const Eigen::Index cells = static_cast<Eigen::Index>(opt.grid) * opt.grid;
  if (initial_state.size() != 2 * cells) throw DimensionError("initial state must be 2 * grid^2");
  const RowVector mask = solver.gaussian_mask();

  ReactionDiffusionRun run;
  run.x.resize(static_cast<Eigen::Index>(n), cells);
  run.dx.resize(static_cast<Eigen::Index>(n), cells);
  Vector state = initial_state;
  Vector deriv;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0)
      for (int s = 0; s < opt.substeps; ++s) solver.step(state, h);
    if (!state.allFinite()) throw std::runtime_error("reaction-diffusion state became non-finite");
    solver.rhs(state, deriv);
    const auto row = static_cast<Eigen::Index>(k);
    run.x.row(row) = state.head(cells).transpose().cwiseProduct(mask);
    run.dx.row(row) = deriv.head(cells).transpose().cwiseProduct(mask);
    run.times.push_back(static_cast<double>(k) * opt.dt);
  }
  return run;
}

DatasetSplits generate_reaction_diffusion(const ReactionDiffusionOptions& opt) {
  const ReactionDiffusionSolver solver(opt);
  auto run = simulate_reaction_diffusion(opt, solver.spiral_initial_condition());

  Dataset raw;
  raw.x = std::move(run.x);
  raw.dx = std::move(run.dx);
  if (opt.noise_std > 0.0) {
    RngStream noise(split_seed(opt.seed, 100));
    for (Eigen::Index i = 0; i < raw.x.size(); ++i) raw.x.data()[i] += opt.noise_std * noise.normal();
    for (Eigen::Index i = 0; i < raw.dx.size(); ++i) raw.dx.data()[i] += opt.noise_std * noise.normal();
  }
  raw.dt = opt.dt;
  raw.trajectories.push_back({0, raw.samples()});
  raw.metadata = base_metadata("reaction-diffusion", opt.preset, opt.seed, "all");
  raw.metadata["parameters"] = {{"grid", opt.grid},   {"half_width", opt.half_width},
                                {"t_end", opt.t_end}, {"dt", opt.dt},
                                {"substeps", opt.substeps}, {"d1", opt.d1},
                                {"d2", opt.d2},       {"beta", opt.beta},
                                {"noise_std", opt.noise_std},
                                {"boundary", "periodic"}};

  const auto n = raw.samples();
  SplitSpec spec;
  spec.n_test = static_cast<std::size_t>(std::llround(opt.test_fraction * static_cast<double>(n)));
  spec.n_val = static_cast<std::size_t>(std::llround(opt.val_fraction * static_cast<double>(n)));
  auto out = split_and_package(raw, spec, split_seed(opt.seed, 101));
  out.manifest["system"] = "reaction-diffusion";
  out.manifest["preset"] = opt.preset;
  return out;
}

// ---------------------------------------------------------------------------
// Pendulum
// ---------------------------------------------------------------------------

PendulumOptions pendulum_paper_preset(std::uint64_t seed) {
  PendulumOptions o;
  o.seed = seed;
  return o;
}

PendulumOptions pendulum_desk_preset(std::uint64_t seed) {
  PendulumOptions o;
  o.n_ic_train = 20;
  o.n_ic_val = 5;
  o.n_ic_test = 10;
  o.seed = seed;
  o.preset = "desk";
  return o;
}

bool pendulum_ic_accepted(double z0, double dz0, double bound) {
  return std::abs(0.5 * dz0 * dz0 - std::cos(z0)) <= bound;
}

PendulumFrame render_pendulum(double z, int grid, double extent) {
  // q = (y1 - sin z)^2 + (y2 + cos z)^2, x = exp(-20 q)
  const double sz = std::sin(z);
  const double cz = std::cos(z);
  const Eigen::Index pixels = static_cast<Eigen::Index>(grid) * grid;
  PendulumFrame f{RowVector(pixels), RowVector(pixels), RowVector(pixels)};
  for (int r = 0; r < grid; ++r) {
    const double y2 = -extent + 2.0 * extent * r / (grid - 1);
    for (int c = 0; c < grid; ++c) {
      const double y1 = -extent + 2.0 * extent * c / (grid - 1);
      const double a = y1 - sz;
      const double b = y2 + cz;
      const double g = std::exp(-20.0 * (a * a + b * b));
      const double dq = -2.0 * y1 * cz - 2.0 * y2 * sz;
      const double ddq = 2.0 * y1 * sz - 2.0 * y2 * cz;
      const Eigen::Index k = static_cast<Eigen::Index>(r) * grid + c;
      f.x(k) = g;
      f.dx_dz(k) = -20.0 * g * dq;
      f.d2x_dz2(k) = g * (400.0 * dq * dq - 20.0 * ddq);
    }
  }
  return f;
}

namespace {

Dataset pendulum_split(const PendulumOptions& opt, int n_ic, std::uint64_t stream,
                       const std::string& split) {
  RngStream rng(split_seed(opt.seed, stream));
  const std::size_t per = sample_count(opt.t_end, opt.dt);
  const Eigen::Index pixels = static_cast<Eigen::Index>(opt.grid) * opt.grid;
  const auto total = static_cast<Eigen::Index>(per * static_cast<std::size_t>(n_ic));
  Dataset ds;
  ds.x.resize(total, pixels);
  ds.dx.resize(total, pixels);
  ds.ddx = Matrix(total, pixels);
  ds.latent = Matrix(total, 1);
  ds.dlatent = Matrix(total, 1);
  ds.ddlatent = Matrix(total, 1);

  const RhsFunction rhs = [](double, const Vector& s, Vector& ds_) {
    ds_.resize(2);
    ds_(0) = s(1);
    ds_(1) = -std::sin(s(0));
  };
  for (int ic = 0; ic < n_ic; ++ic) {
    double z0 = 0.0;
    double dz0 = 0.0;
    do {
      z0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
      dz0 = rng.uniform(-2.1, 2.1);
    } while (!pendulum_ic_accepted(z0, dz0, opt.energy_bound));
    Vector s0(2);
    s0 << z0, dz0;
    const auto traj = rk4_integrate(rhs, s0, 0.0, static_cast<double>(per - 1) * opt.dt, opt.dt);
    const auto start = static_cast<Eigen::Index>(per * static_cast<std::size_t>(ic));
    for (Eigen::Index i = 0; i < traj.states.rows(); ++i) {
      const double z = traj.states(i, 0);
      const double dz = traj.states(i, 1);
      const double ddz = -std::sin(z);
      const auto frame = render_pendulum(z, opt.grid, opt.extent);
      const Eigen::Index row = start + i;
      ds.x.row(row) = frame.x;
      ds.dx.row(row) = frame.dx_dz * dz;
      ds.ddx->row(row) = frame.d2x_dz2 * (dz * dz) + frame.dx_dz * ddz;
      (*ds.latent)(row, 0) = z;
      (*ds.dlatent)(row, 0) = dz;
      (*ds.ddlatent)(row, 0) = ddz;
    }
    ds.trajectories.push_back({static_cast<std::size_t>(start), per});
  }
  ds.dt = opt.dt;
  ds.metadata = base_metadata("pendulum", opt.preset, opt.seed, split);
  ds.metadata["parameters"] = {{"grid", opt.grid},   {"extent", opt.extent}, {"t_end", opt.t_end},
                               {"dt", opt.dt},       {"energy_bound", opt.energy_bound},
                               {"n_ic", n_ic}};
  return ds;
}

}  // namespace

DatasetSplits generate_pendulum(const PendulumOptions& opt) {
  DatasetSplits out;
  out.train = pendulum_split(opt, opt.n_ic_train, 0, "train");
  out.val = pendulum_split(opt, opt.n_ic_val, 1, "val");
  out.test = pendulum_split(opt, opt.n_ic_test, 2, "test");
  out.manifest = {{"system", "pendulum"},
                  {"preset", opt.preset},
                  {"seed", opt.seed},
                  {"n_ic", {{"train", opt.n_ic_train}, {"val", opt.n_ic_val}, {"test", opt.n_ic_test}}},
                  {"samples",
                   {{"train", out.train.samples()}, {"val", out.val.samples()}, {"test", out.test.samples()}}}};
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

SplitIndices split_indices(std::size_t n_samples, const SplitSpec& spec, std::uint64_t seed) {
  if (spec.n_test + spec.n_val > n_samples)
    throw std::invalid_argument("split sizes exceed the number of samples");
  SplitIndices out;
  const std::size_t head = n_samples - spec.n_test;
  for (std::size_t i = head; i < n_samples; ++i) out.test.push_back(i);

  std::vector<std::size_t> pool(head);
  for (std::size_t i = 0; i < head; ++i) pool[i] = i;
  RngStream rng(seed);
  shuffle_indices(pool, rng);
  out.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.n_val));
  std::sort(out.val.begin(), out.val.end());

  std::vector<bool> taken(head, false);
  for (auto i : out.val) taken[i] = true;
  for (std::size_t i = 0; i < head; ++i)
    if (!taken[i]) out.train.push_back(i);
  return out;
}

DatasetSplits split_and_package(const Dataset& raw, const SplitSpec& spec, std::uint64_t seed) {
  raw.validate();
  const auto idx = split_indices(raw.samples(), spec, seed);
  DatasetSplits out;
  out.train = raw.rows(idx.train);
  out.val = raw.rows(idx.val);
  out.test = raw.rows(idx.test);
  out.train.metadata["split"] = "train";
  out.val.metadata["split"] = "val";
  out.test.metadata["split"] = "test";
  out.manifest = {{"split_seed", seed},
                  {"samples",
                   {{"train", idx.train.size()}, {"val", idx.val.size()}, {"test", idx.test.size()}}}};
  return out;
}

}  // namespace sindyae
