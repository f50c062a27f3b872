#include "rigidgraph/datagen.hpp"
#include "rigidgraph/gnn.hpp"
#include "rigidgraph/optimctl.hpp"
#include "rigidgraph/rotation.hpp"
#include "rigidgraph/state.hpp"
#include "rigidgraph/sysid.hpp"
#include "rigidgraph/teacher.hpp"
#include "rigidgraph/types.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rigidgraph;

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// key=value config resolved against a fixed table of defaults; keys not in
// the table are errors so typos cannot silently fall back to defaults.
struct RunConfig {
  std::map<std::string, std::string> values;

  static RunConfig resolve(const std::map<std::string, std::string>& defaults,
                           const std::string& path) {
    RunConfig cfg;
    cfg.values = defaults;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw InvalidInput("config " + path + ":" + std::to_string(lineno) + ": expected key=value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (!defaults.count(key)) throw InvalidInput("unknown config key: " + key);
      cfg.values[key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  const std::string& str(const std::string& key) const { return values.at(key); }
  double num(const std::string& key) const {
    try {
      size_t pos = 0;
      const double v = std::stod(values.at(key), &pos);
      if (pos != values.at(key).size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw InvalidInput("config key " + key + ": not a number: " + values.at(key));
    }
  }
  int integer(const std::string& key) const { return static_cast<int>(num(key)); }
  unsigned long long u64(const std::string& key) const {
    try {
      return std::stoull(values.at(key));
    } catch (const std::exception&) {
      throw InvalidInput("config key " + key + ": not an unsigned integer: " + values.at(key));
    }
  }

  void write_resolved(const fs::path& out, const std::string& command) const {
    std::ofstream f(out / (command + ".resolved.cfg"));
    for (const auto& [k, v] : values) f << k << "=" << v << "\n";
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

void write_theta(const ContactParams& theta, const fs::path& path) {
  std::ofstream f(path);
  const auto a = theta.as_array();
  for (int i = 0; i < ContactParams::kDim; ++i) {
    f << ContactParams::field_name(i) << "=" << fmt(a[i]) << "\n";
  }
}

ContactParams read_theta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open parameter file: " + path);
  std::array<double, ContactParams::kDim> a{};
  std::array<bool, ContactParams::kDim> seen{};
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("parameter file " + path + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    int idx = -1;
    for (int i = 0; i < ContactParams::kDim; ++i) {
      if (key == ContactParams::field_name(i)) idx = i;
    }
    if (idx < 0) throw InvalidInput("parameter file " + path + ": unknown field " + key);
    a[idx] = std::stod(trim(line.substr(eq + 1)));
    seen[idx] = true;
  }
  for (int i = 0; i < ContactParams::kDim; ++i) {
    if (!seen[i]) {
      throw InvalidInput("parameter file " + path + ": missing field " +
                         std::string(ContactParams::field_name(i)));
    }
  }
  return ContactParams::from_array(a);
}

GnnConfig gnn_config_from(const RunConfig& cfg) {
  GnnConfig c;
  c.latent = cfg.integer("latent");
  c.hidden = cfg.integer("hidden");
  c.layers = cfg.integer("layers");
  c.history = cfg.integer("history");
  c.noise_std = cfg.num("noise_std");
  c.d_eps = cfg.num("d_eps");
  c.batch = cfg.integer("batch");
  c.updates = cfg.integer("updates");
  c.lr = cfg.num("lr");
  c.lr_decay = cfg.num("lr_decay");
  c.val_every = cfg.integer("val_every");
  c.threads = cfg.integer("threads");
  c.seed = cfg.u64("seed");
  return c;
}

// Scene from the first frame of a trajectory file, at rest.
SceneState scene_from_trajectory(const std::string& path) {
  const Trajectory traj = load_trajectory(path);
  if (traj.num_steps() < 1) throw InvalidInput("scene file has no frames: " + path);
  SceneState scene;
  scene.specs = traj.specs;
  scene.dt = traj.dt;
  for (int b = 0; b < traj.num_bodies(); ++b) {
    RigidBodyState s;
    s.x = traj.frames[0][b].x;
    s.q = traj.frames[0][b].q;
    scene.states.push_back(s);
  }
  return scene;
}

int cmd_identify(const RunConfig& cfg, const fs::path& out) {
  const std::vector<std::string> demo_paths = split_list(cfg.str("demos"));
  if (demo_paths.empty()) throw InvalidInput("identify: no demo trajectories given");
  IdentDataset dataset;
  for (const auto& p : demo_paths) dataset.demos.push_back(load_trajectory(p));
  const int bodies = dataset.demos.front().num_bodies();
  dataset.weights = VecX::Constant(bodies, cfg.num("weight"));
  const IdentResult res = identify(dataset, ParamBounds::defaults(), cfg.integer("budget"),
                                   static_cast<unsigned long>(cfg.u64("seed")));
  write_theta(res.theta, out / "theta.txt");
  std::ofstream hist(out / "ident_history.csv");
  hist << "generation,loss\n";
  for (size_t g = 0; g < res.history.size(); ++g) hist << g << "," << fmt(res.history[g]) << "\n";
  return 0;
}

int cmd_scale(const RunConfig& cfg, const fs::path& out) {
  const ContactParams theta = read_theta(cfg.str("theta"));
  ScalingSpec spec;
  spec.n_trajectories = cfg.integer("n_trajectories");
  spec.n_objects_min = cfg.integer("n_objects_min");
  spec.n_objects_max = cfg.integer("n_objects_max");
  spec.edge_length_min = cfg.num("edge_length_min");
  spec.edge_length_max = cfg.num("edge_length_max");
  spec.mass_min = cfg.num("mass_min");
  spec.mass_max = cfg.num("mass_max");
  spec.initial_speed_min = cfg.num("initial_speed_min");
  spec.initial_speed_max = cfg.num("initial_speed_max");
  spec.region_min = Vec2(cfg.num("region_min_x"), cfg.num("region_min_y"));
  spec.region_max = Vec2(cfg.num("region_max_x"), cfg.num("region_max_y"));
  spec.steps_per_trajectory = cfg.integer("steps");
  spec.gravity_z = cfg.num("gravity_z");
  spec.seed = static_cast<unsigned long>(cfg.u64("seed"));
  const Dataset ds = scale_dataset(spec, theta);
  save_dataset(ds, (out / "dataset").string(), &spec);
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& out) {
  const Dataset data = load_dataset(cfg.str("dataset"));
  const GnnConfig config = gnn_config_from(cfg);
  GnnModel warm;
  const bool resume = !cfg.str("resume").empty();
  if (resume) warm = load_model(cfg.str("resume"));
  const TrainResult res = train(data, config, resume ? &warm : nullptr);
  save_model(res.model, (out / "model.ckpt").string());
  std::ofstream curve(out / "train_curve.csv");
  curve << "update,train_mse,val_mse\n";
  const int eval_interval = std::max(1, config.updates / 25);
  double val = res.val_curve.empty() ? 0.0 : res.val_curve.front();
  curve << 0 << "," << fmt(val) << "," << fmt(val) << "\n";
  size_t vi = 1;
  for (int u = 1; u <= static_cast<int>(res.curve.size()); ++u) {
    if ((u % eval_interval == 0 || u == config.updates) && vi < res.val_curve.size()) {
      val = res.val_curve[vi++];
    }
    curve << u << "," << fmt(res.curve[u - 1]) << "," << fmt(val) << "\n";
  }
  return 0;
}

int cmd_rollout(const RunConfig& cfg, const fs::path& out) {
  const GnnModel model = load_model(cfg.str("checkpoint"));
  const Trajectory ref = load_trajectory(cfg.str("reference"));
  int steps = cfg.integer("steps");
  if (steps <= 0) steps = ref.num_steps() - 1;
  if (steps < 1 || steps > ref.num_steps() - 1) {
    throw InvalidInput("rollout: reference trajectory too short for requested steps");
  }
  SceneState scene;
  scene.specs = ref.specs;
  scene.dt = ref.dt;
  const auto vels = finite_diff_velocities(ref);
  for (int b = 0; b < ref.num_bodies(); ++b) {
    RigidBodyState s;
    s.x = ref.frames[0][b].x;
    s.q = ref.frames[0][b].q;
    s.v = vels[0][b].v;
    s.w = vels[0][b].w;
    scene.states.push_back(s);
  }
  const Trajectory pred = gnn_rollout(model, scene, steps);
  save_trajectory(pred, (out / "pred.traj").string());
  std::ofstream errs(out / "errors.csv");
  errs << "step,body,pos_error_m,ang_error_rad\n";
  for (int t = 1; t <= steps; ++t) {
    for (int b = 0; b < ref.num_bodies(); ++b) {
      const double pe = (pred.frames[t][b].x - ref.frames[t][b].x).norm();
      const double ae =
          geodesic_angle(quat_to_rotmat(pred.frames[t][b].q), quat_to_rotmat(ref.frames[t][b].q));
      errs << t << "," << b << "," << fmt(pe) << "," << fmt(ae) << "\n";
    }
  }
  return 0;
}

int cmd_optimize(const RunConfig& cfg, const fs::path& out) {
  const GnnModel model = load_model(cfg.str("checkpoint"));
  PushTask task;
  task.scene = scene_from_trajectory(cfg.str("scene"));
  task.pusher_body = cfg.integer("pusher_body");
  task.struck_body = cfg.integer("struck_body");
  task.target = Vec2(cfg.num("target_x"), cfg.num("target_y"));
  task.target_radius = cfg.num("target_radius");
  task.v_max = cfg.num("v_max");
  task.horizon = cfg.integer("horizon");
  const int n_seeds = cfg.integer("seeds");
  if (n_seeds < 1) throw InvalidInput("optimize: seeds must be at least 1");
  const int iters = cfg.integer("iters");
  const double step = cfg.num("step_size");
  const unsigned long long seed0 = cfg.u64("seed");
  const double lo = cfg.num("decision_min"), hi = cfg.num("decision_max");
  for (int i = 0; i < n_seeds; ++i) {
    const unsigned long long s = seed0 + static_cast<unsigned long long>(i);
    if (i == 0 && n_seeds == 1) {
      task.decision = Vec2(cfg.num("decision_x"), cfg.num("decision_y"));
    } else {
      std::mt19937_64 rng(s);
      std::uniform_real_distribution<double> u(lo, hi);
      task.decision = Vec2(u(rng), u(rng));
    }
    const OptimRun run = optimize_push(model, task, iters, step, s);
    const std::string name = n_seeds == 1 ? "optim_run.csv" : "optim_run_" + std::to_string(i) + ".csv";
    std::ofstream csv(out / name);
    csv << "iteration,loss,v_x,v_y\n";
    for (size_t k = 0; k < run.loss_history.size(); ++k) {
      csv << k << "," << fmt(run.loss_history[k]) << "," << fmt(run.velocity_history[k].x()) << ","
          << fmt(run.velocity_history[k].y()) << "\n";
    }
    if (!run.converged) {
      std::fprintf(stderr, "warning: seed %llu did not converge\n", s);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rigidgraph: contact-parameter identification, data scaling, learned dynamics"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::string seed_override;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* identify = app.add_subcommand("identify", "fit contact parameters to demos");
  CLI::App* scale = app.add_subcommand("scale", "generate a scaled synthetic dataset");
  CLI::App* train = app.add_subcommand("train", "train the graph dynamics model");
  CLI::App* rollout = app.add_subcommand("rollout", "roll out the model against a reference");
  CLI::App* optimize = app.add_subcommand("optimize", "gradient-based push optimization");
  for (CLI::App* sub : {identify, scale, train, rollout, optimize}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  const std::map<std::string, std::string> identify_defaults = {
      {"demos", ""}, {"budget", "300"}, {"weight", "0.1"}, {"seed", "0"}};
  const std::map<std::string, std::string> scale_defaults = {
      {"theta", ""},          {"n_trajectories", "10"},    {"n_objects_min", "2"},
      {"n_objects_max", "4"}, {"edge_length_min", "0.04"}, {"edge_length_max", "0.08"},
      {"mass_min", "0.05"},   {"mass_max", "0.2"},         {"initial_speed_min", "0.3"},
      {"initial_speed_max", "1.0"},                        {"region_min_x", "-0.3"},
      {"region_min_y", "-0.3"}, {"region_max_x", "0.3"},   {"region_max_y", "0.3"},
      {"steps", "20"},        {"gravity_z", "-9.81"},      {"seed", "0"}};
  const std::map<std::string, std::string> train_defaults = {
      {"dataset", ""},    {"resume", ""},     {"latent", "64"},  {"hidden", "64"},
      {"layers", "5"},    {"history", "2"},   {"noise_std", "0.0001"}, {"d_eps", "0.01"},
      {"batch", "16"},    {"updates", "5000"}, {"lr", "0.001"},  {"lr_decay", "0.1"},
      {"val_every", "10"}, {"threads", "0"},  {"seed", "0"}};
  const std::map<std::string, std::string> rollout_defaults = {
      {"checkpoint", ""}, {"reference", ""}, {"steps", "0"}, {"seed", "0"}};
  const std::map<std::string, std::string> optimize_defaults = {
      {"checkpoint", ""},    {"scene", ""},         {"pusher_body", "0"}, {"struck_body", "1"},
      {"target_x", "0"},     {"target_y", "0"},     {"target_radius", "0.05"},
      {"v_max", "1.0"},      {"horizon", "30"},     {"iters", "50"},      {"step_size", "1.0"},
      {"seeds", "1"},        {"decision_x", "0"},   {"decision_y", "0"},
      {"decision_min", "0"}, {"decision_max", "0.2"}, {"seed", "0"}};

  try {
    const fs::path out(out_dir);
    fs::create_directories(out);

    auto run = [&](const char* name, const std::map<std::string, std::string>& defaults,
                   int (*fn)(const RunConfig&, const fs::path&)) -> int {
      RunConfig cfg = RunConfig::resolve(defaults, config_path);
      if (!seed_override.empty()) {
        if (!defaults.count("seed")) throw InvalidInput("command does not take a seed");
        cfg.values["seed"] = seed_override;
      }
      cfg.write_resolved(out, name);
      return fn(cfg, out);
    };

    if (identify->parsed()) return run("identify", identify_defaults, cmd_identify);
    if (scale->parsed()) return run("scale", scale_defaults, cmd_scale);
    if (train->parsed()) return run("train", train_defaults, cmd_train);
    if (rollout->parsed()) return run("rollout", rollout_defaults, cmd_rollout);
    if (optimize->parsed()) return run("optimize", optimize_defaults, cmd_optimize);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
