// crashsurr: generate -> split -> train -> rollout -> evaluate -> report,
// plus bench (rollout timing) and contacts (ContactSet dump).
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "crashsurr.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace crashsurr;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run manifest: every artifact the command read or wrote, with hashes.

class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) { inputs_.push_back({{"path", path}, {"sha256", util::sha256_file(path)}}); }
  void output(const std::string& path) { outputs_.push_back({{"path", path}, {"sha256", util::sha256_file(path)}}); }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void config(const json& resolved) {
    config_ = resolved;
    config_hash_ = util::sha256_hex(resolved.dump());
  }
  void extra(const std::string& key, json value) { extra_[key] = std::move(value); }

  void write(const std::string& dir) const {
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["tool_version"] = kVersion;
    j["config"] = config_;
    j["config_sha256"] = config_hash_;
    j["seeds"] = seeds_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["threads"] = util::threads_from_env();
    j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    util::write_text((fs::path(dir) / ("manifest_" + command_ + ".json")).string(), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::array(), outputs_ = json::array(), seeds_ = json::object(), config_ = json::object(),
       extra_ = json::object();
  std::string config_hash_;
};

// ---------------------------------------------------------------------------
// Small helpers

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::vector<std::uint64_t> parse_ids(const std::string& text) {
  std::vector<std::uint64_t> ids;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    try {
      ids.push_back(std::stoull(tok, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw UsageError("invalid sample id '" + tok + "'");
  }
  if (ids.empty()) throw UsageError("empty sample id list");
  return ids;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, path + ": " + e.what());
  }
}

std::vector<std::uint64_t> split_members(const std::string& split_path, const std::string& subset) {
  const auto j = read_json(split_path);
  if (subset != "train" && subset != "val" && subset != "test")
    throw UsageError("subset must be train, val or test (got " + subset + ")");
  require(j.contains("splits") && j["splits"].contains(subset), ErrorKind::kFormat,
          split_path + " has no '" + subset + "' split");
  return j["splits"][subset].get<std::vector<std::uint64_t>>();
}

std::vector<Trajectory> select(const TrajectorySet& set, const std::vector<std::uint64_t>& ids) {
  std::map<std::uint64_t, const Trajectory*> by_id;
  for (const auto& t : set.trajectories) by_id[t.design.id] = &t;
  std::vector<Trajectory> out;
  for (auto id : ids) {
    const auto it = by_id.find(id);
    require(it != by_id.end(), ErrorKind::kInvalidArgument, "sample id " + std::to_string(id) + " not in dataset");
    out.push_back(*it->second);
  }
  return out;
}

// Sample choice shared by rollout / bench: explicit ids, a split subset, or
// the whole dataset.
std::vector<Trajectory> choose_samples(const TrajectorySet& set, const std::string& ids, const std::string& split,
                                       const std::string& subset) {
  if (!ids.empty() && !split.empty()) throw UsageError("--ids and --split are mutually exclusive");
  if (!ids.empty()) return select(set, parse_ids(ids));
  if (!split.empty()) return select(set, split_members(split, subset));
  return set.trajectories;
}

void reject_unused(const util::KvConfig& kv) {
  const auto unused = kv.unused();
  if (unused.empty()) return;
  std::string msg = "unknown configuration key(s):";
  for (const auto& k : unused) msg += " " + k;
  throw UsageError(msg);
}

oracle::OracleConfig oracle_from_kv(const util::KvConfig& kv) {
  oracle::OracleConfig c;
  c.columns = kv.get("oracle.columns", c.columns);
  c.rows = kv.get("oracle.rows", c.rows);
  c.spacing = kv.get("oracle.spacing", c.spacing);
  c.base_thickness = kv.get("oracle.base_thickness", c.base_thickness);
  c.node_mass = kv.get("oracle.node_mass", c.node_mass);
  c.stiffness = kv.get("oracle.stiffness", c.stiffness);
  c.bending_ratio = kv.get("oracle.bending_ratio", c.bending_ratio);
  c.damping = kv.get("oracle.damping", c.damping);
  c.yield_strain = kv.get("oracle.yield_strain", c.yield_strain);
  c.pole_radius = kv.get("oracle.pole_radius", c.pole_radius);
  c.pole_nodes = kv.get("oracle.pole_nodes", c.pole_nodes);
  c.pole_gap = kv.get("oracle.pole_gap", c.pole_gap);
  c.contact_stiffness = kv.get("oracle.contact_stiffness", c.contact_stiffness);
  c.contact_damping = kv.get("oracle.contact_damping", c.contact_damping);
  c.inner_dt = kv.get("oracle.inner_dt", c.inner_dt);
  c.output_dt = kv.get("oracle.output_dt", c.output_dt);
  c.horizon = kv.get("oracle.horizon", c.horizon);
  c.penetration_tolerance = kv.get("oracle.penetration_tolerance", c.penetration_tolerance);
  c.validate();
  return c;
}

// Bounds and nominal values per variable: design.<name>.low / .high / .nominal
DesignSpace space_from_kv(const util::KvConfig& kv) {
  auto space = oracle::toy_design_space();
  for (auto& v : space) {
    v.low = kv.get("design." + v.name + ".low", v.low);
    v.high = kv.get("design." + v.name + ".high", v.high);
    v.nominal = kv.get("design." + v.name + ".nominal", v.nominal);
    require(v.low < v.high && v.nominal >= v.low && v.nominal <= v.high, ErrorKind::kInvalidArgument,
            "design variable " + v.name + ": need low < high and nominal inside the bounds");
  }
  return space;
}

json space_json(const DesignSpace& space) {
  json j = json::array();
  for (const auto& v : space) j.push_back({{"name", v.name}, {"low", v.low}, {"high", v.high}, {"nominal", v.nominal}});
  return j;
}

util::KvConfig load_kv(const std::string& path) { return path.empty() ? util::KvConfig{} : util::KvConfig::load(path); }

// ---------------------------------------------------------------------------
// Commands

struct GenerateArgs {
  std::size_t n = 20;
  std::uint64_t seed = 0;
  std::size_t slices = 0;
  std::string config, out;
};

int run_generate(const GenerateArgs& a, RunManifest& man) {
  const auto kv = load_kv(a.config);
  const auto space = space_from_kv(kv);
  const auto ocfg = oracle_from_kv(kv);
  reject_unused(kv);
  if (a.n < 1) throw UsageError("--n must be >= 1");
  // Default: five slices whenever they hold at least two samples each.
  const std::size_t slices = a.slices > 0 ? a.slices : (a.n % 5 == 0 && a.n >= 10 ? 5 : 1);
  if (a.n % slices != 0) throw UsageError("--slices must divide --n");

  make_dir(a.out);
  if (!a.config.empty()) man.input(a.config);
  man.seed("lhs", a.seed);
  man.config({{"n", a.n}, {"seed", a.seed}, {"slices", slices}, {"design_space", space_json(space)},
              {"oracle", ocfg.to_json()}});

  const auto ds = oracle::generate_dataset(a.n, space, ocfg, a.seed, slices, util::threads_from_env());
  const auto data = in_dir(a.out, "dataset.crsh");
  write_container(data, ds.set);
  man.output(data);
  man.output(data + ".json");
  auto dm = ds.manifest;
  dm["design_space"] = space_json(space);
  dm["container_sha256"] = util::sha256_file(data);
  man.extra("dataset", dm);
  std::cout << "generated " << a.n << " samples (" << slices << " LHS slices) -> " << data << "\n";
  return 0;
}

struct SplitArgs {
  std::string data, out;
  std::uint64_t seed = 0;
  std::string ratios = "0.6,0.2,0.2";
  double ks_threshold = 0.35;
  std::size_t max_attempts = 64;
};

int run_split(const SplitArgs& a, RunManifest& man) {
  eval::SplitOptions opts;
  {
    std::stringstream ss(a.ratios);
    std::string tok;
    std::size_t k = 0;
    while (std::getline(ss, tok, ',')) {
      if (k >= 3) throw UsageError("--ratios needs exactly three values");
      try {
        opts.ratios[k++] = std::stod(tok);
      } catch (const std::exception&) {
        throw UsageError("--ratios: cannot parse '" + tok + "'");
      }
    }
    if (k != 3) throw UsageError("--ratios needs exactly three values");
  }
  opts.ks_threshold = a.ks_threshold;
  opts.max_attempts = a.max_attempts;
  const auto set = read_container(a.data);
  std::vector<DesignSample> samples;
  for (const auto& t : set.trajectories) samples.push_back(t.design);

  make_dir(a.out);
  man.input(a.data);
  man.seed("split", a.seed);
  man.config({{"ratios", opts.ratios}, {"ks_threshold", opts.ks_threshold}, {"max_attempts", opts.max_attempts},
              {"seed", a.seed}});

  const auto rep = eval::try_make_split(samples, set.space, a.seed, opts);
  const auto path = in_dir(a.out, "split.json"), csv = in_dir(a.out, "split_diagnostics.csv");
  util::write_text(path, rep.to_json().dump(2) + "\n");
  std::ostringstream os;
  os.precision(17);
  os << "pair,variable,ks,wasserstein1\n";
  for (const auto& p : rep.pairs)
    for (std::size_t v = 0; v < rep.variables.size(); ++v)
      os << eval::to_string(p.a) << '-' << eval::to_string(p.b) << ',' << rep.variables[v] << ',' << p.ks[v] << ','
         << p.wasserstein[v] << '\n';
  util::write_text(csv, os.str());
  man.output(path);
  man.output(csv);
  std::cout << "split: max KS " << rep.max_ks << " (threshold " << rep.ks_threshold << ") after " << rep.attempts
            << " attempt(s): " << (rep.passed ? "passed" : "FAILED") << "\n";
  if (!rep.passed)
    throw Error(ErrorKind::kUnreachable, "KS threshold not reached; best split written to " + path);
  return 0;
}

struct TrainArgs {
  std::string data, split, config, out;
  std::string family = "MeshTransolver+Contact";
  std::string preset = "desk";
  std::optional<std::size_t> epochs, patience, truncation, hidden, tokens, heads, layers_pre, layers_attn,
      layers_post, contact_k;
  std::optional<double> lr, lr_floor, weight_decay, clip, contact_radius, contact_alpha_init;
  std::optional<std::uint64_t> seed;
};

// CLI flags become config keys so that one lookup path serves both.
util::KvConfig train_kv(const TrainArgs& a) {
  auto kv = load_kv(a.config);
  auto put = [&kv](const std::string& key, const auto& v) {
    if (!v) return;
    std::ostringstream os;
    os.precision(17);
    os << *v;
    kv.set(key, os.str());
  };
  put("train.epochs", a.epochs);
  put("train.patience", a.patience);
  put("train.truncation", a.truncation);
  put("train.lr", a.lr);
  put("train.lr_floor", a.lr_floor);
  put("train.weight_decay", a.weight_decay);
  put("train.clip_norm", a.clip);
  put("train.seed", a.seed);
  put("model.hidden", a.hidden);
  put("model.tokens", a.tokens);
  put("model.heads", a.heads);
  put("model.layers_pre", a.layers_pre);
  put("model.layers_attn", a.layers_attn);
  put("model.layers_post", a.layers_post);
  put("model.contact_k", a.contact_k);
  put("model.contact_radius", a.contact_radius);
  put("model.contact_alpha_init", a.contact_alpha_init);
  if (!kv.has("model.family")) kv.set("model.family", a.family);
  if (!kv.has("model.preset")) kv.set("model.preset", a.preset);
  return kv;
}

std::pair<nn::ModelConfig, train::TrainConfig> resolve_train(const util::KvConfig& kv, std::size_t dim,
                                                             std::size_t static_dim) {
  train::TrainConfig t;
  t.epochs = kv.get("train.epochs", t.epochs);
  t.lr = kv.get("train.lr", t.lr);
  t.lr_floor = kv.get("train.lr_floor", t.lr_floor);
  t.weight_decay = kv.get("train.weight_decay", t.weight_decay);
  t.patience = kv.get("train.patience", t.patience);
  t.clip_norm = kv.get("train.clip_norm", t.clip_norm);
  t.seed = kv.get_u64("train.seed", t.seed);
  t.truncation = kv.get("train.truncation", t.truncation);
  t.threads = util::threads_from_env();

  nn::Family family;
  try {
    family = nn::parse_family(kv.get("model.family", std::string("MeshTransolver+Contact")));
  } catch (const Error& e) {
    throw UsageError(e.message());
  }
  const auto preset = kv.get("model.preset", std::string("desk"));
  if (preset != "desk" && preset != "full") throw UsageError("model.preset must be desk or full");
  auto m = preset == "desk" ? nn::ModelConfig::desk(family, dim) : nn::ModelConfig::for_family(family, dim);
  m.static_dim = static_dim;
  m.hidden = kv.get("model.hidden", m.hidden);
  m.tokens = kv.get("model.tokens", m.tokens);
  m.heads = kv.get("model.heads", m.heads);
  m.layers_pre = kv.get("model.layers_pre", m.layers_pre);
  m.layers_attn = kv.get("model.layers_attn", m.layers_attn);
  m.layers_post = kv.get("model.layers_post", m.layers_post);
  m.flare_routes = kv.get("model.flare_routes", m.flare_routes);
  m.geo_width = kv.get("model.geo_width", m.geo_width);
  m.sharpened = kv.get("model.sharpened", m.sharpened);
  m.contact_enabled = kv.get("model.contact", m.contact_enabled);
  m.contact_k = kv.get("model.contact_k", m.contact_k);
  m.contact_radius = kv.get("model.contact_radius", m.contact_radius);
  m.contact_alpha_init = kv.get("model.contact_alpha_init", m.contact_alpha_init);
  m.mesh_activation = nn::parse_activation(kv.get("model.mesh_activation", std::string(to_string(m.mesh_activation))));
  m.attention_activation =
      nn::parse_activation(kv.get("model.attention_activation", std::string(to_string(m.attention_activation))));
  m.seed = kv.get_u64("model.seed", t.seed);
  reject_unused(kv);
  m.validate();
  t.validate();
  return {m, t};
}

int run_train(const TrainArgs& a, RunManifest& man) {
  const auto kv = train_kv(a);
  const auto set = read_container(a.data);
  require(!set.trajectories.empty(), ErrorKind::kInvalidArgument, "dataset is empty");
  const auto& g0 = *set.trajectories.front().graph;
  const auto [mcfg, tcfg] = resolve_train(kv, g0.dim(), g0.static_dim());
  const auto train_set = select(set, split_members(a.split, "train"));
  const auto val_set = select(set, split_members(a.split, "val"));

  make_dir(a.out);
  man.input(a.data);
  man.input(a.split);
  if (!a.config.empty()) man.input(a.config);
  man.seed("train", tcfg.seed);
  man.seed("model", mcfg.seed);
  const json echo = {{"model", mcfg.to_json()}, {"train", tcfg.to_json()}};
  man.config(echo);

  const auto stats = fit_norm_stats(train_set);
  nn::Surrogate model(mcfg);
  std::cerr << "training " << nn::family_name(mcfg.family) << " (" << model.parameters().scalar_count()
            << " parameters) on " << train_set.size() << " trajectories, validating on " << val_set.size() << "\n";
  const auto res = train::train(model, train_set, val_set, stats, tcfg, [](const train::EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "  train " << r.train_loss << " mm^2  val " << r.val_loss << " mm^2  lr "
              << r.lr << "  " << r.seconds << " s\n";
  });

  const auto ckpt = in_dir(a.out, "model.ckpt"), hist = in_dir(a.out, "history.csv"),
             cfg_echo = in_dir(a.out, "config_echo.json");
  json meta = {{"family", nn::family_name(mcfg.family)},
               {"train", tcfg.to_json()},
               {"dataset_sha256", util::sha256_file(a.data)},
               {"split_sha256", util::sha256_file(a.split)},
               {"best_epoch", res.best_epoch},
               {"best_val_loss_mm2", res.best_val},
               {"stopped_early", res.stopped_early},
               {"diverged", res.diverged}};
  nn::save_checkpoint(ckpt, model, stats, meta);
  util::write_text(hist, res.history_csv());
  util::write_text(cfg_echo, echo.dump(2) + "\n");
  man.output(ckpt);
  man.output(hist);
  man.output(cfg_echo);
  man.extra("result", {{"best_epoch", res.best_epoch},
                       {"best_val_loss_mm2", res.best_val},
                       {"epochs_run", res.history.size() - 1},
                       {"stopped_early", res.stopped_early},
                       {"diverged", res.diverged},
                       {"message", res.message}});
  if (res.diverged)
    throw Error(ErrorKind::kDiverged, res.message + " (best checkpoint from epoch " + std::to_string(res.best_epoch) +
                                          " kept in " + ckpt + ")");
  std::cout << "best validation loss " << res.best_val << " mm^2 at epoch " << res.best_epoch << " -> " << ckpt
            << "\n";
  return 0;
}

struct SelectArgs {
  std::string ids, split, subset = "test";
};

struct RolloutArgs {
  std::string checkpoint, data, out;
  SelectArgs sel;
};

int run_rollout(const RolloutArgs& a, RunManifest& man) {
  const auto ck = nn::load_checkpoint(a.checkpoint);
  const auto set = read_container(a.data);
  const auto refs = choose_samples(set, a.sel.ids, a.sel.split, a.sel.subset);
  make_dir(a.out);
  man.input(a.checkpoint);
  man.input(a.data);
  if (!a.sel.split.empty()) man.input(a.sel.split);
  man.config({{"model_sha256", ck.model.config().hash()}, {"ids", a.sel.ids}, {"subset", a.sel.subset}});

  std::vector<rollout::RolloutResult> results(refs.size());
  util::parallel_for(refs.size(), util::threads_from_env(),
                     [&](std::size_t k) { results[k] = rollout::rollout(ck.model, refs[k], ck.stats); });
  TrajectorySet pred;
  pred.space = set.space;
  std::ostringstream os;
  os.precision(17);
  os << "sample_id,t,rmse_mm,contacts\n";
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto r = eval::rmse_series(results[k].predicted, refs[k]);
    os << refs[k].design.id << ",0,0," << 0 << '\n';
    for (std::size_t t = 1; t <= refs[k].horizon(); ++t)
      os << refs[k].design.id << ',' << t << ',' << r.per_step[t - 1] << ','
         << results[k].per_step_contact_counts[t - 1] << '\n';
    pred.trajectories.push_back(results[k].predicted);
  }
  const auto path = in_dir(a.out, "predictions.crsh"), csv = in_dir(a.out, "rollout_rmse.csv");
  write_container(path, pred);
  util::write_text(csv, os.str());
  man.output(path);
  man.output(path + ".json");
  man.output(csv);
  std::cout << "rolled out " << refs.size() << " sample(s) -> " << path << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string pred, ref, out, label;
};

int run_evaluate(const EvaluateArgs& a, RunManifest& man) {
  const auto pred = read_container(a.pred);
  const auto ref = read_container(a.ref);
  std::vector<std::uint64_t> ids;
  for (const auto& t : pred.trajectories) ids.push_back(t.design.id);
  const auto refs = select(ref, ids);
  const auto rep = eval::evaluate_set(pred.trajectories, refs);

  make_dir(a.out);
  man.input(a.pred);
  man.input(a.ref);
  man.config({{"label", a.label}});
  auto j = eval::to_json(rep);
  j["label"] = a.label.empty() ? fs::path(a.pred).parent_path().filename().string() : a.label;
  j["dt_ms"] = refs.front().dt;
  const auto path = in_dir(a.out, "eval.json"), steps = in_dir(a.out, "eval_per_step.csv"),
             summary = in_dir(a.out, "eval_summary.csv");
  util::write_text(path, j.dump(2) + "\n");
  util::write_text(steps, eval::per_step_csv(rep));
  util::write_text(summary, eval::summary_csv(rep));
  man.output(path);
  man.output(steps);
  man.output(summary);
  std::cout << "RMSE_mu " << rep.rmse_mu << " mm, RMSE_T " << rep.rmse_final.mean << " +- " << rep.rmse_final.std
            << " mm, Rel. RMSE " << rep.relative_rmse << ", e_surv(T) " << rep.survival_final.mean << " +- "
            << rep.survival_final.std << " mm over " << rep.samples.size() << " sample(s)\n";
  return 0;
}

struct ReportArgs {
  std::vector<std::string> evals, labels;
  std::string out;
};

int run_report(const ReportArgs& a, RunManifest& man) {
  if (!a.labels.empty() && a.labels.size() != a.evals.size())
    throw UsageError("--label must be given once per --eval or not at all");
  make_dir(a.out);
  std::vector<eval::Series> rmse, surv_err, surv_dist, scatter;
  bool reference_added = false;
  for (std::size_t k = 0; k < a.evals.size(); ++k) {
    man.input(a.evals[k]);
    const auto j = read_json(a.evals[k]);
    const std::string label = !a.labels.empty() ? a.labels[k] : j.value("label", "model " + std::to_string(k));
    const double dt = j.at("dt_ms").get<double>();
    const auto per_step = j.at("rmse_per_step_mm").get<std::vector<double>>();
    eval::Series r{label, {0.0}, {0.0}};
    for (std::size_t t = 0; t < per_step.size(); ++t) {
      r.x.push_back(dt * static_cast<double>(t + 1));
      r.y.push_back(per_step[t]);
    }
    rmse.push_back(r);
    const auto se = j.at("survival_error_per_step_mm").get<std::vector<double>>();
    eval::Series e{label, {}, se};
    for (std::size_t t = 0; t < se.size(); ++t) e.x.push_back(dt * static_cast<double>(t));
    surv_err.push_back(e);

    const auto& samples = j.at("samples");
    require(!samples.empty(), ErrorKind::kFormat, a.evals[k] + " holds no samples");
    const std::size_t frames = samples.front().at("survival_pred_mm").size();
    eval::Series dp{label, {}, std::vector<double>(frames, 0.0)}, dr{"reference", {}, std::vector<double>(frames, 0.0)};
    eval::Series sc{label, {}, {}};
    for (const auto& s : samples) {
      const auto p = s.at("survival_pred_mm").get<std::vector<double>>();
      const auto r2 = s.at("survival_ref_mm").get<std::vector<double>>();
      require(p.size() == frames && r2.size() == frames, ErrorKind::kFormat, "samples have different horizons");
      for (std::size_t t = 0; t < frames; ++t) {
        dp.y[t] += p[t] / static_cast<double>(samples.size());
        dr.y[t] += r2[t] / static_cast<double>(samples.size());
      }
      sc.x.push_back(r2.back());
      sc.y.push_back(p.back());
    }
    for (std::size_t t = 0; t < frames; ++t) {
      dp.x.push_back(dt * static_cast<double>(t));
      dr.x.push_back(dt * static_cast<double>(t));
    }
    if (!reference_added) {
      surv_dist.push_back(dr);
      reference_added = true;
    }
    surv_dist.push_back(dp);
    scatter.push_back(sc);
  }
  const std::vector<std::pair<std::string, std::string>> files = {
      {"rmse_vs_time.svg", eval::line_chart_svg("Mean nodal displacement RMSE", "time [ms]", "RMSE [mm]", rmse)},
      {"survival_error_vs_time.svg",
       eval::line_chart_svg("Mean survival-space error (positive = more space)", "time [ms]", "e_surv [mm]",
                            surv_err)},
      {"survival_distance_vs_time.svg",
       eval::line_chart_svg("Mean survival distance", "time [ms]", "d [mm]", surv_dist)},
      {"survival_scatter.svg", eval::scatter_svg("Final survival distance per sample", "reference d_T [mm]",
                                                 "predicted d_T [mm]", scatter)}};
  for (const auto& [name, svg] : files) {
    util::write_text(in_dir(a.out, name), svg);
    man.output(in_dir(a.out, name));
  }
  man.config({{"evals", a.evals}, {"labels", a.labels}});
  std::cout << "wrote " << files.size() << " SVG charts to " << a.out << "\n";
  return 0;
}

struct BenchArgs {
  std::string checkpoint, data, out, oracle_config;
  SelectArgs sel;
  std::size_t repeat = 3;
};

int run_bench(const BenchArgs& a, RunManifest& man) {
  if (a.repeat < 1) throw UsageError("--repeat must be >= 1");
  const auto ck = nn::load_checkpoint(a.checkpoint);
  const auto set = read_container(a.data);
  const auto refs = choose_samples(set, a.sel.ids, a.sel.split, a.sel.subset);
  const auto kv = load_kv(a.oracle_config);
  const auto ocfg = oracle_from_kv(kv);
  reject_unused(kv);
  make_dir(a.out);
  man.input(a.checkpoint);
  man.input(a.data);
  man.config({{"repeat", a.repeat}, {"oracle", ocfg.to_json()}});

  std::ostringstream os;
  os.precision(6);
  os << "sample_id,nodes,steps,surrogate_s_min,surrogate_s_mean,ms_per_step,oracle_s,speedup\n";
  std::cout << "sample  nodes  steps  surrogate[s]  ms/step  oracle[s]  speedup\n";
  for (const auto& ref : refs) {
    double best = 1e300, sum = 0.0;
    for (std::size_t r = 0; r < a.repeat; ++r) {
      const double w = rollout::rollout(ck.model, ref, ck.stats).wall_time;
      best = std::min(best, w);
      sum += w;
    }
    const auto t0 = std::chrono::steady_clock::now();
    (void)oracle::simulate(ref.design, ocfg, set.space);
    const double solver = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double per_step = 1e3 * best / static_cast<double>(ref.horizon());
    os << ref.design.id << ',' << ref.graph->node_count() << ',' << ref.horizon() << ',' << best << ','
       << sum / static_cast<double>(a.repeat) << ',' << per_step << ',' << solver << ',' << solver / best << '\n';
    std::cout << ref.design.id << "  " << ref.graph->node_count() << "  " << ref.horizon() << "  " << best << "  "
              << per_step << "  " << solver << "  " << solver / best << "\n";
  }
  const auto path = in_dir(a.out, "bench.csv");
  util::write_text(path, os.str());
  man.output(path);
  return 0;
}

struct ContactsArgs {
  std::string data, checkpoint, out;
  std::uint64_t id = 0;
  std::size_t step = 0;
  std::optional<double> radius;
  std::optional<std::size_t> k;
};

int run_contacts(const ContactsArgs& a, RunManifest& man) {
  const auto set = read_container(a.data);
  const auto tr = select(set, {a.id}).front();
  if (a.step > tr.horizon()) throw UsageError("--step beyond the trajectory horizon");
  const auto& g = *tr.graph;
  contact::ContactParams params;
  params.radius = contact::default_radius(g);
  man.input(a.data);
  if (!a.checkpoint.empty()) {
    man.input(a.checkpoint);
    const auto ck = nn::load_checkpoint(a.checkpoint);
    if (ck.model.has_contact()) params = ck.model.contact_params(g);
  }
  if (a.radius) params.radius = *a.radius;
  if (a.k) params.k = *a.k;
  params.validate();
  const auto cs = contact::build_contacts(tr.states[a.step].positions, g, params, a.step);
  make_dir(fs::path(a.out).parent_path().empty() ? "." : fs::path(a.out).parent_path().string());
  std::ostringstream os;
  os.precision(17);
  os << "i,j,distance,gap\n";
  for (const auto& p : cs.pairs) os << p.i << ',' << p.j << ',' << p.distance << ',' << p.gap << '\n';
  util::write_text(a.out, os.str());
  man.config({{"id", a.id}, {"step", a.step}, {"radius", params.radius}, {"k", params.k}});
  man.output(a.out);
  std::cout << cs.size() << " contact pair(s) at step " << a.step << " (radius " << params.radius << " mm, k "
            << params.k << ") -> " << a.out << "\n";
  return 0;
}

void add_selection(CLI::App* cmd, SelectArgs& s) {
  cmd->add_option("--ids", s.ids, "Comma-separated sample ids");
  cmd->add_option("--split", s.split, "split.json to take samples from")->check(CLI::ExistingFile);
  cmd->add_option("--subset", s.subset, "Split subset: train, val or test")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid mesh-attention crash surrogate toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);
  std::vector<std::string> args(argv, argv + argc);

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Simulate an LHS design set with the mass-spring oracle");
  c_gen->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "LHS seed")->capture_default_str();
  c_gen->add_option("--slices", gen.slices, "Sliced-LHS slice count (0 = automatic)")->capture_default_str();
  c_gen->add_option("--config", gen.config, "key = value file with design.* and oracle.* keys")
      ->check(CLI::ExistingFile);
  c_gen->add_option("--out", gen.out, "Output directory")->required();

  SplitArgs spl;
  auto* c_spl = app.add_subcommand("split", "DOE-aware train/val/test split with KS/W1 diagnostics");
  c_spl->add_option("--data", spl.data, "Dataset container")->required()->check(CLI::ExistingFile);
  c_spl->add_option("--seed", spl.seed, "Split seed")->capture_default_str();
  c_spl->add_option("--ratios", spl.ratios, "train,val,test fractions")->capture_default_str();
  c_spl->add_option("--ks-threshold", spl.ks_threshold, "Maximum KS statistic")->capture_default_str();
  c_spl->add_option("--max-attempts", spl.max_attempts, "Retries with new seeds")->capture_default_str();
  c_spl->add_option("--out", spl.out, "Output directory")->required();

  TrainArgs tra;
  auto* c_tra = app.add_subcommand("train", "Full-rollout training with early stopping");
  c_tra->add_option("--data", tra.data, "Dataset container")->required()->check(CLI::ExistingFile);
  c_tra->add_option("--split", tra.split, "split.json")->required()->check(CLI::ExistingFile);
  c_tra->add_option("--family", tra.family, "Model family")->capture_default_str();
  c_tra->add_option("--preset", tra.preset, "desk or full widths")->capture_default_str();
  c_tra->add_option("--config", tra.config, "key = value file with model.* and train.* keys")
      ->check(CLI::ExistingFile);
  c_tra->add_option("--out", tra.out, "Output directory")->required();
  c_tra->add_option("--epochs", tra.epochs);
  c_tra->add_option("--lr", tra.lr);
  c_tra->add_option("--lr-floor", tra.lr_floor);
  c_tra->add_option("--weight-decay", tra.weight_decay);
  c_tra->add_option("--patience", tra.patience);
  c_tra->add_option("--clip", tra.clip, "Global gradient-norm clip");
  c_tra->add_option("--seed", tra.seed);
  c_tra->add_option("--truncation", tra.truncation, "Detach the rollout every N steps (0 = never)");
  c_tra->add_option("--hidden", tra.hidden);
  c_tra->add_option("--tokens", tra.tokens);
  c_tra->add_option("--heads", tra.heads);
  c_tra->add_option("--layers-pre", tra.layers_pre);
  c_tra->add_option("--layers-attn", tra.layers_attn);
  c_tra->add_option("--layers-post", tra.layers_post);
  c_tra->add_option("--contact-radius", tra.contact_radius, "Contact search radius in mm (0 = 3 median edges)");
  c_tra->add_option("--contact-k", tra.contact_k, "Contact partners kept per node");
  c_tra->add_option("--contact-alpha-init", tra.contact_alpha_init, "Initial contact residual scale");

  RolloutArgs rol;
  auto* c_rol = app.add_subcommand("rollout", "Closed-loop rollout of a trained model");
  c_rol->add_option("--checkpoint", rol.checkpoint)->required()->check(CLI::ExistingFile);
  c_rol->add_option("--data", rol.data, "Dataset container")->required()->check(CLI::ExistingFile);
  add_selection(c_rol, rol.sel);
  c_rol->add_option("--out", rol.out, "Output directory")->required();

  EvaluateArgs eva;
  auto* c_eva = app.add_subcommand("evaluate", "RMSE and survival-space metrics of predictions");
  c_eva->add_option("--pred", eva.pred, "Predicted trajectories")->required()->check(CLI::ExistingFile);
  c_eva->add_option("--ref", eva.ref, "Reference dataset")->required()->check(CLI::ExistingFile);
  c_eva->add_option("--label", eva.label, "Model label for reports");
  c_eva->add_option("--out", eva.out, "Output directory")->required();

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "SVG charts from one or more eval.json files");
  c_rep->add_option("--eval", rep.evals, "eval.json (repeatable)")->required()->check(CLI::ExistingFile);
  c_rep->add_option("--label", rep.labels, "Label per --eval");
  c_rep->add_option("--out", rep.out, "Output directory")->required();

  BenchArgs ben;
  auto* c_ben = app.add_subcommand("bench", "Per-design rollout wall time against the oracle");
  c_ben->add_option("--checkpoint", ben.checkpoint)->required()->check(CLI::ExistingFile);
  c_ben->add_option("--data", ben.data, "Dataset container")->required()->check(CLI::ExistingFile);
  add_selection(c_ben, ben.sel);
  c_ben->add_option("--repeat", ben.repeat, "Timed repetitions per design")->capture_default_str();
  c_ben->add_option("--oracle-config", ben.oracle_config, "key = value oracle.* settings")
      ->check(CLI::ExistingFile);
  c_ben->add_option("--out", ben.out, "Output directory")->required();

  ContactsArgs con;
  auto* c_con = app.add_subcommand("contacts", "Dump the ContactSet of one frame as CSV");
  c_con->add_option("--data", con.data, "Dataset or prediction container")->required()->check(CLI::ExistingFile);
  c_con->add_option("--id", con.id, "Sample id")->required();
  c_con->add_option("--step", con.step, "Frame index")->capture_default_str();
  c_con->add_option("--checkpoint", con.checkpoint, "Take radius and k from this model")->check(CLI::ExistingFile);
  c_con->add_option("--contact-radius", con.radius, "Search radius in mm");
  c_con->add_option("--contact-k", con.k, "Partners kept per node");
  c_con->add_option("--out", con.out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto* sub = app.get_subcommands().front();
  RunManifest man(sub->get_name(), args);
  std::string out_dir;
  try {
    int rc = 0;
    if (sub == c_gen) rc = run_generate(gen, man), out_dir = gen.out;
    else if (sub == c_spl) rc = run_split(spl, man), out_dir = spl.out;
    else if (sub == c_tra) rc = run_train(tra, man), out_dir = tra.out;
    else if (sub == c_rol) rc = run_rollout(rol, man), out_dir = rol.out;
    else if (sub == c_eva) rc = run_evaluate(eva, man), out_dir = eva.out;
    else if (sub == c_rep) rc = run_report(rep, man), out_dir = rep.out;
    else if (sub == c_ben) rc = run_bench(ben, man), out_dir = ben.out;
    else if (sub == c_con) {
      rc = run_contacts(con, man);
      out_dir = fs::path(con.out).parent_path().empty() ? "." : fs::path(con.out).parent_path().string();
    }
    man.write(out_dir);
    return rc;
  } catch (const UsageError& e) {
    std::cerr << json{{"error", {{"kind", "usage"}, {"command", sub->get_name()}, {"message", e.what()}}}}.dump()
              << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", {{"kind", to_string(e.kind())}, {"command", sub->get_name()}, {"message", e.message()}}}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"command", sub->get_name()}, {"message", e.what()}}}}.dump()
              << "\n";
    return 1;
  }
}
