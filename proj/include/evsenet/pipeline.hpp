// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "evsenet/charge_sched.hpp"
#include "evsenet/core.hpp"
#include "evsenet/featurize.hpp"
#include "evsenet/lot_gen.hpp"
#include "evsenet/mlp.hpp"
#include "evsenet/model_io.hpp"
#include "evsenet/parking_sim.hpp"
#include "evsenet/random.hpp"
#include "evsenet/schedule_gen.hpp"

namespace evsenet {

enum class ChargeMethod { Lp, Greedy };

struct PipelineConfig {
  int n_train_layouts = 1215;
  int n_val_layouts = 141;
  int schedules_per_layout = 20;
  std::uint64_t seed = 0;
  int jobs = 1;
  ChargeMethod charge_method = ChargeMethod::Lp;
  LotGenConfig lot_gen{};
  ScheduleGenConfig schedule_gen{};
  ParkingRules parking{};
  ChargeConfig charge{};
  // The dataset always carries door distance so every model id can train on it.
  FeatureConfig features{9, true, false};
  ModelConfig model = model_config(3);
};

inline void validate(const PipelineConfig& c) {
  if (c.n_train_layouts <= 0 || c.n_val_layouts <= 0 || c.schedules_per_layout <= 0)
    throw Error("pipeline: layout and schedule counts must be positive");
  if (c.jobs <= 0) throw Error("pipeline: jobs must be positive");
  LotGenConfig lot = c.lot_gen;
  validate(lot);
  validate(c.schedule_gen);
  validate(c.parking);
  validate(c.charge);
  validate(c.features);
  validate(c.model);
  if (c.charge_method == ChargeMethod::Greedy && c.charge.bounded())
    throw Error("pipeline: greedy charging requires unbounded capacity");
}

// ---------------------------------------------------------------------------
// Dataset rows

struct DatasetRow {
  int lot_id = 0;
  Cell evse;
  std::vector<double> features;
  double tau = 0.0;
  double p_tot = 0.0;
};

inline std::string dataset_header(std::size_t n_features) {
  std::string h = "lot_id,row,col";
  for (std::size_t i = 0; i < n_features; ++i) h += ",f_" + std::to_string(i);
  h += ",tau_kw,p_tot_kwh\n";
  return h;
}

inline std::string serialize_dataset(const std::vector<DatasetRow>& rows, std::size_t n_features) {
  std::string out = dataset_header(n_features);
  for (const auto& r : rows) {
    if (r.features.size() != n_features) throw Error("dataset: inconsistent feature length");
    out += std::to_string(r.lot_id) + "," + std::to_string(r.evse.row) + "," + std::to_string(r.evse.col);
    for (double f : r.features) out += "," + format_double(f);
    out += "," + format_double(r.tau) + "," + format_double(r.p_tot) + "\n";
  }
  return out;
}

inline std::vector<DatasetRow> parse_dataset(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error("dataset: empty file");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 5 || header[0] != "lot_id" || header[1] != "row" || header[2] != "col" ||
      header[header.size() - 2] != "tau_kw" || header.back() != "p_tot_kwh")
    throw Error("dataset: bad header");
  const std::size_t nf = header.size() - 5;
  std::vector<DatasetRow> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != header.size()) throw Error("dataset line " + std::to_string(i + 1) + ": wrong field count");
    DatasetRow r;
    r.lot_id = parse_int(f[0], "lot_id");
    r.evse = {parse_int(f[1], "row"), parse_int(f[2], "col")};
    r.features.reserve(nf);
    for (std::size_t k = 0; k < nf; ++k) r.features.push_back(parse_double(f[3 + k], "feature"));
    r.tau = parse_double(f[3 + nf], "tau_kw");
    r.p_tot = parse_double(f[4 + nf], "p_tot_kwh");
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Neighbourhood side length implied by a feature count, plus whether a
/// trailing distance column is present.
inline std::pair<int, bool> infer_feature_layout(std::size_t n_features) {
  const bool has_distance = n_features % FeatureConfig::kChannels == 1;
  const std::size_t cells = (n_features - (has_distance ? 1 : 0)) / FeatureConfig::kChannels;
  int m = 1;
  while (static_cast<std::size_t>(m * m) < cells) m += 2;
  if (static_cast<std::size_t>(m * m) != cells || (n_features % FeatureConfig::kChannels > 1))
    throw Error("dataset: " + std::to_string(n_features) + " features do not match an M*M*5 (+1) layout");
  return {m, has_distance};
}

/// Adapts dataset rows to a model's input: drops the distance column for
/// models that do not use it.
inline Dataset to_model_dataset(const std::vector<DatasetRow>& rows, const ModelConfig& config) {
  Dataset d;
  for (const auto& r : rows) {
    auto [m, has_distance] = infer_feature_layout(r.features.size());
    if (m != config.features.m) throw Error("dataset neighbourhood size does not match model");
    if (config.features.include_door_distance && !has_distance)
      throw Error("model needs a door-distance column the dataset does not have");
    std::vector<double> f = r.features;
    if (has_distance && !config.features.include_door_distance) f.pop_back();
    d.features.push_back(std::move(f));
    d.targets.push_back({r.tau, r.p_tot});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Dataset generation

/// Seeds used for one layout; recorded in the manifest.
struct LayoutSeeds {
  std::uint64_t layout = 0;
  std::vector<std::uint64_t> schedules;
  std::vector<std::uint64_t> parking;
};

inline LayoutSeeds layout_seeds(std::uint64_t master, std::string_view split, int index, int n_schedules) {
  LayoutSeeds s;
  s.layout = derive_seed(master, std::string(split) + "/layout", static_cast<std::uint64_t>(index));
  for (int k = 0; k < n_schedules; ++k) {
    s.schedules.push_back(derive_seed(s.layout, "schedule", static_cast<std::uint64_t>(k)));
    s.parking.push_back(derive_seed(s.layout, "parking", static_cast<std::uint64_t>(k)));
  }
  return s;
}

inline constexpr std::string_view kSeedRule =
    "layout = derive(master, '<split>/layout', i); schedule_k = derive(layout, 'schedule', k); "
    "parking_k = derive(layout, 'parking', k); derive(p, s, i) = splitmix64(splitmix64(p ^ fnv1a(s)) + i)";

struct SimulatedLayout {
  Layout layout;
  LayoutSeeds seeds;
  int generation_attempts = 0;
  std::vector<EvseStats> mean_stats;                 // averaged over schedules
  std::vector<std::vector<EvseStats>> per_schedule;  // [schedule][evse]
};

/// One simulate -> charge pass.
inline std::vector<EvseStats> simulate_once(const Layout& layout, const Schedule& schedule, const PipelineConfig& cfg,
                                            std::uint64_t parking_seed) {
  const Placement placement = simulate_parking(layout, schedule, cfg.parking, parking_seed);
  const RateProfile profile = cfg.charge_method == ChargeMethod::Lp
                                  ? schedule_charging(layout, schedule, placement, cfg.charge)
                                  : greedy_schedule(layout, schedule, placement, cfg.charge);
  return compute_stats(profile);
}

inline SimulatedLayout simulate_layout(const PipelineConfig& cfg, std::string_view split, int index) {
  SimulatedLayout out;
  out.seeds = layout_seeds(cfg.seed, split, index, cfg.schedules_per_layout);
  LotGenConfig lot = cfg.lot_gen;
  lot.seed = out.seeds.layout;
  out.layout = generate_layout_with_reachability(lot, &out.generation_attempts);
  for (int k = 0; k < cfg.schedules_per_layout; ++k) {
    ScheduleGenConfig sc = cfg.schedule_gen;
    sc.seed = out.seeds.schedules[static_cast<std::size_t>(k)];
    out.per_schedule.push_back(
        simulate_once(out.layout, generate_schedule(sc), cfg, out.seeds.parking[static_cast<std::size_t>(k)]));
  }
  out.mean_stats = out.per_schedule.front();
  for (std::size_t e = 0; e < out.mean_stats.size(); ++e) {
    double tau = 0.0, p = 0.0;
    for (const auto& run : out.per_schedule) {
      tau += run[e].tau;
      p += run[e].p_tot;
    }
    out.mean_stats[e].tau = tau / static_cast<double>(out.per_schedule.size());
    out.mean_stats[e].p_tot = p / static_cast<double>(out.per_schedule.size());
  }
  return out;
}

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads. The first
/// exception is rethrown after all workers stop.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& work) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) {
      try {
        work(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const int threads = std::max(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

struct SplitResult {
  std::vector<SimulatedLayout> layouts;
  std::vector<DatasetRow> rows;
};

inline SplitResult build_split(const PipelineConfig& cfg, std::string_view split, int n_layouts) {
  SplitResult r;
  r.layouts.resize(static_cast<std::size_t>(n_layouts));
  parallel_for(n_layouts, cfg.jobs, [&](int i) { r.layouts[static_cast<std::size_t>(i)] = simulate_layout(cfg, split, i); });
  for (int i = 0; i < n_layouts; ++i) {
    const auto& sl = r.layouts[static_cast<std::size_t>(i)];
    const auto feats = extract_all(sl.layout, cfg.features);
    for (std::size_t e = 0; e < feats.size(); ++e)
      r.rows.push_back({i, feats[e].evse, feats[e].values, sl.mean_stats[e].tau, sl.mean_stats[e].p_tot});
  }
  return r;
}

inline nlohmann::json to_json(const PipelineConfig& c);

struct DatasetSummary {
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::string train_path, val_path, manifest_path;
};

/// Writes train.csv, val.csv, manifest.json and layouts/ under out_dir.
inline DatasetSummary run_dataset(const PipelineConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "layouts");
  DatasetSummary summary;
  nlohmann::json manifest{{"config", to_json(cfg)}, {"seed_rule", kSeedRule}};
  for (auto [split, n] : {std::pair<std::string, int>{"train", cfg.n_train_layouts}, {"val", cfg.n_val_layouts}}) {
    SplitResult r = build_split(cfg, split, n);
    const std::string path = (fs::path(out_dir) / (split + ".csv")).string();
    write_file(path, serialize_dataset(r.rows, cfg.features.length()));
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t i = 0; i < r.layouts.size(); ++i) {
      const auto& sl = r.layouts[i];
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04zu.txt", split.c_str(), i);
      write_file((fs::path(out_dir) / "layouts" / name).string(), serialize_layout(sl.layout));
      seeds.push_back({{"lot_id", i},
                       {"layout_seed", sl.seeds.layout},
                       {"generation_attempts", sl.generation_attempts},
                       {"schedule_seeds", sl.seeds.schedules},
                       {"parking_seeds", sl.seeds.parking}});
    }
    manifest[split] = {{"layouts", n}, {"rows", r.rows.size()}, {"file", split + ".csv"}, {"seeds", seeds}};
    if (split == "train") {
      summary.train_rows = r.rows.size();
      summary.train_path = path;
    } else {
      summary.val_rows = r.rows.size();
      summary.val_path = path;
    }
  }
  summary.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  write_file(summary.manifest_path, manifest.dump(2) + "\n");
  return summary;
}

struct ExperimentOutput {
  int model_id = 0;
  std::string model_path;
  std::string history_path;
  std::vector<EpochRecord> history;
};

/// Trains each model id on train.csv, validating on val.csv every epoch.
/// `base` supplies optimiser settings; architecture comes from the id.
inline std::vector<ExperimentOutput> run_experiment(const std::string& data_dir, const std::vector<int>& model_ids,
                                                    const ModelConfig& base, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::vector<ExperimentOutput> out;
  if (model_ids.empty()) return out;
  const auto train_rows = parse_dataset(read_file((fs::path(data_dir) / "train.csv").string()));
  const auto val_rows = parse_dataset(read_file((fs::path(data_dir) / "val.csv").string()));
  if (train_rows.empty()) throw Error("experiment: training set is empty");
  const int m = infer_feature_layout(train_rows.front().features.size()).first;
  fs::create_directories(out_dir);
  for (int id : model_ids) {
    ModelConfig cfg = model_config(id, m);
    cfg.features.normalize_distance = base.features.normalize_distance;
    cfg.learning_rate = base.learning_rate;
    cfg.adam_beta1 = base.adam_beta1;
    cfg.adam_beta2 = base.adam_beta2;
    cfg.adam_epsilon = base.adam_epsilon;
    cfg.batch_size = base.batch_size;
    cfg.epochs = base.epochs;
    cfg.log_epsilon = base.log_epsilon;
    cfg.seed = derive_seed(base.seed, "model", static_cast<std::uint64_t>(id));
    auto result = train(to_model_dataset(train_rows, cfg), to_model_dataset(val_rows, cfg), cfg);
    ExperimentOutput o;
    o.model_id = id;
    o.model_path = (fs::path(out_dir) / ("model_" + std::to_string(id) + ".json")).string();
    o.history_path = (fs::path(out_dir) / ("history_" + std::to_string(id) + ".csv")).string();
    save_model(result.model, o.model_path);
    write_file(o.history_path, serialize_history(result.history));
    o.history = std::move(result.history);
    out.push_back(std::move(o));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structured-text configuration

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json capacity = c.charge.bounded() ? nlohmann::json(c.charge.network_capacity) : nlohmann::json(nullptr);
  return {
      {"n_train_layouts", c.n_train_layouts},
      {"n_val_layouts", c.n_val_layouts},
      {"schedules_per_layout", c.schedules_per_layout},
      {"seed", c.seed},
      {"charge_method", c.charge_method == ChargeMethod::Lp ? "lp" : "greedy"},
      {"lot_gen",
       {{"height", c.lot_gen.height},
        {"width", c.lot_gen.width},
        {"n_evses", c.lot_gen.n_evses},
        {"p_door", c.lot_gen.p_door},
        {"p_split0", c.lot_gen.p_split0},
        {"split_decay", c.lot_gen.split_decay},
        {"halt_slope", c.lot_gen.halt_slope},
        {"halt_cap", c.lot_gen.halt_cap}}},
      {"schedule_gen",
       {{"n_evs", c.schedule_gen.n_evs},
        {"n_cars", c.schedule_gen.n_cars},
        {"horizon", c.schedule_gen.horizon},
        {"parked_mean", c.schedule_gen.parked_mean},
        {"parked_std", c.schedule_gen.parked_std},
        {"rate_mean", c.schedule_gen.rate_mean},
        {"rate_std", c.schedule_gen.rate_std},
        {"peak_rate_pool", c.schedule_gen.peak_rate_pool}}},
      {"parking",
       {{"p_base", c.parking.p_base},
        {"occupied_neighbor_factor", c.parking.occupied_neighbor_factor},
        {"edge_bonus", c.parking.edge_bonus},
        {"p_max", c.parking.p_max}}},
      {"charge",
       {{"slot_minutes", c.charge.slot_minutes}, {"network_capacity", capacity}, {"horizon", c.charge.horizon}}},
      {"features", to_json(c.features)},
      {"model", to_json(c.model)},
  };
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  auto check_keys = [](const nlohmann::json& obj, std::initializer_list<const char*> allowed, const char* where) {
    if (!obj.is_object()) throw Error(std::string("config: '") + where + "' must be an object");
    for (const auto& [k, v] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
        throw Error(std::string("config: unknown key '") + k + "' in " + where);
    }
  };
  PipelineConfig c;
  check_keys(j,
             {"n_train_layouts", "n_val_layouts", "schedules_per_layout", "seed", "jobs", "charge_method", "lot_gen",
              "schedule_gen", "parking", "charge", "features", "model"},
             "top level");
  c.n_train_layouts = j.value("n_train_layouts", c.n_train_layouts);
  c.n_val_layouts = j.value("n_val_layouts", c.n_val_layouts);
  c.schedules_per_layout = j.value("schedules_per_layout", c.schedules_per_layout);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  if (j.contains("charge_method")) {
    const auto m = j["charge_method"].get<std::string>();
    if (m == "lp") c.charge_method = ChargeMethod::Lp;
    else if (m == "greedy") c.charge_method = ChargeMethod::Greedy;
    else throw Error("config: charge_method must be 'lp' or 'greedy'");
  }
  if (j.contains("lot_gen")) {
    const auto& l = j["lot_gen"];
    check_keys(l, {"height", "width", "n_evses", "p_door", "p_split0", "split_decay", "halt_slope", "halt_cap"}, "lot_gen");
    c.lot_gen.height = l.value("height", c.lot_gen.height);
    c.lot_gen.width = l.value("width", c.lot_gen.width);
    c.lot_gen.n_evses = l.value("n_evses", c.lot_gen.n_evses);
    c.lot_gen.p_door = l.value("p_door", c.lot_gen.p_door);
    c.lot_gen.p_split0 = l.value("p_split0", c.lot_gen.p_split0);
    c.lot_gen.split_decay = l.value("split_decay", c.lot_gen.split_decay);
    c.lot_gen.halt_slope = l.value("halt_slope", c.lot_gen.halt_slope);
    c.lot_gen.halt_cap = l.value("halt_cap", c.lot_gen.halt_cap);
  }
  if (j.contains("schedule_gen")) {
    const auto& s = j["schedule_gen"];
    check_keys(s, {"n_evs", "n_cars", "horizon", "parked_mean", "parked_std", "rate_mean", "rate_std", "peak_rate_pool"},
               "schedule_gen");
    c.schedule_gen.n_evs = s.value("n_evs", c.schedule_gen.n_evs);
    c.schedule_gen.n_cars = s.value("n_cars", c.schedule_gen.n_cars);
    c.schedule_gen.horizon = s.value("horizon", c.schedule_gen.horizon);
    c.schedule_gen.parked_mean = s.value("parked_mean", c.schedule_gen.parked_mean);
    c.schedule_gen.parked_std = s.value("parked_std", c.schedule_gen.parked_std);
    c.schedule_gen.rate_mean = s.value("rate_mean", c.schedule_gen.rate_mean);
    c.schedule_gen.rate_std = s.value("rate_std", c.schedule_gen.rate_std);
    if (s.contains("peak_rate_pool")) c.schedule_gen.peak_rate_pool = s["peak_rate_pool"].get<std::vector<double>>();
  }
  if (j.contains("parking")) {
    const auto& p = j["parking"];
    check_keys(p, {"p_base", "occupied_neighbor_factor", "edge_bonus", "p_max"}, "parking");
    c.parking.p_base = p.value("p_base", c.parking.p_base);
    c.parking.occupied_neighbor_factor = p.value("occupied_neighbor_factor", c.parking.occupied_neighbor_factor);
    c.parking.edge_bonus = p.value("edge_bonus", c.parking.edge_bonus);
    c.parking.p_max = p.value("p_max", c.parking.p_max);
  }
  if (j.contains("charge")) {
    const auto& ch = j["charge"];
    check_keys(ch, {"slot_minutes", "network_capacity", "horizon"}, "charge");
    c.charge.slot_minutes = ch.value("slot_minutes", c.charge.slot_minutes);
    c.charge.horizon = ch.value("horizon", c.charge.horizon);
    if (ch.contains("network_capacity") && !ch["network_capacity"].is_null())
      c.charge.network_capacity = ch["network_capacity"].get<double>();
  }
  if (j.contains("features")) c.features = feature_config_from_json(j["features"]);
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  validate(c);
  return c;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  try {
    return pipeline_config_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path + ": " + e.what());
  }
}

}  // namespace evsenet
