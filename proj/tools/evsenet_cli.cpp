// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver for the simulation, training and prediction pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "evsenet/evsenet.hpp"
#include "evsenet/http_server.hpp"

namespace fs = std::filesystem;
using namespace evsenet;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  int jobs = 1;
  bool seed_given = false;
  bool jobs_given = false;

  PipelineConfig pipeline() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_pipeline_config(config_path);
    if (seed_given || config_path.empty()) c.seed = seed;
    if (jobs_given) c.jobs = jobs;
    return c;
  }
};

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") std::cout << content;
  else write_file(path, content);
}

std::vector<DatasetRow> load_rows(const std::string& path) { return parse_dataset(read_file(path)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EVSE network simulation and usage prediction"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master RNG seed");
  app.add_option("--config", g.config_path, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
  auto* jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads for dataset generation")->check(CLI::PositiveNumber);

  // gen-lots ---------------------------------------------------------------
  auto* gen_lots = app.add_subcommand("gen-lots", "Generate random parking-lot layouts");
  std::optional<int> lot_height, lot_width, lot_evses;
  int lot_count = 1;
  std::string lot_dir = ".";
  gen_lots->add_option("--height", lot_height, "Rows");
  gen_lots->add_option("--width", lot_width, "Columns");
  gen_lots->add_option("--evses", lot_evses, "EVSEs per layout");
  gen_lots->add_option("--count", lot_count, "Number of layouts")->check(CLI::PositiveNumber);
  gen_lots->add_option("--out-dir", lot_dir, "Output directory");
  gen_lots->add_option("--seed", g.seed, "Master RNG seed");

  // gen-schedules ----------------------------------------------------------
  auto* gen_sched = app.add_subcommand("gen-schedules", "Generate arrival schedules");
  std::optional<int> n_evs, n_cars;
  int sched_count = 1;
  std::string sched_dir = ".";
  gen_sched->add_option("--evs", n_evs, "EVs per schedule");
  gen_sched->add_option("--cars", n_cars, "Normal cars per schedule");
  gen_sched->add_option("--count", sched_count, "Number of schedules")->check(CLI::PositiveNumber);
  gen_sched->add_option("--out-dir", sched_dir, "Output directory");
  gen_sched->add_option("--seed", g.seed, "Master RNG seed");

  // simulate ---------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Route vehicles to spots, writing a placement CSV");
  std::string sim_lot, sim_schedule, sim_out;
  simulate->add_option("--lot", sim_lot, "Layout file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--schedule", sim_schedule, "Schedule CSV")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "Placement CSV ('-' for stdout)");
  simulate->add_option("--seed", g.seed, "RNG seed");

  // charge -----------------------------------------------------------------
  auto* charge = app.add_subcommand("charge", "Schedule charging and write per-EVSE statistics");
  std::string ch_lot, ch_schedule, ch_placement, ch_out, ch_profile;
  std::optional<double> ch_capacity;
  bool ch_greedy = false;
  charge->add_option("--lot", ch_lot, "Layout file")->required()->check(CLI::ExistingFile);
  charge->add_option("--schedule", ch_schedule, "Schedule CSV")->required()->check(CLI::ExistingFile);
  charge->add_option("--placement", ch_placement, "Placement CSV")->required()->check(CLI::ExistingFile);
  charge->add_option("--capacity", ch_capacity, "Network capacity in kW (default unbounded)");
  charge->add_option("--out", ch_out, "Stats CSV ('-' for stdout)");
  charge->add_option("--profile-out", ch_profile, "Per-slot rate matrix CSV");
  charge->add_flag("--greedy", ch_greedy, "Use the greedy fast path (unbounded capacity only)");

  // featurize --------------------------------------------------------------
  auto* featurize = app.add_subcommand("featurize", "Per-EVSE feature rows with targets");
  std::string ft_lot, ft_stats, ft_out;
  int ft_m = 9, ft_lot_id = 0;
  bool ft_distance = false, ft_normalize = false;
  featurize->add_option("--lot", ft_lot, "Layout file")->required()->check(CLI::ExistingFile);
  featurize->add_option("--stats", ft_stats, "Stats CSV")->required()->check(CLI::ExistingFile);
  featurize->add_option("--m", ft_m, "Neighbourhood side length (odd)");
  featurize->add_flag("--door-distance", ft_distance, "Append distance to nearest door");
  featurize->add_flag("--normalize-distance", ft_normalize, "Divide door distance by height+width");
  featurize->add_option("--lot-id", ft_lot_id, "Value for the lot_id column");
  featurize->add_option("--out", ft_out, "Dataset CSV ('-' for stdout)");

  // dataset ----------------------------------------------------------------
  auto* dataset = app.add_subcommand("dataset", "Generate train/validation datasets end to end");
  std::string ds_dir;
  std::optional<int> ds_train, ds_val, ds_sched, ds_height, ds_width, ds_evses;
  dataset->add_option("--out-dir", ds_dir, "Output directory")->required();
  dataset->add_option("--train-layouts", ds_train, "Training layouts");
  dataset->add_option("--val-layouts", ds_val, "Validation layouts");
  dataset->add_option("--schedules", ds_sched, "Schedules per layout");
  dataset->add_option("--height", ds_height, "Layout rows");
  dataset->add_option("--width", ds_width, "Layout columns");
  dataset->add_option("--evses", ds_evses, "EVSEs per layout");

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train one model configuration");
  std::string tr_data, tr_val, tr_model_out, tr_history;
  int tr_model_id = 3;
  std::optional<int> tr_epochs, tr_batch;
  std::optional<double> tr_lr;
  bool tr_normalize = false;
  train_cmd->add_option("--data", tr_data, "Training dataset CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--val-data", tr_val, "Validation dataset CSV")->check(CLI::ExistingFile);
  train_cmd->add_option("--model-id", tr_model_id, "Model configuration 1-5")->check(CLI::Range(1, 5));
  train_cmd->add_option("--epochs", tr_epochs, "Epochs");
  train_cmd->add_option("--batch-size", tr_batch, "Mini-batch size");
  train_cmd->add_option("--learning-rate", tr_lr, "Adam learning rate");
  train_cmd->add_flag("--normalize-distance", tr_normalize, "Dataset distances are normalized");
  train_cmd->add_option("--out-model", tr_model_out, "Model file")->required();
  train_cmd->add_option("--history-out", tr_history, "Per-epoch MSE history CSV");
  train_cmd->add_option("--seed", g.seed, "RNG seed");

  // experiment -------------------------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "Train several model ids on a dataset directory");
  std::string ex_data, ex_out;
  std::vector<int> ex_models;
  std::optional<int> ex_epochs;
  experiment->add_option("--data-dir", ex_data, "Directory holding train.csv and val.csv")->required()->check(CLI::ExistingDirectory);
  experiment->add_option("--models", ex_models, "Model ids")->delimiter(',')->check(CLI::Range(1, 5));
  experiment->add_option("--epochs", ex_epochs, "Epochs");
  experiment->add_option("--out-dir", ex_out, "Output directory")->required();

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Per-target MSE of a model on a dataset");
  std::string ev_model, ev_data;
  eval->add_option("--model", ev_model, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ev_data, "Dataset CSV")->required()->check(CLI::ExistingFile);

  // predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "Predict per-EVSE statistics for a layout (JSON)");
  std::string pr_model, pr_lot, pr_out;
  predict->add_option("--model", pr_model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--lot", pr_lot, "Layout file")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pr_out, "Output file ('-' for stdout)");

  // serve ------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "HTTP prediction service");
  std::string sv_model, sv_bind = "127.0.0.1";
  int sv_port = 8080;
  serve->add_option("--model", sv_model, "Model file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", sv_port, "Port");
  serve->add_option("--bind", sv_bind, "Bind address");

  CLI11_PARSE(app, argc, argv);
  g.seed_given = seed_opt->count() > 0;
  for (const auto* sub : app.get_subcommands())
    if (const auto* opt = sub->get_option_no_throw("--seed")) g.seed_given = g.seed_given || opt->count() > 0;
  g.jobs_given = jobs_opt->count() > 0;

  try {
    if (gen_lots->parsed()) {
      PipelineConfig pc = g.pipeline();
      LotGenConfig cfg = pc.lot_gen;
      if (lot_height) cfg.height = *lot_height;
      if (lot_width) cfg.width = *lot_width;
      if (lot_evses) cfg.n_evses = *lot_evses;
      fs::create_directories(lot_dir);
      for (int i = 0; i < lot_count; ++i) {
        cfg.seed = derive_seed(pc.seed, "gen-lots", static_cast<std::uint64_t>(i));
        write_file((fs::path(lot_dir) / ("lot_" + std::to_string(i) + ".txt")).string(),
                   serialize_layout(generate_layout_with_reachability(cfg)));
      }
    } else if (gen_sched->parsed()) {
      PipelineConfig pc = g.pipeline();
      ScheduleGenConfig cfg = pc.schedule_gen;
      if (n_evs) cfg.n_evs = *n_evs;
      if (n_cars) cfg.n_cars = *n_cars;
      fs::create_directories(sched_dir);
      for (int i = 0; i < sched_count; ++i) {
        cfg.seed = derive_seed(pc.seed, "gen-schedules", static_cast<std::uint64_t>(i));
        write_file((fs::path(sched_dir) / ("schedule_" + std::to_string(i) + ".csv")).string(),
                   serialize_schedule(generate_schedule(cfg)));
      }
    } else if (simulate->parsed()) {
      PipelineConfig pc = g.pipeline();
      const Layout layout = parse_layout(read_file(sim_lot));
      const Schedule schedule = parse_schedule(read_file(sim_schedule), pc.schedule_gen.horizon);
      write_output(sim_out, serialize_placement(simulate_parking(layout, schedule, pc.parking, pc.seed)));
    } else if (charge->parsed()) {
      PipelineConfig pc = g.pipeline();
      ChargeConfig cfg = pc.charge;
      if (ch_capacity) cfg.network_capacity = *ch_capacity;
      const Layout layout = parse_layout(read_file(ch_lot));
      const Schedule schedule = parse_schedule(read_file(ch_schedule), cfg.horizon);
      const Placement placement = parse_placement(read_file(ch_placement), &schedule);
      validate_placement(layout, schedule, placement);
      const RateProfile profile = ch_greedy ? greedy_schedule(layout, schedule, placement, cfg)
                                            : schedule_charging(layout, schedule, placement, cfg);
      write_output(ch_out, serialize_stats(compute_stats(profile)));
      if (!ch_profile.empty()) write_file(ch_profile, serialize_profile(profile));
    } else if (featurize->parsed()) {
      const Layout layout = parse_layout(read_file(ft_lot));
      const auto stats = parse_stats(read_file(ft_stats));
      FeatureConfig cfg{ft_m, ft_distance, ft_normalize};
      validate(cfg);
      std::map<Cell, EvseStats> by_cell;
      for (const auto& s : stats) by_cell[{s.row, s.col}] = s;
      std::vector<DatasetRow> rows;
      for (auto& f : extract_all(layout, cfg)) {
        auto it = by_cell.find(f.evse);
        if (it == by_cell.end())
          throw Error("stats file has no entry for EVSE (" + std::to_string(f.evse.row) + "," + std::to_string(f.evse.col) + ")");
        rows.push_back({ft_lot_id, f.evse, std::move(f.values), it->second.tau, it->second.p_tot});
      }
      write_output(ft_out, serialize_dataset(rows, cfg.length()));
    } else if (dataset->parsed()) {
      PipelineConfig pc = g.pipeline();
      if (ds_train) pc.n_train_layouts = *ds_train;
      if (ds_val) pc.n_val_layouts = *ds_val;
      if (ds_sched) pc.schedules_per_layout = *ds_sched;
      if (ds_height) pc.lot_gen.height = *ds_height;
      if (ds_width) pc.lot_gen.width = *ds_width;
      if (ds_evses) pc.lot_gen.n_evses = *ds_evses;
      const auto s = run_dataset(pc, ds_dir);
      std::cout << "train rows: " << s.train_rows << " (" << s.train_path << ")\n"
                << "val rows:   " << s.val_rows << " (" << s.val_path << ")\n"
                << "manifest:   " << s.manifest_path << "\n";
    } else if (train_cmd->parsed()) {
      const auto rows = load_rows(tr_data);
      if (rows.empty()) throw Error("training dataset is empty");
      const int m = infer_feature_layout(rows.front().features.size()).first;
      ModelConfig cfg = model_config(tr_model_id, m);
      cfg.features.normalize_distance = tr_normalize;
      if (tr_epochs) cfg.epochs = *tr_epochs;
      if (tr_batch) cfg.batch_size = *tr_batch;
      if (tr_lr) cfg.learning_rate = *tr_lr;
      cfg.seed = g.seed;
      const Dataset train_set = to_model_dataset(rows, cfg);
      const Dataset val_set = tr_val.empty() ? Dataset{} : to_model_dataset(load_rows(tr_val), cfg);
      const auto result = train(train_set, val_set, cfg);
      save_model(result.model, tr_model_out);
      if (!tr_history.empty()) write_file(tr_history, serialize_history(result.history));
      if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::cout << "epoch " << last.epoch << " train_mse " << last.train_mse << " val_mse " << last.val_mse << "\n";
      }
    } else if (experiment->parsed()) {
      PipelineConfig pc = g.pipeline();
      ModelConfig base = pc.model;
      base.seed = pc.seed;
      if (ex_epochs) base.epochs = *ex_epochs;
      for (const auto& o : run_experiment(ex_data, ex_models, base, ex_out)) {
        const auto& last = o.history.back();
        std::cout << "model " << o.model_id << ": train_mse " << last.train_mse << " val_mse " << last.val_mse
                  << " -> " << o.model_path << "\n";
      }
    } else if (eval->parsed()) {
      const MlpModel model = load_model(ev_model);
      const auto report = evaluate(model, to_model_dataset(load_rows(ev_data), model.config()));
      const auto space = to_string(model.config().output_transform);
      std::cout << "rows " << report.rows << "\n"
                << "mse_" << space << "_tau " << format_double(report.transformed_mse[0]) << "\n"
                << "mse_" << space << "_p_tot " << format_double(report.transformed_mse[1]) << "\n"
                << "mse_physical_tau " << format_double(report.physical_mse[0]) << "\n"
                << "mse_physical_p_tot " << format_double(report.physical_mse[1]) << "\n";
    } else if (predict->parsed()) {
      const MlpModel model = load_model(pr_model);
      write_output(pr_out, predict_layout(model, parse_layout(read_file(pr_lot))).dump(2) + "\n");
    } else if (serve->parsed()) {
      PredictService service;
      httplib::Server server;
      install_routes(server, service);
      // Health reports 503 until the model finishes loading.
      std::thread loader([&] {
        try {
          service.set_model(std::make_shared<const MlpModel>(load_model(sv_model)));
          std::cerr << "model loaded from " << sv_model << "\n";
        } catch (const std::exception& e) {
          std::cerr << "error: " << e.what() << "\n";
          server.stop();
        }
      });
      std::cerr << "listening on " << sv_bind << ":" << sv_port << "\n";
      const bool ok = server.listen(sv_bind, sv_port);
      loader.join();
      if (!ok) {
        std::cerr << "error: could not listen on " << sv_bind << ":" << sv_port << "\n";
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
