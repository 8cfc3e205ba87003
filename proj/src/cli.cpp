#include "scalebench/cli.hpp"

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "scalebench/errors.hpp"
#include "scalebench/experiment.hpp"
#include "scalebench/manifest.hpp"
#include "scalebench/synthetic.hpp"

namespace fs = std::filesystem;

namespace scalebench {

namespace {

struct CommonOptions {
  std::string config;
  std::string task = "change_detection";
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::string factors;
  bool freeze = false;
  bool scale_aug = false;
  std::string fusion;
  std::optional<int> epochs;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--task", o.task, "Task when no config is given")
      ->check(CLI::IsMember({"classification", "change_detection"}));
  cmd->add_option("--seed", o.seed, "Seed for weights, shuffling and augmentation");
  cmd->add_option("--out", o.out, "Output directory; each run gets a fresh subdirectory");
  cmd->add_option("--factors", o.factors, "Degradation factors, e.g. 1,2,4,8");
  cmd->add_flag("--freeze", o.freeze, "Freeze the backbone during fine-tuning");
  cmd->add_flag("--scale-aug", o.scale_aug, "Scale augmentation during training");
  cmd->add_option("--fusion", o.fusion, "Change-detection fusion")
      ->check(CLI::IsMember({"subtract", "concat"}));
  cmd->add_option("--epochs", o.epochs, "Override the number of training epochs");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig c = o.config.empty() ? default_experiment(parse_task(o.task))
                                        : load_experiment_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.train.seed = *o.seed;
    c.pretrain.seed = *o.seed;
  }
  if (!o.factors.empty()) c.eval.distortion.factors = parse_factor_list(o.factors);
  if (o.freeze) c.train.freeze_backbone = true;
  if (o.scale_aug) {
    c.train.scale_aug = true;
    c.pretrain.scale_aug = true;
  }
  if (!o.fusion.empty()) {
    if (c.task != Task::change_detection) throw ConfigError("--fusion applies to change detection only");
    c.model.fusion = parse_fusion(o.fusion);
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  c.validate();
  return c;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json flops_json(const FlopsReport& r) {
  nlohmann::json parts = nlohmann::json::object();
  for (const auto& [name, g] : r.per_component) parts[name] = g;
  return {{"task", to_string(r.task)},
          {"total_gflops", r.total},
          {"budget_gflops", r.budget},
          {"passed", r.passed},
          {"per_component", parts}};
}

void print_flops_table(std::ostream& out, const FlopsReport& r) {
  out << std::left << std::setw(24) << "component" << "GFLOPs\n";
  for (const auto& [name, g] : r.per_component) {
    out << std::setw(24) << name << std::fixed << std::setprecision(4) << g << '\n';
  }
  out << std::setw(24) << "total" << r.total << '\n'
      << std::setw(24) << "budget" << r.budget << '\n'
      << "passed: " << (r.passed ? "true" : "false") << '\n';
  out.unsetf(std::ios::floatfield);
}

void print_scores(std::ostream& out, const RobustnessReport& r) {
  for (const auto& s : r.per_scale) {
    out << "1:" << s.factor << "  " << std::fixed << std::setprecision(2) << s.score << '\n';
  }
  out << "AUC  " << r.auc << '\n';
  out.unsetf(std::ios::floatfield);
}

void write_curve_artifacts(const fs::path& dir, const std::string& run_id, const ExperimentConfig& c,
                           const RobustnessReport& r, RunManifest& m) {
  write_scores_csv(dir / "scores.csv", r);
  const std::string metric = c.task == Task::classification ? "accuracy" : "micro-F1";
  write_curve_plot(dir / "curve.png", run_id, {{std::string(to_string(c.task)), r.per_scale}}, metric);
  m.artifacts["scores_csv"] = (dir / "scores.csv").string();
  m.artifacts["curve_png"] = (dir / "curve.png").string();
}

nlohmann::json epoch_losses(const TrainLog& log) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : log.epochs) j.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
  return j;
}

template <class Sample>
void export_variants(const fs::path& dir, const std::vector<Sample>& data, const DistortionSpec& spec,
                     int count) {
  for (int i = 0; i < count && i < static_cast<int>(data.size()); ++i) {
    for (const auto& v : build_eval_variants(data[static_cast<std::size_t>(i)], spec)) {
      char stem[48];
      std::snprintf(stem, sizeof stem, "%05d_x%d", i, v.factor);
      if constexpr (std::is_same_v<Sample, BitemporalSample>) {
        write_image(dir / (std::string(stem) + "_A.png"), v.sample.first);
        write_image(dir / (std::string(stem) + "_B.png"), v.sample.second);
        write_mask(dir / (std::string(stem) + "_label.png"), v.sample.change_mask);
      } else {
        write_image(dir / (std::string(stem) + ".png"), v.sample.image);
      }
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resolution-robustness benchmark for remote-sensing vision transformers", "scalebench"};
  app.require_subcommand(1);

  CommonOptions pre_o, ft_o, ev_o;
  auto* pretrain = app.add_subcommand("pretrain", "Self-supervised pretraining with the overlap branch");
  add_common(pretrain, pre_o);

  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune, then run the robustness protocol");
  add_common(finetune_cmd, ft_o);
  std::string init_backbone;
  finetune_cmd->add_option("--init", init_backbone, "Backbone checkpoint from pretrain");

  auto* evaluate = app.add_subcommand("evaluate", "Run the robustness protocol on a stored model");
  add_common(evaluate, ev_o);
  std::string checkpoint, model_kind = "checkpoint", export_dir;
  int export_count = 4;
  evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint from finetune");
  evaluate->add_option("--model", model_kind, "checkpoint or oracle")
      ->check(CLI::IsMember({"checkpoint", "oracle"}));
  evaluate->add_option("--export-variants", export_dir, "Also write degraded copies of eval items");
  evaluate->add_option("--export-count", export_count, "Items to export")->check(CLI::NonNegativeNumber);

  auto* flops = app.add_subcommand("flops", "Analytic FLOPs and the compute gate");
  std::string fl_config, fl_preset = "desk", fl_task = "classification", fl_fusion = "subtract";
  std::optional<int> fl_side;
  bool fl_json_only = false;
  flops->add_option("--config", fl_config, "Experiment config; overrides the preset");
  flops->add_option("--preset", fl_preset, "Backbone preset")->check(CLI::IsMember({"desk", "vit-b16"}));
  flops->add_option("--side", fl_side, "Input side in pixels");
  flops->add_option("--task", fl_task)->check(CLI::IsMember({"classification", "change_detection"}));
  flops->add_option("--fusion", fl_fusion)->check(CLI::IsMember({"subtract", "concat"}));
  flops->add_flag("--json", fl_json_only, "Print only the JSON report");

  auto* report = app.add_subcommand("report", "Comparison table over run manifests");
  std::vector<std::string> manifests;
  std::string report_out;
  report->add_option("manifests", manifests, "manifest.json files")->required();
  report->add_option("--out", report_out, "Also write the table to this file");

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset to disk");
  std::string sy_task = "change_detection", sy_out, sy_split = "train";
  int sy_count = 16, sy_side = 64;
  std::uint64_t sy_seed = 0;
  synth->add_option("--task", sy_task)->check(CLI::IsMember({"classification", "change_detection"}));
  synth->add_option("--out", sy_out, "Dataset root")->required();
  synth->add_option("--split", sy_split)->check(CLI::IsMember({"train", "val", "test"}));
  synth->add_option("--count", sy_count, "Pairs, or images per class")->check(CLI::PositiveNumber);
  synth->add_option("--side", sy_side)->check(CLI::PositiveNumber);
  synth->add_option("--seed", sy_seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();

    if (*pretrain) {
      const auto c = resolve_config(pre_o);
      fs::path dir;
      RunManifest m;
      m.command = "pretrain";
      m.run_id = allocate_run_dir(pre_o.out, m.command, dir);
      m.timestamp = utc_timestamp();
      m.seed = c.seed;
      m.config = to_json(c);
      TrainingLog log(dir / "train_log.csv");
      const auto o = run_pretrain(c, dir / "backbone.pt", &log);
      m.dataset = o.tiles;
      const auto& last = o.result.steps.back();
      m.extra_results["final_overlap_loss"] = last.overlap;
      m.extra_results["final_total_loss"] = last.total;
      m.artifacts["backbone"] = (dir / "backbone.pt").string();
      m.artifacts["train_log"] = (dir / "train_log.csv").string();
      m.wall_clock_seconds = seconds_since(t0);
      write_manifest(dir / "manifest.json", m);
      out << "run " << m.run_id << ": overlap loss " << last.overlap << " after " << last.step + 1
          << " steps\n";
      return kExitOk;
    }

    if (*finetune_cmd) {
      const auto c = resolve_config(ft_o);
      const auto flops_report = gate(c.model);
      require_passed(flops_report);
      fs::path dir;
      RunManifest m;
      m.command = "finetune";
      m.run_id = allocate_run_dir(ft_o.out, m.command, dir);
      m.timestamp = utc_timestamp();
      m.seed = c.seed;
      m.config = to_json(c);
      FinetuneOptions opts;
      if (!init_backbone.empty()) opts.init_backbone = init_backbone;
      opts.save_to = dir / "model.pt";
      opts.on_epoch = [&](const EpochLog& e) {
        out << "epoch " << e.epoch << " loss " << e.mean_loss << " lr " << e.last_lr << std::endl;
      };
      const auto o = run_finetune(c, opts);
      m.dataset = o.eval_data;
      m.robustness = o.robustness;
      m.extra_results["train_dataset"] = {{"items", o.train_data.items},
                                          {"content_hash", o.train_data.hex()}};
      m.extra_results["epoch_losses"] = epoch_losses(o.log);
      m.extra_results["flops"] = flops_json(o.flops);
      m.artifacts["model"] = (dir / "model.pt").string();
      write_curve_artifacts(dir, m.run_id, c, o.robustness, m);
      m.wall_clock_seconds = seconds_since(t0);
      write_manifest(dir / "manifest.json", m);
      print_scores(out, o.robustness);
      out << "run " << m.run_id << '\n';
      return kExitOk;
    }

    if (*evaluate) {
      auto c = resolve_config(ev_o);
      std::optional<fs::path> ckpt;
      if (model_kind == "checkpoint") {
        if (checkpoint.empty()) throw ConfigError("evaluate needs --checkpoint or --model oracle");
        ckpt = checkpoint;
        // The checkpoint header is authoritative for the architecture.
        c.model = assembly_from_json(read_checkpoint_config(checkpoint));
        if (task_of(c.model) != c.task) throw ConfigError("checkpoint task does not match config task");
      }
      const auto flops_report = gate(c.model);
      require_passed(flops_report);
      fs::path dir;
      RunManifest m;
      m.command = "evaluate";
      m.run_id = allocate_run_dir(ev_o.out, m.command, dir);
      m.timestamp = utc_timestamp();
      m.seed = c.seed;
      m.config = to_json(c);
      m.config["evaluated_model"] = ckpt ? "checkpoint" : "oracle";
      const auto o = run_evaluation(c, ckpt);
      m.dataset = o.eval_data;
      m.robustness = o.robustness;
      m.extra_results["flops"] = flops_json(o.flops);
      if (ckpt) m.artifacts["checkpoint"] = ckpt->string();
      write_curve_artifacts(dir, m.run_id, c, o.robustness, m);
      if (!export_dir.empty()) {
        fs::create_directories(export_dir);
        if (c.task == Task::change_detection) {
          export_variants(export_dir, load_change_data(c.data, false), c.eval.distortion, export_count);
        } else {
          export_variants(export_dir, load_classification_data(c.data, false), c.eval.distortion,
                          export_count);
        }
        m.artifacts["variants"] = export_dir;
      }
      m.wall_clock_seconds = seconds_since(t0);
      write_manifest(dir / "manifest.json", m);
      print_scores(out, o.robustness);
      out << "run " << m.run_id << '\n';
      return kExitOk;
    }

    if (*flops) {
      AssemblyConfig a;
      if (!fl_config.empty()) {
        a = load_experiment_config(fl_config).model;
      } else {
        const auto spec = fl_preset == "vit-b16" ? BackboneSpec::vit_base_16() : BackboneSpec::desk();
        const int side = fl_side.value_or(fl_preset == "vit-b16" ? 256 : 64);
        try {
          a = parse_task(fl_task) == Task::classification
                  ? classifier_config(spec, Pooling::cls_token, 1000, side)
                  : change_detector_config(spec, parse_fusion(fl_fusion),
                                           default_tap_layers(spec.depth), side);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
      FlopsReport r;
      try {
        r = gate(a);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      if (!fl_json_only) print_flops_table(out, r);
      out << flops_json(r).dump(2) << '\n';
      return r.passed ? kExitOk : kExitGate;
    }

    if (*report) {
      std::vector<ReportRow> rows;
      for (const auto& p : manifests) rows.push_back(report_row(read_manifest(p)));
      const auto table = render_report(rows);
      out << table;
      if (!report_out.empty()) {
        std::ofstream f(report_out);
        if (!f) throw ConfigError("cannot write " + report_out);
        f << table;
      }
      return kExitOk;
    }

    if (*synth) {
      const auto split = parse_split(sy_split);
      if (parse_task(sy_task) == Task::change_detection) {
        write_bitemporal_dir(sy_out, split, make_synthetic_cd_fixture(sy_count, sy_side, sy_seed));
      } else {
        SyntheticClsParams p;
        p.side = sy_side;
        write_classification_dir(sy_out, split, make_synthetic_classification_fixture(sy_count, p, sy_seed),
                                 synthetic_class_names(p.num_classes));
      }
      out << "wrote " << sy_task << " split '" << sy_split << "' to " << sy_out << '\n';
      return kExitOk;
    }
  } catch (const GateFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitGate;
  } catch (const NonFiniteLoss& e) {
    err << "error: " << e.what() << " (batch " << e.batch_id() << ")\n";
    return kExitNonFinite;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace scalebench
