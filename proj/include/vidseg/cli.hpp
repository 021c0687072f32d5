/* Copyright 2026 The vidseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Command-line front end. Subcommands: refine, eval, consis, sweep, rcs,
// synth. Exit codes: 0 success, 1 job failure, 2 usage error. Reports go to
// stdout; logs go to stderr.
//
// Every subcommand accepts --config <file.json>. Keys are flag names with
// dashes replaced by underscores (pred_dir, frame_distance, ...); arrays are
// joined with commas. Explicit flags override config values, which override
// defaults.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vidseg/damath.hpp"
#include "vidseg/io.hpp"
#include "vidseg/metrics.hpp"
#include "vidseg/pipeline.hpp"
#include "vidseg/synthgen.hpp"

namespace vidseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitJobFailure = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw UsageError(std::string("empty entry in ") + what);
    item = item.substr(b, e - b + 1);
    T value{};
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || end != item.data() + item.size()) {
      throw UsageError(std::string("malformed ") + what + " entry '" + item + "'");
    }
    out.push_back(value);
  }
  return out;
}

namespace detail {

inline std::string config_value_to_arg(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (const auto& e : v) {
      if (!joined.empty()) joined += ",";
      joined += e.is_string() ? e.get<std::string>() : e.dump();
    }
    return joined;
  }
  return v.dump();
}

inline bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Splices config-file values into the argument list as flags, skipping any
// flag the user passed explicitly.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path) return args;
  std::ifstream in(*config_path);
  if (!in) throw UsageError("cannot open config file " + *config_path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config" || flag_given(args, flag) || value.is_null()) continue;
    extra.push_back(flag);
    extra.push_back(config_value_to_arg(value));
  }
  // Subcommand is args[1]; config flags go right after it.
  args.insert(args.begin() + std::min<std::size_t>(2, args.size()), extra.begin(), extra.end());
  return args;
}

inline void write_text(const fs::path& path, const std::string& text) {
  vidseg::detail::write_file_bytes(
      path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace detail

struct CommonOptions {
  std::string config;
  std::string manifest;
  std::string pred_dir;
  std::string classes;
  int num_classes = 19;
  int workers = 0;
  std::uint64_t seed = 1;
  std::string split;
  std::string domain;
  std::string format = "csv";
  std::string out;
};

inline void add_config(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "JSON file with default flag values");
}

inline void add_dataset_flags(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--manifest", o.manifest, "JSONL dataset manifest")->required();
  sub->add_option("--pred-dir", o.pred_dir, "directory of <clip>_<frame>.png predictions")
      ->required();
  sub->add_option("--num-classes", o.num_classes, "size of the class space")
      ->check(CLI::Range(1, 254));
  sub->add_option("--workers", o.workers, "worker threads (0 = logical cores)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--split", o.split, "restrict to split")->check(CLI::IsMember({"train", "val"}));
  sub->add_option("--domain", o.domain, "restrict to domain")
      ->check(CLI::IsMember({"source", "target"}));
}

inline void add_report_flags(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--classes", o.classes, "comma-separated evaluated class IDs");
  sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--out", o.out, "also write the report to this file");
}

inline JobConfig make_job_config(const CommonOptions& o) {
  JobConfig c;
  c.manifest = o.manifest;
  c.pred_dir = o.pred_dir;
  c.num_classes = o.num_classes;
  c.workers = o.workers;
  c.seed = o.seed;
  if (!o.classes.empty()) {
    c.classes = parse_list<int>(o.classes, "--classes");
    for (int cls : c.classes) {
      if (cls < 0 || cls >= o.num_classes) {
        throw UsageError("--classes entry " + std::to_string(cls) + " outside class space");
      }
    }
  }
  if (!o.split.empty()) c.split = o.split == "train" ? Split::kTrain : Split::kVal;
  if (!o.domain.empty()) c.domain = o.domain == "source" ? Domain::kSource : Domain::kTarget;
  return c;
}

inline void emit(std::ostream& out, const CommonOptions& o, const std::string& text) {
  out << text;
  if (!o.out.empty()) detail::write_text(o.out, text);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal label propagation, pseudo-label refinement and evaluation tools",
               "vidseg"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  CommonOptions common;

  // refine
  auto* refine_cmd = app.add_subcommand("refine", "refine pseudo-labels with a temporal strategy");
  std::string strategy_name = "consistency";
  std::string conf_dir;
  std::string out_dir;
  int frame_distance = 1;
  add_config(refine_cmd, common);
  add_dataset_flags(refine_cmd, common);
  refine_cmd->add_option("--conf-dir", conf_dir, "directory of <clip>_<frame>.pfm confidences");
  refine_cmd->add_option("--strategy", strategy_name, "refinement strategy")
      ->check(CLI::IsMember(
          {"consistency", "max_confidence", "warp_forward", "warp_backward", "oracle", "none"}));
  refine_cmd->add_option("--frame-distance", frame_distance, "signed frame distance k");
  refine_cmd->add_option("--out-dir", out_dir, "output directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions against labels");
  add_config(eval_cmd, common);
  add_dataset_flags(eval_cmd, common);
  add_report_flags(eval_cmd, common);

  // consis
  auto* consis_cmd = app.add_subcommand("consis", "temporal consistency metric at distance k");
  std::string metric_name = "predconsis";
  add_config(consis_cmd, common);
  add_dataset_flags(consis_cmd, common);
  add_report_flags(consis_cmd, common);
  consis_cmd->add_option("--frame-distance", frame_distance, "signed frame distance k");
  consis_cmd->add_option("--metric", metric_name, "predconsis | warped | consistency")
      ->check(CLI::IsMember({"predconsis", "warped", "consistency"}));

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "warped/consistency metrics over distances");
  std::string ks_text = "1,3,6,10";
  add_config(sweep_cmd, common);
  add_dataset_flags(sweep_cmd, common);
  add_report_flags(sweep_cmd, common);
  sweep_cmd->add_option("--ks", ks_text, "comma-separated signed frame distances");

  // rcs
  auto* rcs_cmd = app.add_subcommand("rcs", "rare-class sampling distribution");
  std::string freqs_text;
  double temperature = 0.01;
  std::string rcs_format = "json";
  add_config(rcs_cmd, common);
  rcs_cmd->add_option("--freqs", freqs_text, "comma-separated class pixel frequencies")
      ->required();
  rcs_cmd->add_option("--temperature", temperature, "softmax temperature T > 0");
  rcs_cmd->add_option("--format", rcs_format, "report format")
      ->check(CLI::IsMember({"csv", "json"}));
  rcs_cmd->add_option("--out", common.out, "also write the report to this file");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic moving-shapes dataset");
  std::string spec_path;
  add_config(synth_cmd, common);
  synth_cmd->add_option("--spec", spec_path, "world spec JSON")->required();
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = detail::merge_config(std::move(args));
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*refine_cmd) {
      JobConfig c = make_job_config(common);
      c.strategy = *parse_strategy(strategy_name);
      c.frame_distance = frame_distance;
      c.out_dir = out_dir;
      if (!conf_dir.empty()) c.conf_dir = conf_dir;
      if (needs_confidence(c.strategy) && !c.conf_dir) {
        throw UsageError("--strategy max_confidence requires --conf-dir");
      }
      if (needs_flow(c.strategy) && c.frame_distance == 0) {
        throw UsageError("--frame-distance must be non-zero for " + strategy_name);
      }
      const auto report = run_refine_job(c);
      out << to_json(report).dump(2) << "\n";
      err << "[vidseg] refine: " << report.pairs_ok << "/" << report.pairs_total
          << " pairs refined, " << report.errors.size() << " failed\n";
      return report.failed() ? kExitJobFailure : kExitOk;
    }
    if (*eval_cmd) {
      const auto report = run_eval_job(make_job_config(common));
      if (report.coverage_warning()) {
        err << "[vidseg] eval: warning: " << report.missing.size() << " of "
            << report.frames_expected << " labelled frames lack a usable prediction\n";
      }
      emit(out, common,
           common.format == "json" ? to_json(report).dump(2) + "\n"
                                   : report_to_csv(report.metrics));
      return kExitOk;
    }
    if (*consis_cmd) {
      JobConfig c = make_job_config(common);
      c.frame_distance = frame_distance;
      if (c.frame_distance == 0) throw UsageError("--frame-distance must be non-zero");
      const auto result = run_consis_job(c, *parse_temporal_metric(metric_name));
      err << "[vidseg] consis: " << result.aggregate.pairs << " pairs ("
          << result.aggregate.flow_source() << " flow), " << result.aggregate.failed
          << " failed\n";
      if (common.format == "json") {
        auto j = report_to_json(result.report);
        j["metric"] = metric_name;
        j["frame_distance"] = c.frame_distance;
        j["pairs"] = result.aggregate.pairs;
        j["flow_source"] = result.aggregate.flow_source();
        emit(out, common, j.dump(2) + "\n");
      } else {
        emit(out, common, report_to_csv(result.report));
      }
      return kExitOk;
    }
    if (*sweep_cmd) {
      const auto ks = parse_list<int>(ks_text, "--ks");
      for (int k : ks) {
        if (k == 0) throw UsageError("--ks entries must be non-zero");
      }
      const auto rows = frame_distance_sweep(make_job_config(common), ks);
      emit(out, common,
           common.format == "json" ? sweep_to_json(rows).dump(2) + "\n" : sweep_to_csv(rows));
      return kExitOk;
    }
    if (*rcs_cmd) {
      ClassFrequencies freqs{parse_list<double>(freqs_text, "--freqs"), temperature};
      if (!(temperature > 0.0)) throw UsageError("--temperature must be positive");
      for (double f : freqs.f) {
        if (!(f >= 0.0 && f <= 1.0)) throw UsageError("--freqs entries must lie in [0,1]");
      }
      const auto p = rcs_distribution(freqs);
      if (rcs_format == "csv") {
        std::string text = "class,probability\n";
        for (std::size_t c = 0; c < p.size(); ++c) {
          text += std::to_string(c) + "," + format_fixed(p[c], 6) + "\n";
        }
        emit(out, common, text);
      } else {
        nlohmann::ordered_json j;
        j["schema_version"] = kReportSchemaVersion;
        j["temperature"] = temperature;
        j["probabilities"] = p;
        emit(out, common, j.dump(2) + "\n");
      }
      return kExitOk;
    }
    if (*synth_cmd) {
      std::ifstream in(spec_path);
      if (!in) throw UsageError("cannot open --spec " + spec_path);
      nlohmann::json spec_json;
      try {
        spec_json = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("--spec is not valid JSON: ") + e.what());
      }
      std::vector<WorldSpec> specs;
      try {
        specs = dataset_spec_from_json(spec_json);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const auto manifest = emit_dataset(specs, out_dir);
      nlohmann::ordered_json j;
      j["schema_version"] = kReportSchemaVersion;
      j["clips"] = manifest.clip_index().size();
      j["frames"] = manifest.records().size();
      j["manifest"] = "manifest.jsonl";
      out << j.dump(2) << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitJobFailure;
  }
  return kExitUsage;
}

}  // namespace vidseg::cli
