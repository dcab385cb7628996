// Copyright 2026 The msim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msim/config.hpp"
#include "msim/errors.hpp"
#include "msim/pipeline.hpp"
#include "msim/report.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_config) {
  auto* c = cmd->add_option("--config", o.config, "experiment config (TOML-like)");
  if (needs_config) c->required();
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "override every seed in the config");
  cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

msim::ExperimentConfig load(const CommonOptions& o) {
  msim::ExperimentConfig cfg = msim::load_config(o.config);
  if (o.seed) cfg = msim::with_seed(cfg, *o.seed);
  return cfg;
}

msim::Log logger(const CommonOptions& o) {
  if (o.quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

struct ModelOptions {
  std::string checkpoint;
  bool untrained = false;
  std::string tag;
};

void add_model(CLI::App* cmd, ModelOptions& m) {
  auto* ck = cmd->add_option("--checkpoint", m.checkpoint, "checkpoint to evaluate (default OUT/train/checkpoint.bin)");
  cmd->add_flag("--untrained", m.untrained, "use the untrained encoder")->excludes(ck);
  cmd->add_option("--tag", m.tag, "suffix for the output directory");
}

std::optional<std::filesystem::path> model_path(const CommonOptions& o, const ModelOptions& m) {
  if (m.untrained) return std::nullopt;
  std::filesystem::path p = m.checkpoint.empty() ? msim::train_dir(o.out) / msim::files::kCheckpoint
                                                 : std::filesystem::path(m.checkpoint);
  if (!std::filesystem::exists(p)) {
    throw msim::DataError("checkpoint " + p.string() + " not found (run train, or pass --untrained)");
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msim: cross-lingual contrastive sentence-embedding laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msim::kToolVersion);

  CommonOptions gen_o, train_o, eval_o, ablate_o, report_o, project_o;
  ModelOptions eval_m, project_m;
  std::vector<std::size_t> counts;
  std::vector<std::string> report_inputs;

  auto* gen = app.add_subcommand("gen", "generate synthetic corpora");
  add_common(gen, gen_o, true);
  auto* train = app.add_subcommand("train", "train the encoder on generated corpora");
  add_common(train, train_o, true);
  auto* eval = app.add_subcommand("eval", "run the evaluators");
  add_common(eval, eval_o, true);
  add_model(eval, eval_m);
  auto* ablate = app.add_subcommand("ablate-parallel", "parallel-pair count ablation");
  add_common(ablate, ablate_o, true);
  ablate->add_option("--counts", counts, "parallel-pair counts (default: [ablation].counts)")->delimiter(',');
  auto* report = app.add_subcommand("report", "join eval runs into CSV/markdown tables");
  add_common(report, report_o, false);
  report->add_option("inputs", report_inputs, "directories to scan for manifests (default: --out)");
  auto* project = app.add_subcommand("project", "2D PCA export of probe-sentence embeddings");
  add_common(project, project_o, true);
  add_model(project, project_m);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) {
      msim::cmd_gen(load(gen_o), gen_o.out, logger(gen_o));
    } else if (*train) {
      msim::cmd_train(load(train_o), train_o.out, logger(train_o));
    } else if (*eval) {
      msim::cmd_eval(load(eval_o), eval_o.out, model_path(eval_o, eval_m), eval_m.tag, logger(eval_o));
    } else if (*ablate) {
      const auto cfg = load(ablate_o);
      msim::cmd_ablate_parallel(cfg, ablate_o.out, counts.empty() ? cfg.ablation.counts : counts,
                                logger(ablate_o));
    } else if (*report) {
      std::vector<std::filesystem::path> roots(report_inputs.begin(), report_inputs.end());
      if (roots.empty()) roots.push_back(report_o.out);
      const auto t = msim::cmd_report(roots, report_o.out, logger(report_o));
      if (report_o.quiet) {
        for (const auto& w : t.warnings) std::cerr << "warning: " << w << '\n';
      }
    } else if (*project) {
      msim::cmd_project(load(project_o), project_o.out, model_path(project_o, project_m), project_m.tag,
                        logger(project_o));
    }
  } catch (const msim::Error& e) {
    std::cerr << "msim: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "msim: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "msim: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
