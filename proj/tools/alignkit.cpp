// alignkit: inspector/aligner squad toolkit.
//   simulate  train a simulated world and run alignment trajectories
//   datagen   render self-instruct prompts and build (y, y') datasets
//   align     run the inspector-gated aligner squad over exchanges
//   eval      pairwise win-rate evaluation of aligned vs baseline responses

#include <CLI11.hpp>

#include "alignkit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"aligner/inspector squad toolkit"};
  app.require_subcommand(1);

  alignkit::cli::CommonOptions common;
  app.add_option("--config", common.config_path, "config file (key = value lines)");
  app.add_option("--out", common.out_dir, "output directory")->capture_default_str();
  std::uint64_t global_seed = 0;
  auto* seed_opt = app.add_option("--seed", global_seed, "global seed");
  app.add_flag("--verbose", common.verbose, "log progress to stderr");

  alignkit::cli::SimulateOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "run the latent-space alignment simulation");
  simulate->add_option("--kind", sim_opts.kind, "independent | synergistic | conflicting")
      ->required();
  simulate->add_option("--n", sim_opts.n_eval, "evaluation inputs")->capture_default_str();
  simulate->add_option("--train-n", sim_opts.n_train, "training samples")
      ->capture_default_str();
  simulate->add_option("--d-in", sim_opts.d_in, "input dimension")->capture_default_str();
  simulate->add_option("--d-latent", sim_opts.d_latent, "latent dimension")
      ->capture_default_str();
  simulate->add_option("--sparsity", sim_opts.sparsity, "nonzero offset coordinates")
      ->capture_default_str();
  simulate->add_option("--magnitude", sim_opts.magnitude, "offset magnitude")
      ->capture_default_str();
  simulate->add_option("--noise", sim_opts.noise_sigma, "target observation noise sigma")
      ->capture_default_str();
  simulate->add_option("--l1", sim_opts.l1_penalty, "aligner l1 penalty")
      ->capture_default_str();
  simulate->add_option("--rounds", sim_opts.boost_rounds, "inspector boosting rounds")
      ->capture_default_str();
  simulate->add_option("--threshold", sim_opts.threshold, "inspector threshold")
      ->capture_default_str();
  simulate->add_option("--max-steps", sim_opts.max_steps, "application cap")
      ->capture_default_str();

  alignkit::cli::AlignOptions align_opts;
  auto* align = app.add_subcommand("align", "apply the aligner squad to exchanges");
  align->add_option("--input", align_opts.input_path, "exchange NDJSON file")->required();

  alignkit::cli::EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "pairwise win-rate evaluation");
  eval->add_option("--aligned", eval_opts.aligned_path, "aligned responses NDJSON")
      ->required();
  eval->add_option("--baseline", eval_opts.baseline_path, "baseline responses NDJSON")
      ->required();
  eval->add_option("--judge", eval_opts.judge, "length | scalar_http | pairwise_http")
      ->capture_default_str();
  std::size_t subsample = 0;
  auto* subsample_opt =
      eval->add_option("--subsample", subsample, "judge only N uniformly sampled pairs");
  eval->add_option("--traces", eval_opts.traces_path,
                   "squad trace NDJSON for the score-distribution report");

  alignkit::cli::DatagenOptions datagen_opts;
  auto* datagen = app.add_subcommand("datagen", "synthetic data generation");
  datagen->add_option("--criterion", datagen_opts.criterion, "ethical | factuality | helpful")
      ->capture_default_str();
  datagen->add_option("--phase", datagen_opts.phase, "topics | questions | pairs")
      ->required();
  datagen->add_option("--input", datagen_opts.input_path,
                      "inputs file (pairs) or topics NDJSON (questions)");
  datagen->add_option("--rounds", datagen_opts.rounds, "question-generation calls")
      ->capture_default_str();
  datagen->add_flag("--dry-run", datagen_opts.dry_run,
                    "print rendered prompts, no network calls");

  CLI11_PARSE(app, argc, argv);

  if (seed_opt->count() > 0) common.seed = global_seed;

  if (simulate->parsed()) {
    sim_opts.common = common;
    if (common.seed) sim_opts.seed = *common.seed;
    return alignkit::cli::run_simulate(sim_opts);
  }
  if (align->parsed()) {
    align_opts.common = common;
    return alignkit::cli::run_align(align_opts);
  }
  if (eval->parsed()) {
    eval_opts.common = common;
    if (subsample_opt->count() > 0) eval_opts.subsample = subsample;
    if (common.seed) eval_opts.subsample_seed = *common.seed;
    return alignkit::cli::run_eval(eval_opts);
  }
  if (datagen->parsed()) {
    datagen_opts.common = common;
    return alignkit::cli::run_datagen(datagen_opts);
  }
  return alignkit::cli::kExitConfig;
}
