#include <ostream>

#include <CLI11.hpp>

#include <reasoner/error.hpp>
#include <reasoner/version.hpp>

#include "commands.hpp"

namespace reasoner::cli {

namespace {

void add_sample_flags(CLI::App& cmd, SampleOptions& o) {
  cmd.add_option("spec", o.spec, "Problem spec (JSON)")->required();
  cmd.add_option("--method", o.method, "hmc, mf-adam or mf-linesearch")->capture_default_str();
  cmd.add_option("--seed", o.seed, "Master seed (default: spec metadata seed, else 0)");
  cmd.add_option("--seeds", o.seeds, "Mean-field: number of consecutive seeds")->capture_default_str();
  cmd.add_option("--chains", o.chains, "HMC chains")->capture_default_str();
  cmd.add_option("--draws", o.draws, "HMC retained draws per chain")->capture_default_str();
  cmd.add_option("--warmup", o.warmup, "HMC warmup iterations per chain")->capture_default_str();
  cmd.add_option("--leapfrog", o.leapfrog, "HMC leapfrog steps")->capture_default_str();
  cmd.add_option("--target-acceptance", o.target_acceptance, "HMC step-size target")->capture_default_str();
  cmd.add_option("--schedule", o.schedule, "alpha:iterations,... or 'riddle'")->capture_default_str();
  cmd.add_option("--samples", o.samples, "Mean-field: draws written to the archive")->capture_default_str();
  cmd.add_flag("--antithetic", o.antithetic, "Mean-field: write draws as mean +/- sigma * zeta pairs");
  cmd.add_option("--pairs", o.pairs, "Antithetic pairs per ELBO estimate")->capture_default_str();
  cmd.add_option("--eta", o.eta, "Adam base step")->capture_default_str();
  cmd.add_option("--tail-average", o.tail_average, "Fraction of the last stage averaged into the result")
      ->capture_default_str();
  cmd.add_option("--decode", o.decode, "Probability pipelines decoded by argmax")->delimiter(',');
  cmd.add_option("--truth", o.truth, "Expected decoded classes")->delimiter(',');
  cmd.add_option("--observe-every", o.observe_every, "Riddle checkpoint period in iterations");
  cmd.add_option("--record-samples", o.record_samples, "Draws per riddle checkpoint")->capture_default_str();
  cmd.add_option("--pgm", o.pgm, "Image pipelines dumped as PGM")->delimiter(',');
  cmd.add_option("--pgm-count", o.pgm_count, "Images per pipeline, evenly spaced over retained draws")->capture_default_str();
  cmd.add_option("--out", o.out, "Output directory")->required();
  cmd.add_flag("--record-timing", o.record_timing, "Record wall-clock time in the manifest");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian reasoning over generator and classifier networks", "reasoner"};
  app.set_version_flag("--version", std::string("reasoner ") + kVersion);
  app.require_subcommand(1);

  ValidateOptions validate;
  auto* v = app.add_subcommand("validate", "Check a problem spec and its networks");
  v->add_option("spec", validate.spec, "Problem spec (JSON)")->required();

  SampleOptions sample;
  auto* s = app.add_subcommand("sample", "Draw posterior samples");
  add_sample_flags(*s, sample);

  ReconstructOptions reconstruct;
  auto* r = app.add_subcommand("reconstruct", "Posterior mean and variance images with residuals");
  add_sample_flags(*r, reconstruct.sample);
  r->add_option("--compare", reconstruct.compare, "Second spec run with the same settings");
  r->add_option("--image", reconstruct.image, "Image pipeline")->required();

  ReportOptions report;
  auto* p = app.add_subcommand("report", "Metrics over an archive");
  p->add_option("archive", report.archive, "Sample archive (NSA1)");
  p->add_option("spec", report.spec, "Problem spec (JSON)");
  p->add_option("--metrics", report.metrics, "acc, fid, riddle")->delimiter(',')->required();
  p->add_option("--pipeline", report.pipeline, "acc: in-model probability pipeline");
  p->add_option("--target", report.target, "acc: target class");
  p->add_option("--classifier", report.classifier, "acc: independent classifier bundle");
  p->add_option("--image", report.image, "Spec pipeline feeding external networks");
  p->add_option("--generator", report.generator, "Generator bundle feeding external networks");
  p->add_option("--latent-offset", report.latent_offset, "Latent offset read by --generator");
  p->add_option("--embedding", report.embedding, "fid: embedding bundle");
  p->add_option("--reference", report.reference, "fid: reference stats JSON");
  p->add_option("--label", report.label, "fid: reference label");
  p->add_option("--reference-archive", report.reference_archive, "fid: archive embedded as reference");
  p->add_option("--fid-stride", report.fid_stride, "fid: warmup series stride")->capture_default_str();
  p->add_option("--fid-window", report.fid_window, "fid: sliding window length")->capture_default_str();
  p->add_option("--runs", report.runs, "riddle: runs file from sample");
  p->add_option("--truth", report.truth, "riddle: solution tuple")->delimiter(',');
  p->add_option("--out", report.out, "Directory for report files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (v->parsed()) return cmd_validate(validate, out);
    if (s->parsed()) return cmd_sample(sample, out);
    if (r->parsed()) return cmd_reconstruct(reconstruct, out);
    return cmd_report(report, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace reasoner::cli
