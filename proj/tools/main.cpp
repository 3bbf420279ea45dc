// monoloc: person localization from 2D keypoints on a moving camera.

#include <iostream>

#include "CLI11.hpp"

#include "commands.hpp"

namespace {

using namespace monoloc::cli;

void add_common(CLI::App* app, CommonOptions& common) {
  app->add_option("--camera", common.camera, "Camera config (JSON)");
  app->add_option("--config", common.config, "Run config (JSON)");
  app->add_option("--seed", common.seed, "Seed recorded in output headers");
  app->add_option("--output", common.output, "Output path ('-' for stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular person localization with camera attitude estimation", "monoloc"};
  app.set_version_flag("--version", MONOLOC_VERSION);
  app.require_subcommand(1);

  CalibrateOptions calibrate;
  auto* cal = app.add_subcommand("calibrate", "Estimate a person's joint heights from static frames");
  add_common(cal, calibrate.common);
  cal->add_option("--frames", calibrate.frames, "Keypoint frames (JSON lines)")->required();
  cal->add_option("--static-pose", calibrate.static_pose, "Known camera pose during calibration (JSON)");

  LocalizeOptions localize;
  auto* loc = app.add_subcommand("localize", "Solve camera attitude and person location per frame");
  add_common(loc, localize.common);
  loc->add_option("--frames", localize.frames, "Keypoint frames (JSON lines)")->required();
  loc->add_option("--profile", localize.profiles, "Person profile(s) from calibrate");

  TrackOptions track;
  auto* trk = app.add_subcommand("track", "Kalman-track localized footprints");
  add_common(trk, track.common);
  trk->add_option("--estimates", track.estimates, "Estimates CSV from localize");
  trk->add_option("--frames", track.frames, "Keypoint frames, localized on the fly");
  trk->add_option("--profile", track.profiles, "Person profile(s), with --frames");

  EvalOptions eval;
  auto* ev = app.add_subcommand("eval", "Compare estimates with ground truth");
  add_common(ev, eval.common);
  ev->add_option("--estimates", eval.estimates, "Estimates CSV from localize")->required();
  ev->add_option("--ground-truth", eval.ground_truth, "Ground truth (JSON lines)")->required();
  ev->add_option("--per-frame", eval.per_frame, "Per-frame error CSV");

  SynthOptions synth;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic scene with ground truth");
  add_common(syn, synth.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "monoloc: error: usage: " << e.what() << '\n';
    return kConfigFailure;
  }

  try {
    if (cal->parsed()) {
      run_calibrate(calibrate);
    } else if (loc->parsed()) {
      run_localize(localize);
    } else if (trk->parsed()) {
      if (track.estimates.empty() && track.frames.empty()) {
        throw monoloc::Error(monoloc::ErrorCode::kInvalidArgument, "track needs --estimates or --frames");
      }
      run_track(track);
    } else if (ev->parsed()) {
      run_eval(eval);
    } else if (syn->parsed()) {
      run_synth(synth);
    }
  } catch (const monoloc::Error& e) {
    std::cerr << "monoloc: error: " << category_for(e.code()) << ": " << e.message() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "monoloc: error: internal: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kSuccess;
}
