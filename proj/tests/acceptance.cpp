// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "commands.hpp"
#include "oracles.hpp"

using namespace monoloc;

namespace {

constexpr double kDeg = M_PI / 180.0;
const JointHeights kHeights{1.5, 1.0, 0.5, 0.1};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

FourPointObservation drop(FourPointObservation obs, BodyPoint p) {
  obs.visible[index(p)] = false;
  return obs;
}

bool recovered(const PoseState& est, const PoseState& truth) {
  const StateVector err = (est.vector() - truth.vector()).cwiseAbs();
  return err.head<3>().maxCoeff() < 1e-3 && err.tail<2>().maxCoeff() < 0.1 * kDeg;
}

// Solve timings from the round-trip workload, shared with the latency check.
std::vector<double> g_solve_times;

Outcome projection_round_trip() {
  Stopwatch sw;
  const std::array<CameraModel, 3> cams = {
      CameraModel::pinhole(1280, 960, 500, 500, 640, 480, {-0.08, 0.01, 0.0005, -0.0003}),
      CameraModel::fisheye(1280, 1024, 400, 400, 640, 512, {0.02, -0.005, 0, 0}),
      CameraModel::equirectangular(1280, 720)};
  double worst = 0.0;
  int checked = 0;
  for (const auto& cam : cams) {
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 50; ++j) {
        const PixelPoint px{cam.width * (i + 0.5) / 50.0, cam.height * (j + 0.5) / 50.0};
        NormalizedPoint n;
        try {
          n = back_project(cam, px);
        } catch (const Error&) {
          continue;  // rear hemisphere of the panorama has no image-plane point
        }
        const PixelPoint back = project_to_pixel(cam, n);
        worst = std::max({worst, std::abs(back.u - px.u), std::abs(back.v - px.v)});
        ++checked;
      }
    }
  }
  const double t = sw.seconds();
  return {worst < 1e-6 && t < 1.0 && checked > 5000,
          "max error " + fmt("%.2e", worst) + " px over " + std::to_string(checked) + " pixels, " + fmt("%.3f", t) + " s"};
}

Outcome jacobian_correctness() {
  Stopwatch sw;
  std::mt19937_64 rng(101);
  const WeightConfig w;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const PoseState s = oracle::sample_visible_state(rng, kHeights);
    const auto obs = oracle::observe(oracle::sample_visible_state(rng, kHeights), kHeights);
    const Eigen::MatrixXd a = analytic_jacobian(s, obs, kHeights, w);
    const Eigen::MatrixXd n = oracle::central_difference_jacobian(s, obs, kHeights, w);
    worst = std::max(worst, (a - n).cwiseAbs().maxCoeff() / std::max(1.0, n.cwiseAbs().maxCoeff()));
  }
  const double t = sw.seconds();
  return {worst < 1e-5 && t < 5.0, "max relative error " + fmt("%.2e", worst) + ", " + fmt("%.2f", t) + " s"};
}

Outcome noiseless_round_trip() {
  Stopwatch sw;
  std::mt19937_64 rng(102);
  int ok = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    const PoseState truth = oracle::sample_visible_state(rng, kHeights);
    const auto obs = oracle::observe(truth, kHeights);
    const auto start = std::chrono::steady_clock::now();
    const auto res = solve_localization(obs, kHeights);
    g_solve_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    ok += recovered(res.state, truth);
  }
  const double t = sw.seconds();
  const double rate = static_cast<double>(ok) / trials;
  return {rate >= 0.995 && t < 30.0, "recovered " + fmt("%.1f", 100 * rate) + "%, " + fmt("%.2f", t) + " s"};
}

Outcome three_point_round_trip() {
  Stopwatch sw;
  std::string detail;
  bool pass = true;
  for (BodyPoint missing : {BodyPoint::kAnkle, BodyPoint::kNeck}) {
    std::mt19937_64 rng(103);
    int ok = 0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
      const PoseState truth = oracle::sample_visible_state(rng, kHeights);
      ok += recovered(solve_localization(drop(oracle::observe(truth, kHeights), missing), kHeights).state, truth);
    }
    const double rate = static_cast<double>(ok) / trials;
    pass = pass && rate >= 0.99;
    detail += std::string("without ") + std::string(kBodyPointNames[index(missing)]) + " " + fmt("%.1f", 100 * rate) + "%, ";
  }
  return {pass, detail + fmt("%.2f", sw.seconds()) + " s"};
}

Outcome calibration_exactness() {
  const auto frames_at = [](const std::vector<PoseState>& states) {
    std::vector<FourPointObservation> out;
    for (const auto& s : states) out.push_back(oracle::observe(s, kHeights));
    return out;
  };
  const auto worst_error = [](const JointHeights& h) {
    const auto a = h.as_array(), b = kHeights.as_array();
    double e = 0.0;
    for (std::size_t i = 0; i < kNumBodyPoints; ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e;
  };
  const double single = worst_error(calibrate_heights(frames_at({{0.2, 4, 0.5, 0, 0}})).heights);
  const double triple =
      worst_error(calibrate_heights(frames_at({{0, 2, 0.5, 0, 0}, {0.3, 3, 0.5, 0, 0}, {-0.2, 4, 0.5, 0, 0}})).heights);

  std::mt19937_64 rng(104);
  std::normal_distribution<double> noise(0.0, 2.0 / 500.0);  // 2 px at f = 500
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    auto obs = frames_at({{0.1, 3, 0.5, 0, 0}});
    for (auto& p : obs[0].points) {
      p.x += noise(rng);
      p.y += noise(rng);
    }
    const auto est = calibrate_heights(obs).heights.as_array(), truth = kHeights.as_array();
    for (std::size_t i = 0; i < kNumBodyPoints; ++i) errors.push_back(std::abs(est[i] - truth[i]));
  }
  const double med = median(errors);
  return {single < 1e-9 && triple < 1e-9 && med < 0.03,
          "noiseless " + fmt("%.1e", std::max(single, triple)) + " m, noisy median " + fmt("%.4f", med) + " m"};
}

Outcome synthetic_regression() {
  Stopwatch sw;
  SyntheticSceneConfig scene;
  scene.frame_rate = 30.0;
  scene.duration = 1799.0 / 30.0;  // 1800 frames
  scene.waypoints = {{-1.0, 2.0}, {1.0, 6.0}};
  scene.speed = 1.0;
  scene.pitch = {0.0, 15 * kDeg, 0.2, 0.0};
  scene.roll = {0.0, 10 * kDeg, 0.13, 0.5};
  scene.camera_height = {0.5, 0.03, 0.1, 0.0};
  scene.pixel_noise = 2.0;
  scene.camera = CameraModel::pinhole(1280, 960, 500, 500, 640, 480);
  scene.heights = kHeights;
  scene.seed = 7;
  const auto frames = generate_scene(scene);

  std::vector<EstimateSample> estimates;
  std::vector<GroundTruthSample> truth;
  for (const auto& f : frames) {
    truth.push_back({f.joints.frame_id, f.joints.person_id, f.pelvis, f.distance});
    try {
      const auto res = solve_localization(reduce_to_four_points(f.joints, scene.camera), kHeights);
      estimates.push_back({f.joints.frame_id, f.joints.person_id, pelvis_location(res.state, kHeights)});
    } catch (const Error&) {
      // A skipped frame simply has no estimate.
    }
  }
  const MetricReport r = compute_metrics(estimates, truth);
  const double t = sw.seconds();
  return {frames.size() == 1800 && r.ade < 0.15 && r.vde < 0.01 && t < 60.0,
          "baseline ADE " + fmt("%.4f", r.ade) + " m, VDE " + fmt("%.5f", r.vde) + " m^2, ALE " + fmt("%.4f", *r.ale) +
              " m, VLE " + fmt("%.5f", *r.vle) + " m^2, " + std::to_string(r.frame_count) + "/" +
              std::to_string(frames.size()) + " frames, " + fmt("%.2f", t) + " s"};
}

Outcome solver_latency() {
  const double med = median(g_solve_times) * 1e3;
  return {!g_solve_times.empty() && med <= 5.0,
          "median " + fmt("%.3f", med) + " ms over " + std::to_string(g_solve_times.size()) + " solves"};
}

Outcome dogbox_sanity() {
  const auto vec = [](std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
  };
  const Eigen::VectorXd target = vec({3.0, -2.0, 0.25});
  const auto quad = least_squares([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - target; },
                                  [](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
                                    return Eigen::MatrixXd::Identity(x.size(), x.size());
                                  },
                                  vec({0, 0, 0}), Box{vec({-1, -1, -1}), vec({1, 1, 1})});
  const bool clamped = quad.x[0] == 1.0 && quad.x[1] == -1.0 && std::abs(quad.x[2] - 0.25) < 1e-12;

  const auto rosen = least_squares(oracle::rosenbrock_residuals, oracle::rosenbrock_jacobian, vec({-1.2, 1.0}),
                                   Box::unbounded(2), DogboxOptions{1e-12, 1e-12, 1e-12, 200});
  const double rosen_err = (rosen.x - vec({1, 1})).cwiseAbs().maxCoeff();

  std::mt19937_64 rng(108);
  std::normal_distribution<double> n(0, 1);
  double linear_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a(12, 4);
    Eigen::VectorXd b(12);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = n(rng);
    const Eigen::VectorXd direct = a.colPivHouseholderQr().solve(b);
    const auto rep = least_squares([&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x - b; },
                                   [&](const Eigen::VectorXd&) -> Eigen::MatrixXd { return a; }, Eigen::VectorXd::Zero(4),
                                   Box::unbounded(4), DogboxOptions{1e-14, 1e-14, 1e-14, 100});
    linear_err = std::max(linear_err, (rep.x - direct).cwiseAbs().maxCoeff());
  }
  return {clamped && rosen_err < 1e-6 && linear_err < 1e-8,
          std::string("clamped ") + (clamped ? "exact" : "wrong") + ", Rosenbrock " + fmt("%.1e", rosen_err) +
              ", linear " + fmt("%.1e", linear_err)};
}

Outcome tracker_checks() {
  const Eigen::Vector2d p0(-1.0, 3.0), v(0.8, 0.3);
  const double dt = 1.0 / 30.0;
  Track t;
  t.mean << p0.x(), p0.y(), 0, 0;
  t.covariance = Eigen::Matrix4d::Zero();
  t.covariance(0, 0) = t.covariance(1, 1) = defaults::kMeasurementNoise;
  t.covariance(2, 2) = t.covariance(3, 3) = defaults::kInitialVelocityVariance;
  for (int k = 1; k <= 50; ++k) t = update(predict(t, dt), p0 + v * (k * dt));
  const double pos_err = (t.position() - (p0 + v * (50 * dt))).norm();
  const double vel_err = (t.velocity() - v).norm();

  std::mt19937_64 rng(109);
  std::uniform_real_distribution<double> u(0.0, 1.0), pos(-10, 10);
  Track r;
  bool spd = true;
  for (int k = 0; k < 100000 && spd; ++k) {
    r = u(rng) < 0.5 ? predict(r, u(rng) * u(rng)) : update(r, Eigen::Vector2d(pos(rng), pos(rng)), 1e-4 + u(rng));
    const Eigen::Matrix4d& p = r.covariance;
    spd = (p - p.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff()) &&
          Eigen::LLT<Eigen::Matrix4d>(p).info() == Eigen::Success;
  }
  return {pos_err < 1e-3 && vel_err < 1e-2 && spd, "position " + fmt("%.1e", pos_err) + " m, velocity " +
                                                        fmt("%.1e", vel_err) + " m/s, covariance " +
                                                        (spd ? "SPD" : "lost SPD") + " over 1e5 steps"};
}

Outcome metric_identities() {
  std::mt19937_64 rng(110);
  std::normal_distribution<double> n(0, 1);
  const auto sample = [&] { return Eigen::Vector3d(n(rng), n(rng), 4 + n(rng)); };

  std::vector<EstimateSample> est;
  std::vector<GroundTruthSample> gt;
  for (int f = 0; f < 100; ++f) {
    const Eigen::Vector3d p = sample();
    est.push_back({f, 0, p});
    gt.push_back({f, 0, p, std::nullopt});
  }
  const auto same = compute_metrics(est, gt);
  const bool zero = *same.ale == 0 && *same.vle == 0 && same.ade == 0 && same.vde == 0;

  bool ordered = true;
  for (int series = 0; series < 1000; ++series) {
    est.clear();
    gt.clear();
    for (int f = 0; f < 20; ++f) {
      const Eigen::Vector3d p = sample();
      gt.push_back({f, 0, p, std::nullopt});
      est.push_back({f, 0, p + 0.5 * Eigen::Vector3d(n(rng), n(rng), n(rng))});
    }
    const auto r = compute_metrics(est, gt);
    ordered = ordered && r.ade <= *r.ale;
  }

  // Every estimate pushed 0.2 m further along its line of sight: both error
  // series are constant.
  est.clear();
  gt.clear();
  for (int f = 0; f < 100; ++f) {
    const Eigen::Vector3d p = sample();
    gt.push_back({f, 0, p, std::nullopt});
    est.push_back({f, 0, p + 0.2 * p.normalized()});
  }
  const auto offset = compute_metrics(est, gt);
  const bool flat = *offset.vle < 1e-20 && offset.vde < 1e-20 && std::abs(*offset.ale - 0.2) < 1e-12;
  return {zero && ordered && flat, std::string("identical ") + (zero ? "zero" : "nonzero") + ", ADE <= ALE " +
                                       (ordered ? "held" : "violated") + ", constant offset variance " +
                                       fmt("%.1e", std::max(*offset.vle, offset.vde))};
}

// Runs localize + eval on a recorded sequence when one is provided through
// MONOLOC_DATASET_DIR (camera.json, profile.json, frames.jsonl, gt.jsonl).
Outcome recorded_sequence(bool& skipped) {
  const char* dir = std::getenv("MONOLOC_DATASET_DIR");
  skipped = true;
  if (!dir) return {true, "MONOLOC_DATASET_DIR not set"};
  const std::filesystem::path root(dir);
  for (const char* f : {"camera.json", "profile.json", "frames.jsonl", "gt.jsonl"}) {
    if (!std::filesystem::exists(root / f)) return {true, std::string("missing ") + f + " in " + dir};
  }
  skipped = false;
  const std::string est = (std::filesystem::temp_directory_path() / "monoloc_acceptance_estimates.csv").string();
  cli::LocalizeOptions opt;
  opt.common.camera = (root / "camera.json").string();
  opt.common.output = est;
  opt.frames = (root / "frames.jsonl").string();
  opt.profiles = {(root / "profile.json").string()};
  cli::run_localize(opt);
  const MetricReport r = cli::evaluate_files(est, (root / "gt.jsonl").string());
  const double reference_ade = 0.1;
  return {r.ade <= 2 * reference_ade, "ADE " + fmt("%.4f", r.ade) + " m against the 0.2 m limit"};
}

bool report(int id, const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  std::printf("criterion %2d: %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report(1, "projection round trip", projection_round_trip);
  ok &= report(2, "Jacobian against finite differences", jacobian_correctness);
  ok &= report(3, "noiseless round trip", noiseless_round_trip);
  ok &= report(4, "three-point round trip", three_point_round_trip);
  ok &= report(5, "calibration exactness and noise", calibration_exactness);
  ok &= report(6, "synthetic end-to-end regression", synthetic_regression);
  ok &= report(7, "solver latency", solver_latency);
  ok &= report(8, "dogbox sanity", dogbox_sanity);
  ok &= report(9, "tracker", tracker_checks);
  ok &= report(10, "metric identities", metric_identities);

  bool skipped = true;
  Outcome o;
  try {
    o = recorded_sequence(skipped);
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
    skipped = false;
  }
  std::printf("criterion 11: %s  recorded sequence (informative): %s\n", skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL"),
              o.detail.c_str());
  return ok ? 0 : 1;
}
