#include "pstitch/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

namespace pstitch {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class F>
auto run_stage(const char* stage, std::optional<std::size_t> hyp, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, hyp, e.what());
  }
}

// Saliency of the reference image laid onto a canvas; 1 off the image.
cv::Mat saliency_on_canvas(const cv::Mat& saliency, const Canvas& canvas) {
  if (saliency.empty()) return {};
  cv::Mat out(canvas.height, canvas.width, CV_64F, cv::Scalar(1.0));
  for (int y = 0; y < canvas.height; ++y)
    for (int x = 0; x < canvas.width; ++x) {
      const int rx = x + canvas.x0, ry = y + canvas.y0;
      if (rx >= 0 && ry >= 0 && rx < saliency.cols && ry < saliency.rows)
        out.at<double>(y, x) = saliency.at<double>(ry, rx);
    }
  return out;
}

double mean_vertex_change(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index n = a.size() / 2;
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) s += std::hypot(a[2 * k] - b[2 * k], a[2 * k + 1] - b[2 * k + 1]);
  return n ? s / static_cast<double>(n) : 0.0;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

nlohmann::json canvas_json(const Canvas& c) {
  return {{"x0", c.x0}, {"y0", c.y0}, {"width", c.width}, {"height", c.height}};
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void StitchConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(grouping.tau, "tau");
  positive(grouping.softness, "softness");
  positive(static_cast<double>(grouping.min_remaining), "min_remaining");
  positive(grouping.mdlt.sigma, "mdlt sigma");
  positive(convergence_px, "convergence_px");
  positive(target_cells, "target_cells");
  positive(adaptive.sigma_cells, "adaptive sigma");
  positive(adaptive.kappa, "adaptive kappa");
  positive(perception.softness, "perception softness");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (grouping.mdlt.gamma < 0 || grouping.mdlt.gamma > 1)
    throw std::invalid_argument("mdlt gamma must lie in [0, 1]");
  if (warp.lambda_p < 0 || warp.lambda_l < 0 || warp.lambda_s < 0 || warp.distortion < 0 ||
      warp.regularization < 0)
    throw std::invalid_argument("warp weights must be nonnegative");
  if (zncc_patch < 1 || zncc_patch % 2 == 0) throw std::invalid_argument("zncc_patch must be odd");
  if (feather_radius < 0) throw std::invalid_argument("feather_radius must be nonnegative");
}

nlohmann::json StitchConfig::to_json() const {
  return {
      {"tau", grouping.tau},
      {"softness", grouping.softness},
      {"min_remaining", grouping.min_remaining},
      {"mdlt_sigma", grouping.mdlt.sigma},
      {"mdlt_gamma", grouping.mdlt.gamma},
      {"max_iterations", max_iterations},
      {"convergence_px", convergence_px},
      {"target_cells", target_cells},
      {"lambda_p", warp.lambda_p},
      {"lambda_l", warp.lambda_l},
      {"lambda_s", warp.lambda_s},
      {"distortion", warp.distortion},
      {"regularization", warp.regularization},
      {"adaptive_sigma_cells", adaptive.sigma_cells},
      {"adaptive_kappa", adaptive.kappa},
      {"perception_mu", perception.mu},
      {"perception_softness", perception.softness},
      {"zncc_patch", zncc_patch},
      {"feather_radius", feather_radius},
      {"direction", direction ? to_string(*direction) : "auto"},
  };
}

std::string to_string(Direction d) { return d == Direction::Horizontal ? "horizontal" : "vertical"; }

Direction detect_direction(const DualFeatureSet& set) {
  Vec2 ct = Vec2::Zero(), cr = Vec2::Zero();
  double n = 0;
  for (const auto& p : set.points) ct += p.p, cr += p.p_ref, n += 1;
  for (const auto& l : set.lines) ct += l.midpoint(), cr += l.midpoint_ref(), n += 1;
  if (n == 0) return Direction::Horizontal;
  const Vec2 d = (cr - ct) / n;
  return std::abs(d.x()) >= std::abs(d.y()) ? Direction::Horizontal : Direction::Vertical;
}

cv::Mat normalize_saliency(const cv::Mat& raw) {
  if (raw.empty()) return {};
  cv::Mat gray = raw;
  if (raw.channels() != 1) throw std::invalid_argument("saliency must be single-channel");
  double scale = 1.0;
  if (raw.depth() == CV_8U) scale = 1.0 / 255.0;
  if (raw.depth() == CV_16U) scale = 1.0 / 65535.0;
  cv::Mat out;
  gray.convertTo(out, CV_64F, scale);
  return out;
}

HypothesisOutcome align_hypothesis(const cv::Mat& target, const cv::Mat& reference,
                                   const DualFeatureSet& set, const Hypothesis& hypothesis,
                                   std::size_t index, Direction direction,
                                   const StitchConfig& config, const cv::Mat& saliency) {
  HypothesisOutcome out;
  out.index = index;
  out.hypothesis = hypothesis;
  const std::size_t np = set.points.size();
  const auto pts = hypothesis.point_indices(np);
  const auto lns = hypothesis.line_indices(np);

  out.global = run_stage("prewarp", index, [&] {
    return fit_homography(build_design_system(set, pts, lns));
  });
  out.mesh = run_stage("prewarp", index, [&] {
    return init_mesh(set.target_dims, config.target_cells, out.global);
  });
  const std::vector<double> cell_weights =
      run_stage("alignment", index, [&] { return cell_saliency(out.mesh, saliency); });

  Eigen::VectorXd previous = out.mesh.V_init;
  std::optional<SeamResult> seam;
  for (int it = 1; it <= config.max_iterations; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    const FeatureWeights weights = run_stage("alignment", index, [&] {
      return adaptive_weights(set, hypothesis, out.mesh, seam ? &*seam : nullptr, out.canvas,
                              config.adaptive);
    });
    SolveResult solved = run_stage("alignment", index, [&] {
      return assemble_and_solve(out.mesh, hypothesis, set, weights, config.warp, cell_weights);
    });
    out.mesh = std::move(solved.mesh);
    rec.energies = solved.energies;
    rec.mean_vertex_change = mean_vertex_change(out.mesh.V_hat, previous);
    previous = out.mesh.V_hat;

    run_stage("warp", index, [&] {
      out.canvas = compute_canvas(out.mesh, set.ref_dims);
      auto w = warp_image(target, out.mesh, out.canvas);
      out.warped = std::move(w.canvas_image);
      rec.folded_cells = w.folded_cells;
      out.reference = place_reference(reference, out.canvas);
    });
    run_stage("seam", index, [&] {
      out.region = make_overlap_region(out.warped.mask, out.reference.mask, direction);
      const EdgeCostMap costs =
          perception_cost(out.warped.image, out.reference.image, out.region,
                          saliency_on_canvas(saliency, out.canvas), config.perception);
      seam = find_seam(costs, out.region);
    });
    rec.seam_cost = seam->total_cost;
    rec.V_hat = out.mesh.V_hat;
    out.iterations.push_back(std::move(rec));
    out.iterations_used = it;
    if (out.iterations.back().mean_vertex_change < config.convergence_px) break;
  }
  out.seam = std::move(*seam);
  run_stage("score", index, [&] {
    // A labelling without a boundary shows no seam at all.
    out.seam.zncc_score = out.seam.seam_pixels.empty()
                              ? 0.0
                              : zncc_quality(out.seam, out.region, out.warped.image,
                                             out.reference.image, config.zncc_patch);
  });
  return out;
}

std::size_t select_outcome(std::span<const HypothesisOutcome> outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("no outcomes to select from");
  auto key = [](const HypothesisOutcome& o) {
    const double z = std::isnan(o.seam.zncc_score) ? std::numeric_limits<double>::infinity()
                                                   : o.seam.zncc_score;
    return std::make_tuple(z, o.seam.total_cost, o.index);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < outcomes.size(); ++i)
    if (key(outcomes[i]) < key(outcomes[best])) best = i;
  return best;
}

StitchOutput stitch(const cv::Mat& target, const cv::Mat& reference, const DualFeatureSet& set,
                    const StitchConfig& config, const cv::Mat& saliency) {
  config.validate();
  validate(set);
  if (target.type() != CV_8UC3 || reference.type() != CV_8UC3)
    throw ValidationError(RecordKind::Set, std::nullopt, "images must be 8-bit, 3-channel");
  if (target.cols != set.target_dims.width || target.rows != set.target_dims.height)
    throw ValidationError(RecordKind::Set, std::nullopt, "target image size differs from target_dims");
  if (reference.cols != set.ref_dims.width || reference.rows != set.ref_dims.height)
    throw ValidationError(RecordKind::Set, std::nullopt, "reference image size differs from ref_dims");
  if (!saliency.empty() && (saliency.cols != reference.cols || saliency.rows != reference.rows))
    throw ValidationError(RecordKind::Set, std::nullopt, "saliency size differs from the reference");

  StitchOutput out;
  out.config = config;
  out.direction = config.direction.value_or(detect_direction(set));

  auto t0 = Clock::now();
  out.grouping = run_stage("grouping", std::nullopt, [&] {
    CorrespondenceGraph g = build_graph(set, out.direction, config.grouping);
    return generate_hypotheses(std::move(g), config.grouping.tau, config.grouping.min_remaining);
  });
  if (out.grouping.hypotheses.empty())
    throw StageError("grouping", std::nullopt, "no hypothesis produced");
  out.timings.grouping_ms = ms_since(t0);

  t0 = Clock::now();
  const auto& hyps = out.grouping.hypotheses;
  out.outcomes.resize(hyps.size());
  if (config.parallel && hyps.size() > 1) {
    std::vector<std::future<HypothesisOutcome>> jobs;
    for (std::size_t i = 0; i < hyps.size(); ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return align_hypothesis(target, reference, set, hyps[i], i, out.direction, config, saliency);
      }));
    // Collect in order; the first failure by index is the one reported.
    std::exception_ptr failure;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      try {
        out.outcomes[i] = jobs[i].get();
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (std::size_t i = 0; i < hyps.size(); ++i)
      out.outcomes[i] =
          align_hypothesis(target, reference, set, hyps[i], i, out.direction, config, saliency);
  }
  out.timings.alignment_ms = ms_since(t0);

  t0 = Clock::now();
  out.chosen = select_outcome(out.outcomes);
  out.timings.selection_ms = ms_since(t0);

  t0 = Clock::now();
  const auto& best = out.chosen_outcome();
  out.composite = composite(best.warped, best.reference, best.seam, config.feather_radius);
  out.timings.composite_ms = ms_since(t0);
  return out;
}

nlohmann::json make_report(const StitchOutput& output) {
  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& o : output.outcomes) {
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& r : o.iterations)
      iters.push_back({{"iteration", r.iteration},
                       {"mean_vertex_change", r.mean_vertex_change},
                       {"energies", to_json(r.energies)},
                       {"seam_cost", r.seam_cost},
                       {"folded_cells", r.folded_cells}});
    const std::size_t np = output.grouping.graph.num_points;
    hyps.push_back({{"index", o.index},
                    {"members", o.hypothesis.sorted_members()},
                    {"num_points", o.hypothesis.point_indices(np).size()},
                    {"num_lines", o.hypothesis.line_indices(np).size()},
                    {"generation_round", o.hypothesis.generation_round},
                    {"iterations_used", o.iterations_used},
                    {"iterations", iters},
                    {"zncc_score", number_or_null(o.seam.zncc_score)},
                    {"seam_cost", o.seam.total_cost},
                    {"seam_pixels", o.seam.seam_pixels.size()},
                    {"canvas", canvas_json(o.canvas)},
                    {"chosen", o.index == output.chosen_outcome().index}});
  }
  const auto& t = output.timings;
  return {{"config", output.config.to_json()},
          {"direction", to_string(output.direction)},
          {"hypothesis_count", output.outcomes.size()},
          {"chosen", output.chosen},
          {"chosen_zncc_score", number_or_null(output.chosen_outcome().seam.zncc_score)},
          {"grouping",
           {{"stop", to_string(output.grouping.stop)}, {"rounds", output.grouping.rounds.size()}}},
          {"hypotheses", hyps},
          {"composite", {{"width", output.composite.cols}, {"height", output.composite.rows}}},
          {"timings",
           {{"grouping_ms", t.grouping_ms},
            {"alignment_ms", t.alignment_ms},
            {"selection_ms", t.selection_ms},
            {"composite_ms", t.composite_ms}}}};
}

void evaluate_report(const StitchOutput& output, const std::filesystem::path& path) {
  write_text(path, make_report(output).dump(2) + "\n");
  std::ostringstream s;
  s << "hypotheses: " << output.outcomes.size() << "  direction: " << to_string(output.direction)
    << "\n";
  s << std::left << std::setw(6) << "hypo" << std::setw(8) << "points" << std::setw(7) << "lines"
    << std::setw(7) << "iters" << std::setw(14) << "seam_cost" << std::setw(10) << "seam"
    << "chosen\n";
  const std::size_t np = output.grouping.graph.num_points;
  for (const auto& o : output.outcomes)
    s << std::left << std::setw(6) << o.index << std::setw(8) << o.hypothesis.point_indices(np).size()
      << std::setw(7) << o.hypothesis.line_indices(np).size() << std::setw(7) << o.iterations_used
      << std::setw(14) << fixed(o.seam.total_cost, 3) << std::setw(10)
      << fixed(o.seam.zncc_score, 4) << (o.index == output.chosen_outcome().index ? "*" : "")
      << "\n";
  const auto& t = output.timings;
  s << "timings (ms): grouping " << fixed(t.grouping_ms, 1) << ", alignment "
    << fixed(t.alignment_ms, 1) << ", selection " << fixed(t.selection_ms, 1) << ", composite "
    << fixed(t.composite_ms, 1) << "\n";
  auto txt = path;
  txt.replace_extension(".txt");
  write_text(txt, s.str());
}

nlohmann::json mesh_dump(const StitchOutput& output) {
  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& o : output.outcomes) {
    nlohmann::json j = mesh_to_json(o.mesh);
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& r : o.iterations)
      iters.push_back({{"iteration", r.iteration},
                       {"V_hat", std::vector<double>(r.V_hat.data(), r.V_hat.data() + r.V_hat.size())},
                       {"energies", to_json(r.energies)}});
    j["hypothesis"] = o.index;
    j["iterations"] = iters;
    hyps.push_back(std::move(j));
  }
  return {{"hypotheses", hyps}};
}

nlohmann::json evaluate_batch(const std::filesystem::path& manifest, const StitchConfig& config,
                              const std::filesystem::path& out) {
  std::ifstream f(manifest);
  if (!f) throw Error("cannot open manifest " + manifest.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  const auto base = manifest.parent_path();
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream s;
  s << std::left << std::setw(24) << "pair" << std::setw(6) << "hypo" << "seam\n";
  for (const auto& p : m.at("pairs")) {
    const std::string name = p.at("name").get<std::string>();
    nlohmann::json row{{"name", name}};
    try {
      const cv::Mat target = cv::imread((base / p.at("target").get<std::string>()).string(), cv::IMREAD_COLOR);
      const cv::Mat ref = cv::imread((base / p.at("ref").get<std::string>()).string(), cv::IMREAD_COLOR);
      if (target.empty() || ref.empty()) throw Error("cannot read images");
      const DualFeatureSet set = load_correspondences(base / p.at("corr").get<std::string>());
      cv::Mat sal;
      if (p.contains("saliency"))
        sal = normalize_saliency(
            cv::imread((base / p.at("saliency").get<std::string>()).string(), cv::IMREAD_UNCHANGED));
      const StitchOutput o = stitch(target, ref, set, config, sal);
      row["hypo"] = o.outcomes.size();
      row["seam"] = number_or_null(o.chosen_outcome().seam.zncc_score);
      nlohmann::json scores = nlohmann::json::array();
      for (const auto& oc : o.outcomes) scores.push_back(number_or_null(oc.seam.zncc_score));
      row["scores"] = scores;
      s << std::left << std::setw(24) << name << std::setw(6) << o.outcomes.size()
        << fixed(o.chosen_outcome().seam.zncc_score, 3) << "\n";
    } catch (const std::exception& e) {
      row["error"] = e.what();
      s << std::left << std::setw(24) << name << std::setw(6) << "-" << "failed\n";
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json result{{"pairs", rows}, {"config", config.to_json()}};
  auto json_path = out, txt_path = out;
  json_path.replace_extension(".json");
  txt_path.replace_extension(".txt");
  write_text(json_path, result.dump(2) + "\n");
  write_text(txt_path, s.str());
  return result;
}

}  // namespace pstitch
