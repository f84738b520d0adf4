// stitch: seam-driven two-image stitching from a correspondence file.
//
// Exit codes: 0 success, 2 invalid input, 3 stage failure.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>

#include "pstitch/pipeline.hpp"

using namespace pstitch;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitStage = 3;

struct Inputs {
  std::string target, ref, corr, saliency;
};

struct Options {
  StitchConfig config;
  std::string direction = "auto";
  int max_iters = 5;
  int cells = 1600;
};

void add_config_options(CLI::App& app, Options& o) {
  app.add_option("--tau", o.config.grouping.tau, "CRDE threshold in pixels")->capture_default_str();
  app.add_option("--min-remaining", o.config.grouping.min_remaining,
                 "stop grouping below this many ungrouped features")
      ->capture_default_str();
  app.add_option("--max-iters", o.max_iters, "alignment iterations per hypothesis")->capture_default_str();
  app.add_option("--cells", o.cells, "target mesh cell count")->capture_default_str();
  app.add_option("--direction", o.direction, "stitching direction")
      ->check(CLI::IsMember({"h", "v", "auto"}))
      ->capture_default_str();
  app.add_option("--mdlt-sigma", o.config.grouping.mdlt.sigma, "local homography bandwidth (px)")
      ->capture_default_str();
  app.add_option("--feather", o.config.feather_radius, "feathering radius around the seam (px)")
      ->capture_default_str();
  app.add_flag("--sequential", [&o](std::int64_t) { o.config.parallel = false; },
               "align hypotheses one after another");
}

void finish_config(Options& o) {
  o.config.max_iterations = o.max_iters;
  o.config.target_cells = o.cells;
  if (o.direction == "h") o.config.direction = Direction::Horizontal;
  if (o.direction == "v") o.config.direction = Direction::Vertical;
}

void add_inputs(CLI::App& app, Inputs& in, bool corr = true) {
  app.add_option("--target", in.target, "target image")->check(CLI::ExistingFile);
  app.add_option("--ref", in.ref, "reference image")->check(CLI::ExistingFile);
  if (corr) app.add_option("--corr", in.corr, "correspondence JSON")->check(CLI::ExistingFile);
  app.add_option("--saliency", in.saliency, "grayscale saliency over the reference")
      ->check(CLI::ExistingFile);
}

cv::Mat read_image(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(RecordKind::Set, std::nullopt, std::string("--") + what + " is required");
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty()) throw ValidationError(RecordKind::Set, std::nullopt, "cannot read image " + path);
  return img;
}

cv::Mat read_saliency(const std::string& path) {
  if (path.empty()) return {};
  cv::Mat raw = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw ValidationError(RecordKind::Set, std::nullopt, "cannot read saliency " + path);
  return normalize_saliency(raw);
}

DualFeatureSet read_corr(const std::string& path) {
  if (path.empty()) throw ValidationError(RecordKind::Set, std::nullopt, "--corr is required");
  return load_correspondences(path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

void write_png(const std::string& path, const cv::Mat& img) {
  if (!cv::imwrite(path, img)) throw Error("cannot write " + path);
}

// Coverage from an optional mask file, else from nonzero pixels.
cv::Mat coverage(const cv::Mat& img, const std::string& mask_path) {
  if (!mask_path.empty()) {
    cv::Mat m = cv::imread(mask_path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw ValidationError(RecordKind::Set, std::nullopt, "cannot read mask " + mask_path);
    return m;
  }
  cv::Mat mask(img.rows, img.cols, CV_8U);
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      const auto& p = img.at<cv::Vec3b>(y, x);
      mask.at<std::uint8_t>(y, x) = (p[0] || p[1] || p[2]) ? 255 : 0;
    }
  return mask;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seam-driven image stitching"};
  app.require_subcommand(0, 1);

  Inputs in;
  Options opt;
  std::string out_png, report, dump_graph, dump_mesh, dump_seam;
  add_inputs(app, in);
  add_config_options(app, opt);
  app.add_option("--out", out_png, "composite PNG");
  app.add_option("--report", report, "report JSON (a .txt table is written next to it)");
  app.add_option("--dump-graph", dump_graph, "correspondence graph JSON");
  app.add_option("--dump-mesh", dump_mesh, "mesh JSON with every iterate");
  app.add_option("--dump-seam", dump_seam, "seam label PNG (plus .json)");

  auto* group = app.add_subcommand("group", "build the graph and hypotheses only");
  Inputs g_in;
  Options g_opt;
  std::string g_out;
  group->add_option("--corr", g_in.corr, "correspondence JSON")->required()->check(CLI::ExistingFile);
  group->add_option("--out", g_out, "graph and hypotheses JSON");
  add_config_options(*group, g_opt);

  auto* warp = app.add_subcommand("warp", "align a single hypothesis");
  Inputs w_in;
  Options w_opt;
  std::string w_out, w_mesh;
  std::size_t w_hyp = 0;
  add_inputs(*warp, w_in);
  add_config_options(*warp, w_opt);
  warp->add_option("--hypothesis", w_hyp, "hypothesis index")->capture_default_str();
  warp->add_option("--out", w_out, "warped target PNG on the canvas");
  warp->add_option("--dump-mesh", w_mesh, "mesh JSON");

  auto* seam = app.add_subcommand("seam", "seam and score on two aligned canvases");
  Inputs s_in;
  std::string s_tmask, s_rmask, s_out, s_dump, s_dir = "h";
  int s_patch = 15;
  add_inputs(*seam, s_in, false);
  seam->add_option("--target-mask", s_tmask, "target coverage mask (default: nonzero pixels)");
  seam->add_option("--ref-mask", s_rmask, "reference coverage mask (default: nonzero pixels)");
  seam->add_option("--direction", s_dir, "stitching direction")->check(CLI::IsMember({"h", "v"}));
  seam->add_option("--patch", s_patch, "ZNCC patch size")->capture_default_str();
  seam->add_option("--out", s_out, "composite PNG");
  seam->add_option("--dump-seam", s_dump, "seam label PNG (plus .json)");

  auto* eval = app.add_subcommand("eval", "batch report over a manifest of pairs");
  Options e_opt;
  std::string e_manifest, e_out = "eval";
  eval->add_option("--manifest", e_manifest, "manifest JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", e_out, "output stem (.json and .txt)")->capture_default_str();
  add_config_options(*eval, e_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*group) {
      finish_config(g_opt);
      const DualFeatureSet set = read_corr(g_in.corr);
      const Direction dir = g_opt.config.direction.value_or(detect_direction(set));
      GroupingResult result;
      try {
        result = generate_hypotheses(build_graph(set, dir, g_opt.config.grouping),
                                     g_opt.config.grouping.tau, g_opt.config.grouping.min_remaining);
      } catch (const ValidationError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError("grouping", std::nullopt, e.what());
      }
      const nlohmann::json j = graph_to_json(result.graph, &result);
      if (!g_out.empty()) write_json(g_out, j);
      std::cout << "hypotheses: " << result.hypotheses.size() << " (stop: " << to_string(result.stop)
                << ")\n";
      return 0;
    }
    if (*warp) {
      finish_config(w_opt);
      w_opt.config.validate();
      const cv::Mat target = read_image(w_in.target, "target");
      const cv::Mat ref = read_image(w_in.ref, "ref");
      const DualFeatureSet set = read_corr(w_in.corr);
      const cv::Mat sal = read_saliency(w_in.saliency);
      const Direction dir = w_opt.config.direction.value_or(detect_direction(set));
      GroupingResult result;
      try {
        result = generate_hypotheses(build_graph(set, dir, w_opt.config.grouping),
                                     w_opt.config.grouping.tau, w_opt.config.grouping.min_remaining);
      } catch (const std::exception& e) {
        throw StageError("grouping", std::nullopt, e.what());
      }
      if (w_hyp >= result.hypotheses.size())
        throw ValidationError(RecordKind::Set, std::nullopt,
                              "hypothesis " + std::to_string(w_hyp) + " of " +
                                  std::to_string(result.hypotheses.size()));
      const HypothesisOutcome o =
          align_hypothesis(target, ref, set, result.hypotheses[w_hyp], w_hyp, dir, w_opt.config, sal);
      if (!w_out.empty()) write_png(w_out, o.warped.image);
      if (!w_mesh.empty()) {
        nlohmann::json j = mesh_to_json(o.mesh);
        nlohmann::json iters = nlohmann::json::array();
        for (const auto& r : o.iterations)
          iters.push_back({{"iteration", r.iteration},
                           {"V_hat", std::vector<double>(r.V_hat.data(), r.V_hat.data() + r.V_hat.size())},
                           {"energies", to_json(r.energies)}});
        j["iterations"] = iters;
        write_json(w_mesh, j);
      }
      std::cout << "iterations: " << o.iterations_used << "  seam: " << o.seam.zncc_score << "\n";
      return 0;
    }
    if (*seam) {
      const cv::Mat a = read_image(s_in.target, "target");
      const cv::Mat b = read_image(s_in.ref, "ref");
      if (a.size() != b.size())
        throw ValidationError(RecordKind::Set, std::nullopt, "seam inputs must share one canvas");
      const cv::Mat sal = read_saliency(s_in.saliency);
      CanvasImage ta{a, coverage(a, s_tmask)}, rb{b, coverage(b, s_rmask)};
      SeamResult result;
      try {
        const OverlapRegion region = make_overlap_region(
            ta.mask, rb.mask, s_dir == "v" ? Direction::Vertical : Direction::Horizontal);
        result = find_seam(perception_cost(a, b, region, sal), region);
        result.zncc_score =
            result.seam_pixels.empty() ? 0.0 : zncc_quality(result, region, a, b, s_patch);
      } catch (const std::exception& e) {
        throw StageError("seam", std::nullopt, e.what());
      }
      if (!s_dump.empty()) pstitch::dump_seam(result, ta, rb, s_dump);
      if (!s_out.empty()) write_png(s_out, composite(ta, rb, result));
      std::cout << "seam cost: " << result.total_cost << "  seam: " << result.zncc_score << "\n";
      return 0;
    }
    if (*eval) {
      finish_config(e_opt);
      e_opt.config.validate();
      evaluate_batch(e_manifest, e_opt.config, e_out);
      return 0;
    }

    finish_config(opt);
    opt.config.validate();
    const cv::Mat target = read_image(in.target, "target");
    const cv::Mat ref = read_image(in.ref, "ref");
    const DualFeatureSet set = read_corr(in.corr);
    const cv::Mat sal = read_saliency(in.saliency);
    const StitchOutput o = stitch(target, ref, set, opt.config, sal);
    if (!out_png.empty()) write_png(out_png, o.composite);
    if (!report.empty()) evaluate_report(o, report);
    if (!dump_graph.empty()) write_json(dump_graph, graph_to_json(o.grouping.graph, &o.grouping));
    if (!dump_mesh.empty()) write_json(dump_mesh, mesh_dump(o));
    if (!dump_seam.empty()) pstitch::dump_seam(o.chosen_outcome().seam, o.chosen_outcome().warped,
                                      o.chosen_outcome().reference, dump_seam);
    std::cout << "hypotheses: " << o.outcomes.size() << "  chosen: " << o.chosen
              << "  seam: " << o.chosen_outcome().seam.zncc_score << "\n";
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "stage failure: output: " << e.what() << "\n";
    return kExitStage;
  }
}
