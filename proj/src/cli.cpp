#include "rsesf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "rsesf/audit.hpp"
#include "rsesf/config.hpp"
#include "rsesf/data.hpp"
#include "rsesf/error.hpp"
#include "rsesf/eval.hpp"
#include "rsesf/io.hpp"
#include "rsesf/net.hpp"
#include "rsesf/train.hpp"

namespace rsesf {

namespace {

double to_radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string loss_csv(const std::vector<double>& trace) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i) + "," + format_double(trace[i]) + "\n";
  }
  return out;
}

// ---- gen-data ----

struct GenDataArgs {
  std::string out;
  std::size_t count = 8;
  std::size_t size = 64;
  std::size_t classes = 5;
  std::uint64_t seed = 0;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  const fs::path dir(a.out);
  const MosaicSpec spec = MosaicSpec::defaults(a.size, a.classes);
  spec.validate();
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < a.count; ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << i << ".pgm";
    const auto sample = gen_mosaic(spec, derive_seed(a.seed, i));
    const fs::path image = fs::path("images") / name.str();
    const fs::path mask = fs::path("masks") / name.str();
    save_image(dir / image, sample.image);
    save_mask(dir / mask, sample.mask);
    entries.push_back({image, mask});
  }
  write_manifest(dir / "manifest.txt", entries);
  KeyValues kv{{"count", std::to_string(a.count)},
               {"size", std::to_string(a.size)},
               {"classes", std::to_string(a.classes)},
               {"seed", std::to_string(a.seed)}};
  write_file(dir / "gen_config.txt", format_key_values(kv));
  out << "wrote " << a.count << " mosaics to " << dir.string() << "\n";
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

Model train_model(const RunConfig& config, std::span<const LabeledImage> data,
                  std::vector<double>* trace) {
  Model model = make_model(config.model, init_seed(config.train));
  auto result = fit(data, std::move(model), config.train);
  if (trace) *trace = std::move(result.loss_trace);
  return std::move(result.model);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig config = load_run_config(a.config, a.overrides);
  if (!a.out.empty()) config.output_dir = a.out;
  if (config.output_dir.empty()) throw ArgumentError("train needs --out or output_dir");
  if (config.train_data.empty()) throw ArgumentError("train needs train_data in the config");
  const auto data = load_dataset(config.train_data);
  for (const auto& s : data) {
    if (s.image.dim(0) != config.model.input_channels) {
      throw ArgumentError("dataset images do not have input_channels channels");
    }
  }
  std::vector<double> trace;
  const Model model = train_model(config, data, &trace);
  fs::create_directories(config.output_dir);
  save_checkpoint(config.output_dir / "checkpoint", model);
  write_file(config.output_dir / "loss.csv", loss_csv(trace));
  write_file(config.output_dir / "config.txt", format_key_values(resolved(config)));
  out << "trained " << config.train.steps << " steps";
  if (!trace.empty()) out << ", loss " << trace.front() << " -> " << trace.back();
  out << "\ncheckpoint: " << (config.output_dir / "checkpoint").string() << "\n";
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::size_t rotations = 0;  // 0: model's r_infer
  std::string reduction;      // empty: model's reduction
  std::vector<double> angles{0.0};
  std::vector<double> scales{1.0};
  std::string out;
  bool no_margin = false;
};

EvalSettings settings_for(const Model& model, std::size_t rotations, const std::string& reduction,
                          bool no_margin) {
  EvalSettings s;
  s.rotations = rotations == 0 ? model.config.r_infer : rotations;
  s.reduction = reduction.empty() ? model.config.reduction : parse_reduction(reduction);
  s.margin = no_margin ? MarginPolicy::none : MarginPolicy::off_axis;
  return s;
}

KeyValues eval_record(const EvalArgs& a, const EvalSettings& s) {
  std::vector<std::string> angles, scales;
  for (double v : a.angles) angles.push_back(format_double(v));
  for (double v : a.scales) scales.push_back(format_double(v));
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
  };
  return {{"checkpoint", fs::absolute(a.checkpoint).string()},
          {"data", fs::absolute(a.data).string()},
          {"rotations", std::to_string(s.rotations)},
          {"reduction", to_string(s.reduction)},
          {"angles_deg", join(angles)},
          {"scales", join(scales)},
          {"margin", s.margin == MarginPolicy::none ? "none" : "off_axis"}};
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Model model = load_checkpoint(a.checkpoint);
  const auto settings = settings_for(model, a.rotations, a.reduction, a.no_margin);
  const auto entries = read_manifest(a.data);
  const auto data = load_dataset(a.data);
  std::string csv = "image,angle_deg,scale,miou\n";
  std::string summary;
  for (double angle : a.angles) {
    for (double scale : a.scales) {
      const auto scores = evaluate(model, data, {to_radians(angle), scale}, settings);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        csv += csv_field(entries[i].image.generic_string()) + "," + format_double(angle) + "," +
               format_double(scale) + "," + format_double(scores[i]) + "\n";
      }
      const double m = mean(scores);
      summary += "mean," + format_double(angle) + "," + format_double(scale) + "," +
                 format_double(m) + "\n";
      out << "angle " << angle << " scale " << scale << ": mean mIoU " << m << "\n";
    }
  }
  csv += summary;
  if (!a.out.empty()) {
    const fs::path path(a.out);
    write_file(path, csv);
    write_file(path.parent_path() / (path.stem().string() + "_config.txt"),
               format_key_values(eval_record(a, settings)));
  } else {
    out << csv;
  }
  return kExitOk;
}

// ---- polar-report ----

struct PolarArgs {
  std::string checkpoint;
  std::string data;
  std::size_t angles = 8;
  std::vector<double> scales{0.5, 1.0, 1.5, 2.0};
  std::size_t rotations = 0;
  std::string reduction;
  std::string out;
};

struct Rgb {
  double r, g, b;
};

// Diverging red -> pale yellow -> green for mIoU 0 -> 0.5 -> 1.
std::string colormap(double value) {
  static constexpr Rgb stops[3] = {{215, 25, 28}, {255, 255, 191}, {26, 150, 65}};
  const double t = std::clamp(value, 0.0, 1.0) * 2.0;
  const int i = std::min(1, static_cast<int>(t));
  const double f = t - i;
  auto mix = [&](double lo, double hi) { return static_cast<int>(std::lround(lo + f * (hi - lo))); };
  std::ostringstream hex;
  hex << "#" << std::hex << std::setfill('0') << std::setw(2) << mix(stops[i].r, stops[i + 1].r)
      << std::setw(2) << mix(stops[i].g, stops[i + 1].g) << std::setw(2)
      << mix(stops[i].b, stops[i + 1].b);
  return hex.str();
}

struct PolarPoint {
  double angle_deg, scale, miou;
};

std::string polar_svg(const std::vector<PolarPoint>& points, const std::vector<double>& scales) {
  const double max_scale = *std::max_element(scales.begin(), scales.end());
  const double radius = 340.0;
  auto fmt = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
  };
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
         "viewBox=\"0 0 800 800\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"800\" fill=\"white\"/>\n";
  for (double s : scales) {
    const double r = radius * s / max_scale;
    svg << "  <circle cx=\"400\" cy=\"400\" r=\"" << fmt(r)
        << "\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>\n"
        << "  <text x=\"" << fmt(400 + r + 4) << "\" y=\"396\" font-size=\"12\" "
        << "font-family=\"sans-serif\" fill=\"#555555\">" << format_double(s) << "</text>\n";
  }
  svg << "  <line x1=\"40\" y1=\"400\" x2=\"760\" y2=\"400\" stroke=\"#cccccc\"/>\n"
      << "  <line x1=\"400\" y1=\"40\" x2=\"400\" y2=\"760\" stroke=\"#cccccc\"/>\n";
  for (const auto& p : points) {
    const double r = radius * p.scale / max_scale;
    const double a = to_radians(p.angle_deg);
    svg << "  <circle cx=\"" << fmt(400 + r * std::cos(a)) << "\" cy=\""
        << fmt(400 - r * std::sin(a)) << "\" r=\"9\" fill=\"" << colormap(p.miou)
        << "\" stroke=\"black\" stroke-width=\"0.5\"><title>angle " << format_double(p.angle_deg)
        << ", scale " << format_double(p.scale) << ", mIoU " << fmt(p.miou)
        << "</title></circle>\n";
  }
  svg << "  <text x=\"20\" y=\"30\" font-size=\"16\" font-family=\"sans-serif\">"
         "mIoU by rotation angle and scale (0 red, 0.5 yellow, 1 green)</text>\n"
      << "</svg>\n";
  return svg.str();
}

int cmd_polar_report(const PolarArgs& a, std::ostream& out) {
  if (a.angles == 0) throw ArgumentError("--angles must be positive");
  if (a.scales.empty()) throw ArgumentError("--scales needs at least one value");
  const Model model = load_checkpoint(a.checkpoint);
  const auto settings = settings_for(model, a.rotations, a.reduction, false);
  const auto data = load_dataset(a.data);
  std::vector<PolarPoint> points;
  std::string csv = "angle_deg,scale,miou\n";
  for (std::size_t i = 0; i < a.angles; ++i) {
    const double angle = 360.0 * static_cast<double>(i) / static_cast<double>(a.angles);
    for (double scale : a.scales) {
      const double m = mean(evaluate(model, data, {to_radians(angle), scale}, settings));
      points.push_back({angle, scale, m});
      csv += format_double(angle) + "," + format_double(scale) + "," + format_double(m) + "\n";
    }
  }
  const fs::path prefix(a.out);
  write_file(prefix.string() + ".csv", csv);
  write_file(prefix.string() + ".svg", polar_svg(points, a.scales));
  out << "wrote " << prefix.string() << ".csv and " << prefix.string() << ".svg\n";
  return kExitOk;
}

// ---- audit ----

struct AuditArgs {
  std::string checkpoint;
  bool random_model = false;
  std::string config;
  std::uint64_t seed = 0;
  std::string corrupt;
  double corrupt_magnitude = 0.5;
  std::string out;
};

int cmd_audit(const AuditArgs& a, std::ostream& out) {
  if (a.random_model == !a.checkpoint.empty()) {
    throw ArgumentError("audit needs exactly one of --checkpoint or --random-model");
  }
  Model model;
  if (a.random_model) {
    ModelConfig mc;
    if (!a.config.empty()) {
      for (const auto& [k, v] : read_key_values(a.config)) {
        if (!assign_model_config(mc, k, v)) throw ArgumentError("unknown model key '" + k + "'");
      }
    }
    model = make_model(mc, a.seed);
  } else {
    model = load_checkpoint(a.checkpoint);
  }
  AuditOptions options;
  options.seed = a.seed;
  if (!a.corrupt.empty()) {
    const auto idx = parse_size_list(a.corrupt);
    if (idx.size() != 3 || idx[0] == 0) {
      throw ArgumentError("--corrupt-slice expects layer,group,slice (layer from 1)");
    }
    options.fault = FaultInjection{idx[0] - 1, idx[1], idx[2], a.corrupt_magnitude};
  }
  const auto report = run_audit(model, options);
  const std::string text = report.to_text();
  if (!a.out.empty()) write_file(a.out, text);
  out << text;
  return report.passed() ? kExitOk : kExitAuditBreach;
}

// ---- augment-compare ----

struct AugmentArgs {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

int cmd_augment_compare(const AugmentArgs& a, std::ostream& out) {
  RunConfig config = load_run_config(a.config, a.overrides);
  if (!a.out.empty()) config.output_dir = a.out;
  if (config.output_dir.empty()) throw ArgumentError("augment-compare needs --out or output_dir");
  if (config.train_data.empty() || config.test_data.empty()) {
    throw ArgumentError("augment-compare needs train_data and test_data");
  }
  const auto train = load_dataset(config.train_data);
  const auto test = load_dataset(config.test_data);
  const auto augmented = augment_quarter_turns(train);
  fs::create_directories(config.output_dir);
  write_file(config.output_dir / "config.txt", format_key_values(resolved(config)));

  std::string csv = "model,augmentation,r_infer,mean_miou\n";
  const OODTransform quarter{std::numbers::pi / 2.0, 1.0};
  struct Variant {
    const char* name;
    const char* augmentation;
    std::span<const LabeledImage> data;
  };
  for (const Variant& v : {Variant{"a", "none", train}, Variant{"b", "rot90x4", augmented}}) {
    std::vector<double> trace;
    const Model model = train_model(config, v.data, &trace);
    const fs::path dir = config.output_dir / (std::string("model_") + v.name);
    save_checkpoint(dir / "checkpoint", model);
    write_file(dir / "loss.csv", loss_csv(trace));
    for (std::size_t r : {std::size_t{1}, std::size_t{4}}) {
      EvalSettings s;
      s.rotations = r;
      s.reduction = config.model.reduction;
      const double m = mean(evaluate(model, test, quarter, s));
      csv += std::string(v.name) + "," + v.augmentation + "," + std::to_string(r) + "," +
             format_double(m) + "\n";
      out << "model " << v.name << " (" << v.augmentation << "), R_infer " << r
          << ": rotated-split mIoU " << m << "\n";
    }
  }
  write_file(config.output_dir / "augment_compare.csv", csv);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rotation- and scale-equivariant steerable filter segmentation toolkit", "rsesf"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a procedural texture-mosaic dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of mosaics")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image side in pixels")->capture_default_str();
  gen_cmd->add_option("--classes", gen.classes, "Texture classes K")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Base seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train with a single rotation channel");
  train_cmd->add_option("--config", tr.config, "key=value run config")->required();
  train_cmd->add_option("--out", tr.out, "Output directory (overrides output_dir)");
  train_cmd->add_option("--set", tr.overrides, "Override a config key (key=value)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "mIoU on rotated/rescaled data");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset manifest")->required();
  eval_cmd->add_option("--R", ev.rotations, "Inference rotation channels (default r_infer)");
  eval_cmd->add_option("--reduction", ev.reduction, "max | unified | per_channel");
  eval_cmd->add_option("--angle", ev.angles, "Rotation angles in degrees")->delimiter(',');
  eval_cmd->add_option("--scale", ev.scales, "Rescale factors in [0.5, 2]")->delimiter(',');
  eval_cmd->add_option("--out", ev.out, "CSV output path (default stdout)");
  eval_cmd->add_flag("--no-margin", ev.no_margin, "Score border pixels after off-axis rotations");

  PolarArgs po;
  auto* polar_cmd = app.add_subcommand("polar-report", "Polar mIoU sweep over angle and scale");
  polar_cmd->add_option("--checkpoint", po.checkpoint, "Checkpoint directory")->required();
  polar_cmd->add_option("--data", po.data, "Dataset manifest")->required();
  polar_cmd->add_option("--angles", po.angles, "Equally spaced angles over 360 degrees")
      ->capture_default_str();
  polar_cmd->add_option("--scales", po.scales, "Scale factors")->delimiter(',');
  polar_cmd->add_option("--R", po.rotations, "Inference rotation channels (default r_infer)");
  polar_cmd->add_option("--reduction", po.reduction, "max | unified | per_channel");
  polar_cmd->add_option("--out", po.out, "Output prefix for .csv and .svg")->required();

  AuditArgs au;
  auto* audit_cmd = app.add_subcommand("audit", "Equivariance audit (exit 3 on breach)");
  audit_cmd->add_option("--checkpoint", au.checkpoint, "Checkpoint directory");
  audit_cmd->add_flag("--random-model", au.random_model, "Audit a freshly initialized model");
  audit_cmd->add_option("--model-config", au.config, "Model keys for --random-model");
  audit_cmd->add_option("--seed", au.seed, "Seed for test inputs and random models");
  audit_cmd->add_option("--corrupt-slice", au.corrupt,
                        "Perturb one materialized slice: layer,group,slice");
  audit_cmd->add_option("--corrupt-magnitude", au.corrupt_magnitude, "Perturbation amplitude")
      ->capture_default_str();
  audit_cmd->add_option("--out", au.out, "Write the report here as well");

  AugmentArgs ag;
  auto* aug_cmd = app.add_subcommand("augment-compare",
                                     "Train with and without 90 degree augmentation and compare");
  aug_cmd->add_option("--config", ag.config, "key=value run config")->required();
  aug_cmd->add_option("--out", ag.out, "Output directory (overrides output_dir)");
  aug_cmd->add_option("--set", ag.overrides, "Override a config key (key=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (polar_cmd->parsed()) return cmd_polar_report(po, out);
    if (audit_cmd->parsed()) return cmd_audit(au, out);
    if (aug_cmd->parsed()) return cmd_augment_compare(ag, out);
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace rsesf
