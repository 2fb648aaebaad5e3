// Command line front end: construct, verify-geometry, estimate-dim, l2-report, run.
//
// Exit codes: 0 all assertions passed, 1 an assertion failed, 2 usage or
// config errors.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "affdim/config.hpp"
#include "affdim/experiments.hpp"
#include "affdim/parallel.hpp"
#include "affdim/tube.hpp"

using namespace affdim;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

// Config keys as flags: --subset-depth and --subset_depth both work.
struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::string config_file;
  unsigned threads = 0;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "flat key = value config file; flags win over it");
    app->add_option("--threads", threads, "worker threads (results do not depend on it)");
    for (const auto& key : config_keys()) {
      std::string dashed = key;
      for (auto& ch : dashed) ch = ch == '_' ? '-' : ch;
      std::string names = "--" + dashed;
      if (dashed != key) names += ",--" + key;
      app->add_option(names, values[key], "config key " + key);
    }
  }

  RunConfig resolve(const CLI::App* app) const {
    RunConfig c;
    if (!config_file.empty()) c = load_config_file(config_file, c);
    if (const char* root = std::getenv("AFFDIM_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
      c.output_root = root;
    }
    for (const auto& key : config_keys()) {
      std::string dashed = key;
      for (auto& ch : dashed) ch = ch == '_' ? '-' : ch;
      if (app->count("--" + dashed) > 0) set_config_value(c, key, values.at(key));
    }
    set_worker_count(threads);
    return c;
  }
};

bool report_violations(const std::vector<ConfigViolation>& v) {
  for (const auto& x : v) std::cerr << "config error: " << x.key << ": " << x.message << "\n";
  return v.empty();
}

void print_assertions(const ExperimentResult& r) {
  for (const auto& a : r.assertions) {
    std::cerr << (a.passed ? "PASS " : "FAIL ") << a.criterion << "  value=" << format_number(a.value) << " "
              << a.relation << " " << format_number(a.bound);
    if (a.relation == "within") std::cerr << " +- " << format_number(a.tolerance);
    std::cerr << "\n";
  }
  for (const auto& f : r.failures()) std::cerr << "failed criterion: " << f << "\n";
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_new_file(out_path, text);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_code(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

int run_pipeline(const std::string& name, const RunConfig& c, const std::string& out_path, bool to_run_dir) {
  if (!report_violations(experiment_violations(name, c))) return kExitUsage;
  const ExperimentResult r = run_experiment(name, c);
  if (to_run_dir) {
    const auto dir = write_run(r, c);
    std::cout << dir.string() << "\n";
  } else {
    emit(report_text(r, c), out_path);
  }
  print_assertions(r);
  return r.passed() ? 0 : kExitFail;
}

int verify_pair(const RunConfig& c, const std::string& code_a, const std::string& code_b) {
  if (!report_violations(validate_config(c))) return kExitUsage;
  const Ambient a = make_ambient(c.n, c.k);
  const AffinePlane p(a, parse_code(code_a));
  const AffinePlane q(a, parse_code(code_b));
  const SlopeBound bound = derive_slope_bound(std::vector<AffinePlane>{p, q});
  const DomainBox box(a, c.delta0);
  Json out;
  out["config_hash"] = config_hash(c);
  out["code_distance"] = code_metric(p, q);
  out["slope_bound"] = {{"b_max", bound.b_max}, {"c", bound.c}, {"D", bound.D}};
  Json levels = Json::array();
  bool ok = true;
  std::uint64_t li = 0;
  for (double delta : config_deltas(c)) {
    const bool sep = separation_test(p, q, delta, bound);
    const McEstimate mc = intersection_volume_mc(p, q, delta, box, c.samples, derive_seed(c.seed, li++),
                                                 SamplingRegion::tube_envelope);
    Json l;
    l["delta"] = delta;
    l["separated"] = sep;
    l["estimate"] = mc.estimate;
    l["std_error"] = mc.std_error;
    l["hits"] = mc.hits;
    if (sep && mc.hits != 0) ok = false;
    if (slope_distance(p, q) > 0.0) {
      const double sb = strip_bound(p, q, delta, bound);
      l["strip_bound"] = sb;
      if (mc.estimate - 3.0 * mc.std_error > sb) ok = false;
    }
    l["gengeo_ratio"] = mc.estimate * (code_metric(p, q) + delta) / std::pow(delta, a.codim() + 1);
    levels.push_back(l);
  }
  out["levels"] = levels;
  out["passed"] = ok;
  std::cout << out.dump(2) << "\n";
  if (!ok) std::cerr << "failed criterion: separation_soundness or strip_bound_dominance\n";
  return ok ? 0 : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine plane families: constructions, tube geometry, dimension fits and L2 checks"};
  app.require_subcommand(1);

  auto* construct = app.add_subcommand("construct", "build a point cloud and write it as CSV");
  ConfigFlags construct_flags;
  construct_flags.attach(construct);
  std::string construct_kind;
  std::string construct_out;
  construct->add_option("kind", construct_kind, "sharpness | furstenberg | skeleton | distance-r | counterexample")
      ->required();
  construct->add_option("--out", construct_out, "CSV path (stdout when omitted)");

  auto* verify = app.add_subcommand("verify-geometry", "tube separation, strip bound and gengeo checks");
  ConfigFlags verify_flags;
  verify_flags.attach(verify);
  std::string code_a;
  std::string code_b;
  std::string verify_out;
  verify->add_option("--plane-a", code_a, "comma separated code a0, b1, ..., bk of the first plane");
  verify->add_option("--plane-b", code_b, "code of the second plane");
  verify->add_option("--out", verify_out, "report path (stdout when omitted)");

  auto* estimate = app.add_subcommand("estimate-dim", "box-counting dimension of a CSV point cloud");
  ConfigFlags estimate_flags;
  estimate_flags.attach(estimate);
  std::string input;
  double gen_scale = 0.0;
  std::string estimate_out;
  estimate->add_option("--input", input, "CSV from construct")->required();
  estimate->add_option("--gen-scale", gen_scale, "resolution of the cloud (median spacing when omitted)");
  estimate->add_option("--out", estimate_out, "box count CSV path");

  auto* l2 = app.add_subcommand("l2-report", "L2 chain on a sharpness family");
  ConfigFlags l2_flags;
  l2_flags.attach(l2);
  std::string l2_out;
  l2->add_option("--out", l2_out, "report path (stdout when omitted)");

  auto* run = app.add_subcommand("run", "registered experiment into an append-only run directory");
  ConfigFlags run_flags;
  run_flags.attach(run);
  std::string run_name;
  run->add_option("name", run_name, "geometry-suite | sharpness | furstenberg | skeleton | distance-r | "
                                    "counterexample | l2-suite")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*construct) {
      const RunConfig c = construct_flags.resolve(construct);
      if (!report_violations(validate_config(c))) return kExitUsage;
      const PointCloud cloud = build_cloud(construct_kind, c);
      emit(cloud_csv(cloud), construct_out);
      Json summary;
      summary["kind"] = construct_kind;
      summary["points"] = cloud.size();
      summary["n"] = cloud.n;
      summary["gen_scale"] = cloud.gen_scale;
      summary["config_hash"] = config_hash(c);
      std::cerr << summary.dump() << "\n";
      return 0;
    }
    if (*verify) {
      const RunConfig c = verify_flags.resolve(verify);
      if (code_a.empty() != code_b.empty()) {
        std::cerr << "give both --plane-a and --plane-b, or neither\n";
        return kExitUsage;
      }
      if (!code_a.empty()) return verify_pair(c, code_a, code_b);
      return run_pipeline("geometry-suite", c, verify_out, false);
    }
    if (*estimate) {
      const RunConfig c = estimate_flags.resolve(estimate);
      if (!report_violations(validate_config(c))) return kExitUsage;
      const PointCloud cloud = parse_cloud_csv(read_file(input), gen_scale);
      const FitWindow window = default_fit_window(cloud, c.octaves);
      const ScaleSeries series = box_count_series(cloud, dyadic_scales(window));
      const FitResult fit = dimension_fit(series, window);
      Json out;
      out["input"] = input;
      out["points"] = cloud.size();
      out["n"] = cloud.n;
      out["gen_scale"] = cloud.gen_scale;
      out["exponent"] = fit.exponent;
      out["r2"] = fit.r2;
      out["eps_max"] = fit.window.eps_max;
      out["eps_min"] = fit.window.eps_min;
      out["scales"] = fit.used;
      std::cout << out.dump(2) << "\n";
      if (!estimate_out.empty()) {
        Series s{"box_counts", {"epsilon", "box_count"}, {}};
        for (const auto& e : series.entries) s.rows.push_back({e.epsilon, e.value});
        write_new_file(estimate_out, series_csv(s));
      }
      return 0;
    }
    if (*l2) return run_pipeline("l2-suite", l2_flags.resolve(l2), l2_out, false);
    if (*run) return run_pipeline(run_name, run_flags.resolve(run), {}, true);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
