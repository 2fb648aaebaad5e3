#include "affdim/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

#include "affdim/constructions.hpp"
#include "affdim/harness.hpp"
#include "affdim/parallel.hpp"
#include "affdim/tube.hpp"

namespace affdim {

namespace {

constexpr double kFrostmanCap = 8.0;
// Gengeo ratios are checked over these dyadic levels and the crossing-lines
// oracle uses a fixed large sample so its 10% band is several stderr wide.
constexpr int kGengeoLevelMin = 4;
constexpr int kGengeoLevelMax = 10;
constexpr std::uint64_t kOracleSamples = std::uint64_t{1} << 20;
constexpr double kOracleTolerance = 0.1;

Assertion at_most(std::string criterion, double value, double bound, std::string detail = {}) {
  return {std::move(criterion), value <= bound, value, "<=", bound, 0.0, std::move(detail)};
}

Assertion at_least(std::string criterion, double value, double bound, std::string detail = {}) {
  return {std::move(criterion), value >= bound, value, ">=", bound, 0.0, std::move(detail)};
}

Assertion within(std::string criterion, double value, double centre, double tol, std::string detail = {}) {
  return {std::move(criterion), std::abs(value - centre) <= tol, value, "within", centre, tol,
          std::move(detail)};
}

Json fit_json(const FitResult& f) {
  Json j;
  j["exponent"] = f.exponent;
  j["intercept"] = f.intercept;
  j["r2"] = f.r2;
  j["eps_max"] = f.window.eps_max;
  j["eps_min"] = f.window.eps_min;
  j["scales"] = f.used;
  return j;
}

// Box counts over the fit window and the fit itself.
FitResult fit_cloud(const PointCloud& cloud, int octaves, const std::string& name,
                    ExperimentResult& out) {
  const FitWindow window = default_fit_window(cloud, octaves);
  const auto scales = dyadic_scales(window);
  const ScaleSeries series = box_count_series(cloud, scales);
  Series s{name, {"epsilon", "box_count"}, {}};
  for (const auto& e : series.entries) s.rows.push_back({e.epsilon, e.value});
  out.series.push_back(std::move(s));
  const FitResult fit = dimension_fit(series, window);
  Json c;
  c["points"] = cloud.size();
  c["gen_scale"] = cloud.gen_scale;
  c["fit"] = fit_json(fit);
  out.results[name] = c;
  return fit;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------- geometry

AffinePlane random_plane(Ambient a, Engine& e) {
  std::vector<double> code(static_cast<std::size_t>(a.code_size()));
  for (int i = 0; i < a.codim(); ++i) code[i] = uniform01(e) - 0.5;
  for (std::size_t i = a.codim(); i < code.size(); ++i) code[i] = 2.0 * uniform01(e) - 1.0;
  return AffinePlane(a, std::move(code));
}

// Odd pairs perturb the first plane at random scales so that separated,
// nearly parallel and transversal pairs all occur.
AffinePlane partner_plane(const AffinePlane& p, std::uint64_t i, Engine& e) {
  const Ambient a = p.ambient();
  if (i % 2 == 0) return random_plane(a, e);
  const double scale_a = std::ldexp(1.0, -static_cast<int>(uniform01(e) * 9.0));
  const double scale_b = std::ldexp(1.0, -static_cast<int>(uniform01(e) * 11.0));
  std::vector<double> code(p.code().begin(), p.code().end());
  for (int j = 0; j < a.codim(); ++j) code[j] += (2.0 * uniform01(e) - 1.0) * scale_a;
  for (std::size_t j = a.codim(); j < code.size(); ++j) {
    code[j] = std::clamp(code[j] + (2.0 * uniform01(e) - 1.0) * scale_b, -1.0, 1.0);
  }
  return AffinePlane(a, std::move(code));
}

void pair_checks(const RunConfig& c, ExperimentResult& out) {
  const std::vector<Ambient> ambients{{2, 1}, {3, 1}, {3, 2}};
  const int levels = c.delta_level_max - c.delta_level_min + 1;
  Series table{"pairs",
               {"n", "k", "delta", "code_distance", "separated", "hits", "estimate", "std_error",
                "strip_bound"},
               {}};
  std::uint64_t sep_violations = 0;
  std::uint64_t strip_violations = 0;
  std::uint64_t separated_total = 0;
  std::uint64_t strip_total = 0;
  double worst_strip = 0.0;
  Json per = Json::array();
  for (std::size_t ai = 0; ai < ambients.size(); ++ai) {
    const Ambient a = ambients[ai];
    const DomainBox box(a, c.delta0);
    const SlopeBound bound = SlopeBound::from_max(a, 1.0);
    std::uint64_t separated = 0;
    std::uint64_t sv = 0;
    std::uint64_t checked = 0;
    std::uint64_t stv = 0;
    for (std::uint64_t i = 0; i < c.pairs; ++i) {
      const std::uint64_t stream = derive_seed(c.seed, (static_cast<std::uint64_t>(ai) << 40) + i);
      Engine e(stream);
      const AffinePlane p = random_plane(a, e);
      const AffinePlane q = partner_plane(p, i, e);
      const int j = c.delta_level_min + std::min(levels - 1, static_cast<int>(uniform01(e) * levels));
      const double delta = std::ldexp(1.0, -j);
      const bool sep = separation_test(p, q, delta, bound);
      const McEstimate mc = intersection_volume_mc(p, q, delta, box, c.samples, derive_seed(stream, 1),
                                                   SamplingRegion::tube_envelope);
      double sb = NAN;
      if (sep) {
        ++separated;
        if (mc.hits != 0) ++sv;
      }
      if (slope_distance(p, q) > 0.0) {
        sb = strip_bound(p, q, delta, bound);
        ++checked;
        const double lhs = mc.estimate - 3.0 * mc.std_error;
        if (!(lhs <= sb)) ++stv;
        worst_strip = std::max(worst_strip, lhs / sb);
      }
      table.rows.push_back({static_cast<double>(a.n), static_cast<double>(a.k), delta,
                            code_metric(p, q), sep ? 1.0 : 0.0, static_cast<double>(mc.hits),
                            mc.estimate, mc.std_error, sb});
    }
    Json j;
    j["n"] = a.n;
    j["k"] = a.k;
    j["pairs"] = c.pairs;
    j["separated"] = separated;
    j["separated_with_hits"] = sv;
    j["strip_checked"] = checked;
    j["strip_exceeded"] = stv;
    per.push_back(j);
    sep_violations += sv;
    strip_violations += stv;
    separated_total += separated;
    strip_total += checked;
  }
  out.results["pairs"] = per;
  out.results["worst_strip_ratio"] = worst_strip;
  out.series.push_back(std::move(table));
  out.assertions.push_back(at_most("separation_soundness", static_cast<double>(sep_violations), 0.0,
                                   std::to_string(separated_total) + " separated pairs"));
  out.assertions.push_back(at_most("strip_bound_dominance", static_cast<double>(strip_violations), 0.0,
                                   std::to_string(strip_total) + " non-parallel pairs"));
}

struct GengeoFamily {
  std::string name;
  WeightedFamily family;
};

// Neighbouring planes in construction order carry the small distances (the
// first 16 include a deepest-level sibling pair); pairs (0, 2^m) add the
// large ones.
std::vector<std::pair<std::size_t, std::size_t>> gengeo_pairs(std::size_t count) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i + 1 < count && i < 16; ++i) out.emplace_back(i, i + 1);
  for (std::size_t m = 2; m < count; m *= 2) out.emplace_back(0, m);
  return out;
}

void gengeo_checks(const RunConfig& c, ExperimentResult& out) {
  const std::vector<GengeoFamily> families{
      {"sharpness_k1_n2_s0.5", sharpness_family(0.5, 1, 2, 6)},
      // Parallel planes only overlap below distance 2 delta, so the spacing
      // 0.8 * 2^-11 keeps every level down to 2^-10 nonzero.
      {"sharpness_k2_n3_s1", sharpness_family(1.0, 2, 3, 11)},
      {"crossing_lines_s1", furstenberg_cloud(1.0, 1.0, 5).family},
  };
  Series table{"gengeo", {"family", "delta", "max_ratio"}, {}};
  Json per = Json::array();
  for (std::size_t fi = 0; fi < families.size(); ++fi) {
    const auto& f = families[fi];
    const Ambient a = f.family.ambient();
    const DomainBox box(a, c.delta0);
    const auto pairs = gengeo_pairs(f.family.size());
    std::vector<double> max_ratio;
    for (int j = kGengeoLevelMin; j <= kGengeoLevelMax; ++j) {
      const double delta = std::ldexp(1.0, -j);
      double m = 0.0;
      for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto [x, y] = pairs[pi];
        const std::uint64_t seed = derive_seed(c.seed, (fi << 48) + (static_cast<std::uint64_t>(j) << 32) + pi);
        m = std::max(m, gengeo_ratio(f.family.planes[x], f.family.planes[y], delta, box, c.samples, seed,
                                     SamplingRegion::tube_envelope));
      }
      max_ratio.push_back(m);
      table.rows.push_back({static_cast<double>(fi), delta, m});
    }
    const double med = median(max_ratio);
    const double top = *std::max_element(max_ratio.begin(), max_ratio.end());
    Json j;
    j["family"] = f.name;
    j["pairs"] = pairs.size();
    j["max_ratio"] = top;
    j["median_of_max"] = med;
    per.push_back(j);
    out.assertions.push_back(at_most("gengeo_bounded/" + f.name, top, c.gengeo_cap * med,
                                     "max over pairs and delta against gengeo_cap x median over delta"));
  }
  out.results["gengeo"] = per;
  out.series.push_back(std::move(table));

  // Two lines crossing inside the window: the tubes meet in a parallelogram
  // of area (2 delta)^2 / sin(theta).
  const Ambient a{2, 1};
  const AffinePlane p(a, {-0.1, 0.2});
  const AffinePlane q(a, {0.1, -0.2});
  const DomainBox box(a, c.delta0);
  const double sin_theta = 0.4 / 1.04;
  const double d = code_metric(p, q);
  double worst = 0.0;
  Series oracle{"crossing_lines", {"delta", "mc_ratio", "formula_ratio"}, {}};
  for (int j = kGengeoLevelMin; j <= kGengeoLevelMax; ++j) {
    const double delta = std::ldexp(1.0, -j);
    const double mc = gengeo_ratio(p, q, delta, box, kOracleSamples, derive_seed(c.seed, 0xc055ULL + j),
                                   SamplingRegion::tube_envelope);
    const double formula = 4.0 * (d + delta) / sin_theta;
    worst = std::max(worst, std::abs(mc / formula - 1.0));
    oracle.rows.push_back({delta, mc, formula});
  }
  out.series.push_back(std::move(oracle));
  out.results["crossing_lines_worst_relative_error"] = worst;
  out.assertions.push_back(at_most("gengeo_crossing_lines_formula", worst, kOracleTolerance,
                                   "relative error against 4 (d + delta) / sin(theta)"));
}

ExperimentResult geometry_suite(const RunConfig& c) {
  ExperimentResult out;
  pair_checks(c, out);
  gengeo_checks(c, out);
  return out;
}

// ------------------------------------------------------------ constructions

void frostman_assertion(const WeightedFamily& family, double s, ExperimentResult& out) {
  const double cf = frostman_constant(family, s);
  out.results["frostman_constant"] = cf;
  out.assertions.push_back(at_most("frostman_constant", cf, kFrostmanCap));
}

ExperimentResult sharpness(const RunConfig& c) {
  ExperimentResult out;
  const auto fam = sharpness_family(c.s, c.k, c.n, c.depth);
  const FitResult fit = fit_cloud(build_cloud("sharpness", c), c.octaves, "union", out);
  const double target = c.alpha + c.s;
  out.assertions.push_back(within("union_dimension", fit.exponent, target, c.dim_tolerance,
                                  "alpha + s; k + s for full planes"));
  out.assertions.push_back(at_most("union_upper_bound", fit.exponent, c.k + c.s + c.dim_tolerance, "k + s"));
  frostman_assertion(fam, c.s, out);
  return out;
}

ExperimentResult furstenberg(const RunConfig& c) {
  ExperimentResult out;
  const FurstenbergSet f = furstenberg_cloud(c.alpha, c.s, c.depth);
  const FitResult fit = fit_cloud(f.cloud, c.octaves, "union", out);
  const double lower = 2.0 * c.alpha - 1.0 + c.s;
  out.assertions.push_back(at_least("furstenberg_lower_bound", fit.exponent, lower - c.dim_tolerance,
                                    "2 alpha - k + s with k = 1, less dim_tolerance"));
  frostman_assertion(f.family, c.s, out);
  return out;
}

ExperimentResult skeleton(const RunConfig& c) {
  ExperimentResult out;
  const FitResult fit = fit_cloud(build_cloud("skeleton", c), c.octaves, "union", out);
  out.assertions.push_back(at_least("skeleton_lower_bound", fit.exponent, c.k + 1 - c.dim_tolerance,
                                    "k + 1 less dim_tolerance"));
  return out;
}

ExperimentResult distance_r(const RunConfig& c) {
  ExperimentResult out;
  const FitResult fit = fit_cloud(build_cloud("distance-r", c), c.octaves, "distance_set", out);
  out.assertions.push_back(within("distance_set_dimension", fit.exponent, c.n - 1, c.dim_tolerance, "n - 1"));
  return out;
}

ExperimentResult counterexample(const RunConfig& c) {
  ExperimentResult out;
  const FitResult fit = fit_cloud(build_cloud("counterexample", c), c.octaves, "union", out);
  out.assertions.push_back(within("counterexample_dimension", fit.exponent, c.k + 1, c.dim_tolerance, "k + 1"));
  return out;
}

// ---------------------------------------------------------------------- L2

ExperimentResult l2_suite(const RunConfig& c) {
  ExperimentResult out;
  const auto fam = sharpness_family(c.s, c.k, c.n, c.depth);
  L2Settings st;
  st.alpha = c.alpha;
  st.subset_depth = c.subset_depth;
  st.epsilon = c.epsilon;
  st.delta0 = c.delta0;
  st.deltas = config_deltas(c);
  st.samples = c.samples;
  st.seed = c.seed;
  st.cs_tolerance = c.cs_tolerance;
  st.shell_cap = c.shell_cap;
  st.ade_floor = c.ade_floor;
  const L2Report r = run_l2_chain(fam, st);

  Json sel;
  sel["M"] = r.M;
  sel["cover_level"] = r.cover_level;
  sel["cover_balls"] = r.cover_balls;
  sel["found"] = r.selection.found;
  sel["level"] = r.selection.l;
  sel["planes"] = r.selection.members.size();
  sel["mass"] = r.selection.mass;
  sel["precondition_ok"] = r.selection.precondition_ok;
  sel["note"] = r.selection.note;
  out.results["selection"] = sel;
  out.results["frostman_constant"] = r.frostman_c;
  out.assertions.push_back(at_least("scale_selection", r.selection.found ? 1.0 : 0.0, 1.0,
                                    "some level l >= M carries mass >= 1/l^2"));
  out.assertions.push_back(at_most("frostman_constant", r.frostman_c, kFrostmanCap));
  if (!r.selection.found) return out;

  Series levels{"levels",
                {"delta", "tube_mass", "f_vol", "pair_mass", "pair_std_error", "lhs2", "rhs", "ok"},
                {}};
  Series shells{"shells",
                {"delta", "pivot", "j", "planes", "mass", "intersection_mass", "bound", "frostman_bound"},
                {}};
  Json lj = Json::array();
  for (const auto& lv : r.levels) {
    const auto& cs = lv.cs;
    const double rhs = cs.f_vol * (cs.pair_mass + cs.tolerance * cs.pair_std_error);
    levels.rows.push_back({lv.delta, cs.tube_mass, cs.f_vol, cs.pair_mass, cs.pair_std_error, cs.lhs2, rhs,
                           cs.ok ? 1.0 : 0.0});
    out.assertions.push_back(at_most("cauchy_schwarz/delta=" + format_number(lv.delta), cs.lhs2, rhs,
                                     "tube_mass^2 against F_vol (pair_mass + cs_tolerance stderr)"));
    double worst_shell = 0.0;
    double worst_frostman = 0.0;
    for (const auto& d : lv.shells) {
      for (const auto& s : d.shells) {
        shells.rows.push_back({lv.delta, static_cast<double>(d.pivot), static_cast<double>(s.j),
                               static_cast<double>(s.planes), s.mass, s.intersection_mass, s.bound,
                               s.frostman_bound});
        if (s.bound > 0.0) worst_shell = std::max(worst_shell, s.intersection_mass / s.bound);
        if (s.frostman_bound > 0.0) worst_frostman = std::max(worst_frostman, s.mass / s.frostman_bound);
      }
    }
    out.assertions.push_back(at_most("shell_bound/delta=" + format_number(lv.delta), worst_shell, c.shell_cap,
                                     "max over pivots and shells of intersection mass / bound"));
    out.assertions.push_back(at_most("shell_frostman/delta=" + format_number(lv.delta), worst_frostman, 1.0,
                                     "max over shells of mass / (C_F (2^{j+1} delta)^s)"));
    Json j;
    j["delta"] = lv.delta;
    j["tube_mass"] = cs.tube_mass;
    j["f_vol"] = cs.f_vol;
    j["pair_mass"] = cs.pair_mass;
    j["pair_std_error"] = cs.pair_std_error;
    j["lhs2"] = cs.lhs2;
    j["worst_shell_ratio"] = worst_shell;
    lj.push_back(j);
  }
  out.results["levels"] = lj;
  out.series.push_back(std::move(levels));
  out.series.push_back(std::move(shells));

  if (r.levels.size() >= 3) {
    out.results["tube_fit"] = fit_json(r.tube_fit);
    out.results["pair_fit"] = fit_json(r.pair_fit);
    const double target = c.n - c.k + c.s;
    out.assertions.push_back(at_least("pair_mass_exponent", r.pair_fit.exponent, target - c.dim_tolerance,
                                      "n - k + s less dim_tolerance"));
  }
  if (r.levels.size() >= 4) {
    Json a;
    a["fit"] = fit_json(r.ade.fit);
    a["predicted_exponent"] = r.ade.predicted_exponent;
    a["min_q"] = r.ade.min_q;
    a["floor"] = r.ade.floor;
    out.results["ade"] = a;
    out.assertions.push_back(at_least("ade_floor", r.ade.min_q, c.ade_floor,
                                      "min over delta of F_vol l^8 log(1/delta) / delta^{n - (2 alpha - k + s)}"));
    out.assertions.push_back(within("ade_exponent", r.ade.fit.exponent, r.ade.predicted_exponent,
                                    c.dim_tolerance, "n - (2 alpha - k + s)"));
  }
  return out;
}

using Pipeline = std::function<ExperimentResult(const RunConfig&)>;

const std::map<std::string, Pipeline>& registry() {
  static const std::map<std::string, Pipeline> r = {
      {"geometry-suite", geometry_suite}, {"sharpness", sharpness},   {"furstenberg", furstenberg},
      {"skeleton", skeleton},             {"distance-r", distance_r}, {"counterexample", counterexample},
      {"l2-suite", l2_suite},
  };
  return r;
}

std::string manifest_hash(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace

bool ExperimentResult::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

std::vector<std::string> ExperimentResult::failures() const {
  std::vector<std::string> out;
  for (const auto& a : assertions) {
    if (!a.passed) out.push_back(a.criterion);
  }
  return out;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"geometry-suite", "sharpness",      "furstenberg", "skeleton",
                                                 "distance-r",     "counterexample", "l2-suite"};
  return names;
}

std::vector<ConfigViolation> experiment_violations(const std::string& name, const RunConfig& c) {
  if (registry().count(name) == 0) throw std::invalid_argument("unknown experiment '" + name + "'");
  auto v = validate_config(c);
  auto need = [&](bool ok, const char* key, std::string message) {
    if (!ok) v.push_back({key, name + ": " + std::move(message)});
  };
  if (name == "sharpness" || name == "l2-suite") {
    need(c.k >= 1 && c.k + 1 <= c.n, "k", "sharpness families need 1 <= k and k + 1 <= n");
    need(c.alpha <= c.k, "alpha", "plane subsets need alpha <= k");
  }
  if (name == "furstenberg") {
    need(c.n == 2 && c.k == 1, "n", "Furstenberg sets are lines in the plane (n = 2, k = 1)");
    need(c.alpha <= 1.0, "alpha", "subsets of lines need alpha <= 1");
  }
  if (name == "skeleton") need(c.k >= 1 && c.k < c.n, "k", "skeletons need 1 <= k < n");
  if (name == "distance-r") need(c.n - c.k >= 1 && c.n - c.k <= 3, "k", "normal dimension n - k must be 1, 2 or 3");
  if (name == "counterexample") need(c.k >= 1 && c.n > c.k + 1, "n", "counterexample needs n > k + 1 and k >= 1");
  if (name == "l2-suite") {
    need(std::ldexp(1.0, -c.delta_level_min) <= c.delta0, "delta_level_min",
         "delta levels must not exceed delta0");
    need(c.grid_res == 0.0, "grid_res", "the L2 chain uses grid_res = delta / 4 at each level");
    const double gs = std::ldexp(1.0, -c.subset_depth);
    need(std::ldexp(1.0, -c.delta_level_max) >= gs, "delta_level_max",
         "neighborhood_volume needs delta >= the subset resolution 2^-subset_depth");
  }
  return v;
}

ExperimentResult run_experiment(const std::string& name, const RunConfig& config) {
  const auto v = experiment_violations(name, config);
  if (!v.empty()) {
    std::string msg = "invalid config:";
    for (const auto& x : v) msg += "\n  " + x.key + ": " + x.message;
    throw std::invalid_argument(msg);
  }
  ExperimentResult out = registry().at(name)(config);
  out.name = name;
  return out;
}

PointCloud build_cloud(const std::string& kind, const RunConfig& c) {
  if (kind == "sharpness") return union_cloud(sharpness_family(c.s, c.k, c.n, c.depth), c.alpha, c.subset_depth);
  if (kind == "furstenberg") return furstenberg_cloud(c.alpha, c.s, c.depth).cloud;
  if (kind == "skeleton") return skeleton_union_cloud(c.k, c.n, grid_centres(c.n, c.centres), c.seed, c.depth);
  if (kind == "counterexample") return scaled_axis_parallel_counterexample(c.n, c.k, c.depth, c.grid_level);
  if (kind == "distance-r") {
    DistanceFamilySpec spec;
    spec.n = c.n;
    spec.r = c.r;
    spec.depth = c.depth;
    if (c.k == 0) {
      spec.centre.assign(static_cast<std::size_t>(c.n), 0.0);
    } else {
      // Fixed tilted base plane so the set is not axis aligned.
      const Ambient a{c.n, c.k};
      std::vector<double> code(static_cast<std::size_t>(a.code_size()), 0.0);
      for (std::size_t i = a.codim(); i < code.size(); ++i) code[i] = i % 2 == 0 ? 0.3 : 0.2;
      spec.plane = AffinePlane(a, std::move(code));
    }
    return distance_r_set(spec);
  }
  throw std::invalid_argument("unknown construction '" + kind + "'");
}

std::string cloud_csv(const PointCloud& cloud) {
  Series s;
  for (int d = 0; d < cloud.n; ++d) s.header.push_back("x" + std::to_string(d));
  s.rows.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    s.rows.emplace_back(p.begin(), p.end());
  }
  return series_csv(s);
}

PointCloud parse_cloud_csv(std::string_view text, double gen_scale) {
  PointCloud out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<double> row;
    bool numeric = true;
    while (true) {
      const auto comma = line.find(',');
      const std::string_view field = line.substr(0, comma);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        numeric = false;
        break;
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (!numeric) {
      if (line_no == 1) continue;
      throw std::invalid_argument("cloud csv line " + std::to_string(line_no) + ": not numeric");
    }
    if (out.n == 0) out.n = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != out.n) {
      throw std::invalid_argument("cloud csv line " + std::to_string(line_no) + ": wrong column count");
    }
    out.push(row);
  }
  if (out.size() == 0) throw std::invalid_argument("cloud csv holds no points");
  out.gen_scale = gen_scale > 0.0 ? gen_scale : median_nearest_spacing(out);
  if (!(out.gen_scale > 0.0)) throw std::invalid_argument("cannot infer gen_scale; pass it explicitly");
  validate_cloud(out);
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

Json report_json(const ExperimentResult& result, const RunConfig& config) {
  Json j;
  j["experiment"] = result.name;
  j["config_hash"] = config_hash(config);
  Json cfg;
  for (const auto& key : config_keys()) {
    if (key == "output_root") continue;
    const std::string text = config_value(config, key);
    cfg[key] = Json::parse(text);
  }
  j["config"] = cfg;
  j["results"] = result.results;
  Json as = Json::array();
  for (const auto& a : result.assertions) {
    Json x;
    x["criterion"] = a.criterion;
    x["passed"] = a.passed;
    x["value"] = a.value;
    x["relation"] = a.relation;
    x["bound"] = a.bound;
    if (a.relation == "within") x["tolerance"] = a.tolerance;
    if (!a.detail.empty()) x["detail"] = a.detail;
    as.push_back(x);
  }
  j["assertions"] = as;
  j["passed"] = result.passed();
  return j;
}

std::string report_text(const ExperimentResult& result, const RunConfig& config) {
  return report_json(result, config).dump(2) + "\n";
}

std::string series_csv(const Series& series) {
  std::string out;
  for (std::size_t i = 0; i < series.header.size(); ++i) {
    if (i > 0) out += ',';
    out += series.header[i];
  }
  out += '\n';
  for (const auto& row : series.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

void write_new_file(const std::filesystem::path& path, const std::string& content) {
  std::FILE* f = std::fopen(path.c_str(), "wbx");
  if (f == nullptr) throw std::runtime_error("cannot create " + path.string() + " (exists or unwritable)");
  const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size();
  if (std::fclose(f) != 0 || !ok) throw std::runtime_error("failed writing " + path.string());
}

std::filesystem::path write_run(const ExperimentResult& result, const RunConfig& config) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(config.output_root) / result.name;
  fs::create_directories(base);
  fs::path dir;
  for (int i = 1;; ++i) {
    if (i > 9999) throw std::runtime_error("no free run directory under " + base.string());
    char name[16];
    std::snprintf(name, sizeof name, "run-%04d", i);
    dir = base / name;
    // create_directory is atomic and reports false for an existing directory.
    if (fs::create_directory(dir)) break;
  }
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("report.json", report_text(result, config));
  files.emplace_back("config.txt", config_to_text(config));
  for (const auto& s : result.series) files.emplace_back(s.name + ".csv", series_csv(s));
  Json manifest;
  manifest["experiment"] = result.name;
  manifest["run"] = dir.filename().string();
  manifest["config_hash"] = config_hash(config);
  manifest["passed"] = result.passed();
  Json list = Json::array();
  for (const auto& [name, bytes] : files) {
    write_new_file(dir / name, bytes);
    Json f;
    f["file"] = name;
    f["bytes"] = bytes.size();
    f["fnv1a64"] = manifest_hash(bytes);
    list.push_back(f);
  }
  manifest["files"] = list;
  write_new_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

}  // namespace affdim
