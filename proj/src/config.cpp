#include "affdim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "affdim/spatial.hpp"

namespace affdim {

namespace {

using Member = std::variant<int RunConfig::*, double RunConfig::*, std::uint64_t RunConfig::*,
                            std::string RunConfig::*>;

struct Field {
  const char* key;
  Member member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"n", &RunConfig::n},
      {"k", &RunConfig::k},
      {"alpha", &RunConfig::alpha},
      {"s", &RunConfig::s},
      {"gamma", &RunConfig::gamma},
      {"depth", &RunConfig::depth},
      {"subset_depth", &RunConfig::subset_depth},
      {"delta_level_min", &RunConfig::delta_level_min},
      {"delta_level_max", &RunConfig::delta_level_max},
      {"delta0", &RunConfig::delta0},
      {"samples", &RunConfig::samples},
      {"pairs", &RunConfig::pairs},
      {"seed", &RunConfig::seed},
      {"grid_res", &RunConfig::grid_res},
      {"epsilon", &RunConfig::epsilon},
      {"gengeo_cap", &RunConfig::gengeo_cap},
      {"shell_cap", &RunConfig::shell_cap},
      {"cs_tolerance", &RunConfig::cs_tolerance},
      {"ade_floor", &RunConfig::ade_floor},
      {"dim_tolerance", &RunConfig::dim_tolerance},
      {"octaves", &RunConfig::octaves},
      {"r", &RunConfig::r},
      {"centres", &RunConfig::centres},
      {"grid_level", &RunConfig::grid_level},
      {"output_root", &RunConfig::output_root},
  };
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument("config key '" + std::string(key) + "': cannot parse '" +
                                std::string(text) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, ptr);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const Field& f = field(key);
  value = trim(value);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(config.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          config.*member = std::string(value);
        } else if constexpr (std::is_same_v<T, double>) {
          const double v = parse_number<double>(key, value);
          if (!std::isfinite(v)) {
            throw std::invalid_argument("config key '" + std::string(key) + "' must be finite");
          }
          config.*member = v;
        } else {
          config.*member = parse_number<T>(key, value);
        }
      },
      f.member);
}

std::string config_value(const RunConfig& config, std::string_view key) {
  const Field& f = field(key);
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(config.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return config.*member;
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(config.*member);
        } else {
          return std::to_string(config.*member);
        }
      },
      f.member);
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + config_value(config, key) + "\n";
  return out;
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  RunConfig c = config;
  c.output_root.clear();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config_to_text(c))));
  return buf;
}

std::vector<ConfigViolation> validate_config(const RunConfig& c) {
  std::vector<ConfigViolation> v;
  auto need = [&](bool ok, const char* key, std::string message) {
    if (!ok) v.push_back({key, std::move(message)});
  };
  need(c.n >= 1 && c.n <= kMaxDim, "n", "ambient dimension must lie in [1, 8]");
  need(c.k >= 0 && c.k < c.n, "k", "plane dimension must satisfy 0 <= k < n");
  need(c.alpha > 0.0 && c.alpha <= std::max(c.k, 1), "alpha",
       "subset dimension must lie in (0, max(k, 1)]");
  need(c.s > 0.0 && c.s <= 1.0, "s", "family dimension must lie in (0, 1]; larger s leaves the min(dim E, 1) regime");
  need(c.gamma > 0.0, "gamma", "loss exponent must be positive");
  need(c.depth >= 1 && c.depth <= 20, "depth", "construction depth must lie in [1, 20]");
  need(c.subset_depth >= 1 && c.subset_depth <= 24, "subset_depth", "subset depth must lie in [1, 24]");
  need(c.delta_level_min >= 1 && c.delta_level_min <= c.delta_level_max && c.delta_level_max <= 30,
       "delta_level_min", "delta levels need 1 <= delta_level_min <= delta_level_max <= 30");
  need(c.delta0 > 0.0 && c.delta0 <= 0.25, "delta0", "inner window margin must lie in (0, 1/4]");
  need(c.samples >= 1, "samples", "Monte Carlo sample count must be positive");
  need(c.pairs >= 1, "pairs", "pair count must be positive");
  need(c.grid_res >= 0.0, "grid_res", "lattice side must be nonnegative (0 selects delta / 4)");
  if (c.grid_res > 0.0 && c.delta_level_max <= 30) {
    const double delta_min = std::ldexp(1.0, -c.delta_level_max);
    need(delta_min >= 4.0 * c.grid_res, "grid_res",
         "neighborhood_volume needs grid_res <= delta / 4 at the smallest delta");
  }
  need(c.epsilon > 0.0 && c.epsilon < 1.6449, "epsilon", "content floor must lie in (0, pi^2/6)");
  need(c.gengeo_cap > 0.0, "gengeo_cap", "gengeo constant must be positive");
  need(c.shell_cap > 0.0, "shell_cap", "shell constant must be positive");
  need(c.cs_tolerance >= 0.0, "cs_tolerance", "Cauchy-Schwarz tolerance must be nonnegative");
  need(c.ade_floor >= 0.0, "ade_floor", "ade floor must be nonnegative");
  need(c.dim_tolerance > 0.0, "dim_tolerance", "dimension tolerance must be positive");
  need(c.octaves >= 2 && c.octaves <= 12, "octaves", "fit window needs octaves in [2, 12] (three scales at least)");
  need(c.r > 0.0, "r", "distance must be positive");
  need(c.centres >= 1 && c.centres <= 256, "centres", "skeleton centres per axis must lie in [1, 256]");
  need(c.grid_level >= 1 && c.grid_level <= 16, "grid_level", "grid level must lie in [1, 16]");
  need(!c.output_root.empty(), "output_root", "output root must be nonempty");
  return v;
}

std::vector<double> config_deltas(const RunConfig& config) {
  std::vector<double> out;
  for (int j = config.delta_level_min; j <= config.delta_level_max; ++j) out.push_back(std::ldexp(1.0, -j));
  return out;
}

double grid_for(const RunConfig& config, double delta) {
  return config.grid_res > 0.0 ? config.grid_res : delta / 4.0;
}

}  // namespace affdim
