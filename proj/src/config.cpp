#include "tikreg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>

namespace tikreg {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& raw, const std::string& key) {
  const std::string s = trim(raw);
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("config: key '" + key + "' has invalid value '" + raw + "'");
  }
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& key) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(parse_number<T>(item, key));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& s) { return parse_list<int>(s, "list"); }
std::vector<std::size_t> parse_size_list(const std::string& s) { return parse_list<std::size_t>(s, "list"); }

SweepConfig parse_sweep_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  static const std::set<std::string> sweep_keys{"preset",  "case",  "grid_sizes", "sample_sizes",
                                                "reps",    "seed",  "sigma",      "threads"};
  static const std::set<std::string> model_keys{"prior", "kernel_c", "laplacian_s", "forward", "blur_width"};

  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    const auto& allowed = section == "sweep" ? sweep_keys : section == "model" ? model_keys : std::set<std::string>{};
    if (allowed.empty()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }

  SweepConfig cfg;
  const pt::ptree empty;
  const pt::ptree& sweep = tree.get_child("sweep", empty);
  const pt::ptree& model = tree.get_child("model", empty);

  if (auto v = sweep.get_optional<std::string>("preset")) {
    const std::string p = trim(*v);
    if (p == "paper") {
      cfg = SweepConfig::paper_default();
    } else if (p == "quick") {
      cfg = SweepConfig::quick();
    } else {
      throw ConfigError("config: key 'preset' must be paper or quick, got '" + *v + "'");
    }
  }
  try {
    if (auto v = sweep.get_optional<std::string>("case")) cfg.noise_case = parse_case(trim(*v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: key 'case': ") + e.what());
  }
  if (auto v = sweep.get_optional<std::string>("grid_sizes")) cfg.grid_sizes = parse_list<int>(*v, "grid_sizes");
  if (auto v = sweep.get_optional<std::string>("sample_sizes")) {
    cfg.sample_sizes = parse_list<std::size_t>(*v, "sample_sizes");
  }
  if (auto v = sweep.get_optional<std::string>("reps")) cfg.reps = parse_number<int>(*v, "reps");
  if (auto v = sweep.get_optional<std::string>("seed")) cfg.master_seed = parse_number<std::uint64_t>(*v, "seed");
  if (auto v = sweep.get_optional<std::string>("sigma")) cfg.sigma = parse_number<double>(*v, "sigma");
  if (auto v = sweep.get_optional<std::string>("threads")) cfg.threads = parse_number<unsigned>(*v, "threads");

  if (auto v = model.get_optional<std::string>("prior")) {
    const std::string p = trim(*v);
    if (p == "paper") {
      cfg.prior.kind = PriorSpec::Kind::PaperConvolution;
    } else if (p == "laplacian") {
      cfg.prior.kind = PriorSpec::Kind::Laplacian;
    } else {
      throw ConfigError("config: key 'prior' must be paper or laplacian, got '" + *v + "'");
    }
  }
  if (auto v = model.get_optional<std::string>("kernel_c")) cfg.prior.kernel_c = parse_number<double>(*v, "kernel_c");
  if (auto v = model.get_optional<std::string>("laplacian_s")) {
    cfg.prior.laplacian_s = parse_number<double>(*v, "laplacian_s");
  }
  if (auto v = model.get_optional<std::string>("forward")) {
    const std::string f = trim(*v);
    if (f == "identity") {
      cfg.forward.kind = ForwardSpec::Kind::Identity;
    } else if (f == "blur") {
      cfg.forward.kind = ForwardSpec::Kind::Blur;
    } else {
      throw ConfigError("config: key 'forward' must be identity or blur, got '" + *v + "'");
    }
  }
  if (auto v = model.get_optional<std::string>("blur_width")) {
    cfg.forward.blur_width = parse_number<double>(*v, "blur_width");
  }

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_sweep_config(in);
}

std::string config_keys_help() {
  return "Config file keys (INI):\n"
         "  [sweep] preset=paper|quick, case=a|b|c, grid_sizes=N,N,..., sample_sizes=m,m,...,\n"
         "          reps=INT, seed=INT, sigma=FLOAT, threads=INT\n"
         "  [model] prior=paper|laplacian, kernel_c=FLOAT, laplacian_s=FLOAT,\n"
         "          forward=identity|blur, blur_width=FLOAT\n";
}

}  // namespace tikreg
