#include "hsurvey/cli_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hsurvey/error.hpp"

namespace hsurvey::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum class OptionKind { Value, Flag };

struct OptionSpec {
  const char* key;
  OptionKind kind;
  const char* help;
};

constexpr OptionSpec kOptions[] = {
    {"sigma-p", OptionKind::Value, "population standard deviation"},
    {"sigma-a", OptionKind::Value, "primary annotator error SD (default 0)"},
    {"sigma-b", OptionKind::Value, "auxiliary annotator error SD"},
    {"mu-p", OptionKind::Value, "population mean (binary designs, synthetic pools)"},
    {"d", OptionKind::Value, "target half-width of the confidence interval"},
    {"delta", OptionKind::Value, "confidence parameter (default 0.05)"},
    {"cost-collect", OptionKind::Value, "collection cost per sample"},
    {"cost-primary", OptionKind::Value, "primary annotation cost per sample"},
    {"cost-aux", OptionKind::Value, "auxiliary annotation cost per sample (default 0)"},
    {"budget", OptionKind::Value, "budget, or comma-separated increasing budgets for simulate"},
    {"replicates", OptionKind::Value, "Monte Carlo replicates"},
    {"seed", OptionKind::Value, "random seed"},
    {"threads", OptionKind::Value, "worker threads (results do not depend on it)"},
    {"design", OptionKind::Value, "design name, or comma-separated list for simulate"},
    {"input", OptionKind::Value, "input CSV"},
    {"outdir", OptionKind::Value, "output directory"},
    {"alpha", OptionKind::Value, "auxiliary sensitivity"},
    {"beta", OptionKind::Value, "auxiliary specificity"},
    {"protocol", OptionKind::Value, "simulate protocol: pool or bernoulli"},
    {"pool-size", OptionKind::Value, "synthetic pool size (default 40)"},
    {"aux-bias", OptionKind::Value, "synthetic auxiliary bias"},
    {"correlation", OptionKind::Value, "synthetic corr(aux error, value)"},
    {"clamp", OptionKind::Flag, "clamp reported estimates to [0, 1]"},
    {"binary", OptionKind::Flag, "acknowledge binary values and a transferable confusion matrix"},
    {"strict-precision", OptionKind::Flag, "add primary samples until the target is met exactly"},
};

const OptionSpec* find_option(const std::string& key) {
  for (const auto& opt : kOptions) {
    if (key == opt.key) return &opt;
  }
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    fail("--" + key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    fail("--" + key + ": expected a nonnegative integer, got '" + text + "'");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    fail("--" + key + ": integer out of range '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  fail(key + ": expected true/false, got '" + text + "'");
}

double nonnegative(const std::string& key, double v) {
  if (v < 0.0) {
    std::ostringstream msg;
    msg << "--" << key << " must be nonnegative (got " << v << ")";
    fail(msg.str());
  }
  return v;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (!find_option(key)) {
      fail(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    out[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

std::vector<double> parse_budgets(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    const double b = parse_number("budget", part);
    if (!(b > 0.0)) fail("--budget: budgets must be strictly positive");
    if (!out.empty() && !(b > out.back())) fail("--budget: budgets must be strictly increasing");
    out.push_back(b);
  }
  return out;
}

Command parse_command(const std::string& name) {
  if (name == "plan") return Command::Plan;
  if (name == "estimate") return Command::Estimate;
  if (name == "simulate") return Command::Simulate;
  fail("unknown command '" + name + "'");
}

void require(const std::map<std::string, std::string>& raw, std::initializer_list<const char*> keys,
             const char* command) {
  for (const char* key : keys) {
    if (!raw.count(key)) fail(std::string(command) + " requires --" + key);
  }
}

}  // namespace

bool RunConfig::has(const std::string& key) const {
  return std::find(given.begin(), given.end(), key) != given.end();
}

PlanningInputs RunConfig::planning_inputs() const {
  auto inputs = PlanningInputs::make(sigma_p, sigma_a, sigma_b, costs, PrecisionTarget(d, delta));
  inputs.population.mu_p = mu_p;
  inputs.validate();
  return inputs;
}

RunConfig parse_config(const std::vector<std::string>& args, const std::optional<std::string>& env_outdir) {
  CLI::App app{"Cost-optimal sample sizes and estimators for two-annotator surveys", "hsurvey"};
  app.require_subcommand(1);

  std::string config_path;
  struct Bound {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> options;
  };
  std::unordered_map<std::string, Bound> bound;
  std::map<std::string, CLI::App*> subs;
  for (const char* name : {"plan", "estimate", "simulate"}) {
    auto* sub = app.add_subcommand(name);
    subs[name] = sub;
    auto& b = bound[name];
    for (const auto& opt : kOptions) {
      const std::string flag = std::string("--") + opt.key;
      if (opt.kind == OptionKind::Value) {
        b.options[opt.key] = sub->add_option(flag, b.values[opt.key], opt.help);
      } else {
        b.options[opt.key] = sub->add_flag(flag, b.flags[opt.key], opt.help);
      }
    }
    sub->add_option("--config", config_path, "flat key = value config file");
  }
  subs["plan"]->description("size Conventional and Hybrid-Offset designs");
  subs["estimate"]->description("estimate a population mean from an annotated CSV");
  subs["simulate"]->description("Monte Carlo evaluation of the designs");

  RunConfig cfg;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    cfg.help = app.help("", CLI::AppFormatMode::All);
    return cfg;
  } catch (const CLI::ParseError& e) {
    fail(std::string("usage: ") + e.what());
  }

  std::string command_name;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command_name = name;
  }
  cfg.command = parse_command(command_name);
  const Bound& b = bound.at(command_name);

  // Flags first; config values fill the gaps.
  std::map<std::string, std::string> raw;
  for (const auto& opt : kOptions) {
    if (b.options.at(opt.key)->count() == 0) continue;
    raw[opt.key] = opt.kind == OptionKind::Value ? b.values.at(opt.key) : "true";
  }
  if (!config_path.empty()) {
    for (const auto& [key, value] : read_config_file(config_path)) {
      if (raw.count(key)) {
        cfg.warnings.push_back("--" + key + " given on the command line overrides the config file value");
        continue;
      }
      raw[key] = value;
    }
  }
  for (const auto& [key, value] : raw) cfg.given.push_back(key);

  auto get = [&](const char* key) -> const std::string* {
    auto it = raw.find(key);
    return it == raw.end() ? nullptr : &it->second;
  };
  auto number = [&](const char* key, double fallback) {
    const auto* v = get(key);
    return v ? parse_number(key, *v) : fallback;
  };

  cfg.sigma_p = nonnegative("sigma-p", number("sigma-p", 0.0));
  cfg.sigma_a = nonnegative("sigma-a", number("sigma-a", 0.0));
  cfg.sigma_b = nonnegative("sigma-b", number("sigma-b", 0.0));
  if (const auto* v = get("mu-p")) {
    const double mu = parse_number("mu-p", *v);
    if (!(mu >= 0.0 && mu <= 1.0)) fail("--mu-p must lie in [0, 1]");
    cfg.mu_p = mu;
  }
  cfg.d = number("d", 0.0);
  cfg.delta = number("delta", 0.05);
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) fail("--delta must lie in (0, 1)");
  cfg.costs.c_c = nonnegative("cost-collect", number("cost-collect", 0.0));
  cfg.costs.c_a = nonnegative("cost-primary", number("cost-primary", 0.0));
  cfg.costs.c_b = nonnegative("cost-aux", number("cost-aux", 0.0));

  const auto* alpha = get("alpha");
  const auto* beta = get("beta");
  if ((alpha == nullptr) != (beta == nullptr)) fail("--alpha and --beta must be given together");
  if (alpha) {
    ConfusionMatrix cm{parse_number("alpha", *alpha), parse_number("beta", *beta)};
    cm.validate();
    cfg.confusion = cm;
  }

  if (const auto* v = get("budget")) cfg.budgets = parse_budgets(*v);
  if (const auto* v = get("replicates")) {
    cfg.replicates = parse_count("replicates", *v);
    if (cfg.replicates < 1) fail("--replicates must be positive");
  }
  if (const auto* v = get("seed")) cfg.seed = parse_count("seed", *v);
  if (const auto* v = get("threads")) {
    cfg.threads = parse_count("threads", *v);
    if (cfg.threads < 1) fail("--threads must be positive");
  }
  if (const auto* v = get("design")) {
    for (const auto& name : split(*v, ',')) cfg.designs.push_back(parse_design(name));
  }
  if (const auto* v = get("protocol")) {
    if (*v == "pool") {
      cfg.protocol = Protocol::Pool;
    } else if (*v == "bernoulli") {
      cfg.protocol = Protocol::Bernoulli;
    } else {
      fail("--protocol must be 'pool' or 'bernoulli'");
    }
  }
  if (const auto* v = get("pool-size")) {
    cfg.pool_size = parse_count("pool-size", *v);
    if (cfg.pool_size < 1) fail("--pool-size must be positive");
  }
  cfg.aux_bias = number("aux-bias", 0.0);
  cfg.correlation = number("correlation", 0.0);
  if (!(cfg.correlation >= -1.0 && cfg.correlation <= 1.0)) fail("--correlation must lie in [-1, 1]");

  if (const auto* v = get("input")) {
    cfg.input = fs::path(*v);
    if (!fs::exists(*cfg.input)) fail("--input: file not found: " + *v);
  }
  if (const auto* v = get("outdir")) {
    cfg.outdir = *v;
  } else if (env_outdir && !env_outdir->empty()) {
    cfg.outdir = *env_outdir;
  }
  if (const auto* v = get("clamp")) cfg.clamp = parse_bool("clamp", *v);
  if (const auto* v = get("binary")) cfg.binary = parse_bool("binary", *v);
  if (const auto* v = get("strict-precision")) cfg.strict_precision = parse_bool("strict-precision", *v);

  switch (cfg.command) {
    case Command::Plan:
      require(raw, {"sigma-p", "sigma-b", "d", "cost-collect", "cost-primary"}, "plan");
      if (!(cfg.d > 0.0)) fail("--d must be positive");
      if (cfg.budgets.size() > 1) fail("plan takes a single --budget");
      cfg.costs.validate();
      break;
    case Command::Estimate:
      require(raw, {"input", "design"}, "estimate");
      if (cfg.designs.size() != 1) fail("estimate takes a single --design");
      break;
    case Command::Simulate:
      if (cfg.protocol == Protocol::Pool) {
        require(raw, {"budget", "cost-collect", "cost-primary"}, "simulate");
        cfg.costs.validate();
        if (!cfg.input) require(raw, {"mu-p", "sigma-p", "sigma-b"}, "simulate without --input");
      }
      break;
  }
  if (cfg.confusion && !cfg.binary) {
    fail("--alpha/--beta describe a binary classifier; pass --binary to acknowledge the assumption");
  }
  return cfg;
}

// CSV ingestion ---------------------------------------------------------

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::vector<CsvRow> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (!seen_header) {
      if (fields != header) {
        std::string expected;
        for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
        fail(path.string() + ": expected header '" + expected + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      fail(path.string() + ": row " + std::to_string(line_no) + ": expected " +
           std::to_string(header.size()) + " fields");
    }
    rows.push_back({line_no, std::move(fields)});
  }
  if (!seen_header) fail(path.string() + ": empty file");
  if (rows.empty()) fail(path.string() + ": no data rows");
  return rows;
}

double parse_unit_value(const fs::path& path, const CsvRow& row, const std::string& text, const char* column) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !(v >= 0.0 && v <= 1.0)) {
    fail(path.string() + ": row " + std::to_string(row.line) + ": " + column + " '" + text +
         "' is not a number in [0, 1]");
  }
  return v;
}

int parse_label(const fs::path& path, const CsvRow& row, const std::string& text, const char* column) {
  if (text == "0") return 0;
  if (text == "1") return 1;
  fail(path.string() + ": row " + std::to_string(row.line) + ": " + column + " '" + text + "' is not binary");
}

struct Record {
  std::string id;
  std::size_t row = 0;
  double aux = 0.0;
  std::optional<double> primary;
};

IngestedSamples assemble(std::vector<Record> records) {
  // Paired records move to the prefix; relative order is kept.
  std::stable_partition(records.begin(), records.end(), [](const Record& r) { return r.primary.has_value(); });
  IngestedSamples out;
  std::vector<double> aux;
  std::vector<double> primary;
  for (const auto& r : records) {
    aux.push_back(r.aux);
    if (r.primary) primary.push_back(*r.primary);
    out.ids.push_back(r.id);
    out.original_row.push_back(r.row);
  }
  out.samples = PairedSampleSet(std::move(aux), std::move(primary));
  return out;
}

}  // namespace

IngestedSamples ingest_paired_csv(const fs::path& path) {
  const auto rows = read_csv(path, {"sample_id", "aux_value", "primary_value"});
  std::set<std::string> seen;
  std::vector<Record> records;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto& id = row.fields[0];
    if (id.empty()) fail(path.string() + ": row " + std::to_string(row.line) + ": empty sample_id");
    if (!seen.insert(id).second) {
      fail(path.string() + ": row " + std::to_string(row.line) + ": duplicate sample_id '" + id + "'");
    }
    Record r{id, i, parse_unit_value(path, row, row.fields[1], "aux_value"), std::nullopt};
    if (!row.fields[2].empty()) r.primary = parse_unit_value(path, row, row.fields[2], "primary_value");
    records.push_back(std::move(r));
  }
  return assemble(std::move(records));
}

IngestedSamples ingest_point_csv(const fs::path& path) {
  const auto rows = read_csv(path, {"sample_id", "point_id", "aux_label", "primary_label"});
  struct Group {
    std::size_t first_row = 0;
    std::size_t first_line = 0;
    std::vector<int> aux;
    std::vector<int> primary;
    std::size_t missing_primary = 0;
    std::set<std::string> points;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  std::vector<LabelPair> pairs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto& id = row.fields[0];
    if (id.empty()) fail(path.string() + ": row " + std::to_string(row.line) + ": empty sample_id");
    auto [it, inserted] = groups.try_emplace(id);
    Group& g = it->second;
    if (inserted) {
      order.push_back(id);
      g.first_row = i;
      g.first_line = row.line;
    }
    if (!g.points.insert(row.fields[1]).second) {
      fail(path.string() + ": row " + std::to_string(row.line) + ": duplicate point_id '" + row.fields[1] +
           "' in sample '" + id + "'");
    }
    const int aux = parse_label(path, row, row.fields[2], "aux_label");
    g.aux.push_back(aux);
    if (row.fields[3].empty()) {
      ++g.missing_primary;
    } else {
      const int primary = parse_label(path, row, row.fields[3], "primary_label");
      g.primary.push_back(primary);
      pairs.push_back({primary, aux});
    }
  }
  std::vector<Record> records;
  for (const auto& id : order) {
    const Group& g = groups.at(id);
    if (g.missing_primary != 0 && !g.primary.empty()) {
      fail(path.string() + ": sample '" + id + "' (first at row " + std::to_string(g.first_line) +
           ") has primary labels for only some of its points");
    }
    Record r{id, g.first_row, aggregate_points(g.aux), std::nullopt};
    if (!g.primary.empty()) r.primary = aggregate_points(g.primary);
    records.push_back(std::move(r));
  }
  auto out = assemble(std::move(records));
  out.point_pairs = std::move(pairs);
  return out;
}

IngestedSamples ingest_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  while (std::getline(in, line) && trim(line).empty()) {
  }
  const auto fields = split(line, ',');
  if (!fields.empty() && fields.size() == 4 && fields[1] == "point_id") return ingest_point_csv(path);
  return ingest_paired_csv(path);
}

void write_paired_csv(const fs::path& path, const IngestedSamples& data) {
  const std::size_t n = data.samples.n_b();
  std::vector<std::size_t> by_row(n);
  for (std::size_t i = 0; i < n; ++i) by_row[i] = i;
  std::sort(by_row.begin(), by_row.end(),
            [&](std::size_t x, std::size_t y) { return data.original_row[x] < data.original_row[y]; });
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "sample_id,aux_value,primary_value\n";
  char buf[64];
  const auto aux = data.samples.aux_values();
  const auto primary = data.samples.primary_values();
  for (std::size_t i : by_row) {
    std::snprintf(buf, sizeof buf, "%.17g", aux[i]);
    out << data.ids[i] << ',' << buf << ',';
    if (i < primary.size()) {
      std::snprintf(buf, sizeof buf, "%.17g", primary[i]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

// Emission ----------------------------------------------------------------

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

namespace {

double rounded(double v) { return std::stod(format_number(v)); }

json plan_json(const SamplingPlan& plan, const PlanningInputs& inputs) {
  return {
      {"design", std::string(to_string(plan.design))},
      {"n_a", plan.n_a},
      {"n_b", plan.n_b},
      {"predicted_variance", rounded(plan.predicted_variance)},
      {"half_width", rounded(inputs.target.half_width(plan.predicted_variance))},
      {"tsc", rounded(plan.tsc)},
  };
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

}  // namespace

void emit_plan_json(const fs::path& path, const PlanningInputs& inputs, const std::vector<SamplingPlan>& plans,
                    const std::optional<ConfusionMatrix>& confusion, const std::vector<std::string>& warnings) {
  if (plans.empty()) fail("no plans to emit");
  json doc = plan_json(plans.front(), inputs);
  json diag = {
      {"k", rounded(inputs.k())},
      {"k_prime", rounded(inputs.k_prime())},
      {"zeta", rounded(inputs.target.zeta())},
      {"variance_budget", rounded(inputs.target.variance_budget())},
      {"n_a_star_raw", rounded(conventional_sample_size_raw(inputs))},
  };
  diag["sigma_delta"] = inputs.sb2() < inputs.sp2() ? json(rounded(tsc_threshold(inputs))) : json(nullptr);
  if (confusion) {
    diag["sigma_s_squared"] = rounded(planning_sigma_s_squared(inputs, *confusion));
    diag["auxiliary_threshold"] = rounded(auxiliary_tsc_threshold(inputs, *confusion));
  }
  doc["diagnostics"] = diag;
  json all = json::array();
  for (const auto& p : plans) all.push_back(plan_json(p, inputs));
  doc["plans"] = all;
  doc["warnings"] = warnings;

  auto out = open_output(path);
  out << doc.dump(2) << '\n';
  finish(out, path);
}

void emit_tradeoff_csv(const fs::path& path, const PlanningInputs& inputs, double max_factor) {
  const double n_star = conventional_sample_size_raw(inputs);
  auto out = open_output(path);
  out << "n_b,n_a\n";
  if (n_star > 0.0) {
    out << format_number(n_star) << ',' << format_number(tradeoff_n_a(n_star, inputs)) << '\n';
    const auto first = static_cast<std::size_t>(std::floor(n_star)) + 1;
    const auto last = static_cast<std::size_t>(std::ceil(max_factor * n_star));
    for (std::size_t n_b = first; n_b <= last; ++n_b) {
      out << n_b << ',' << format_number(tradeoff_n_a(static_cast<double>(n_b), inputs)) << '\n';
    }
  }
  finish(out, path);
}

void emit_tsc_diff_csv(const fs::path& path, const PlanningInputs& inputs) {
  auto out = open_output(path);
  out << "k,sigma_delta,tsc_conventional,tsc_hybrid_offset,difference\n";
  const bool hybrid_possible = inputs.sb2() < inputs.sp2();
  const std::string sigma_delta = hybrid_possible ? format_number(tsc_threshold(inputs)) : "";
  constexpr int kPoints = 121;
  for (int i = 0; i < kPoints; ++i) {
    const double k = std::pow(10.0, -2.0 + 4.0 * i / (kPoints - 1));  // 0.01 .. 100
    PlanningInputs at = inputs;
    at.costs.c_b = 0.0;
    at.costs.c_a = k * at.costs.c_c;
    at.primary.cost_per_sample = at.costs.c_a;
    at.auxiliary.cost_per_sample = 0.0;
    const auto conv = conventional_plan(at);
    const auto hybrid = hybrid_possible ? optimal_offset_plan(at) : conv;
    out << format_number(k) << ',' << sigma_delta << ',' << format_number(conv.tsc) << ','
        << format_number(hybrid.tsc) << ',' << format_number(conv.tsc - hybrid.tsc) << '\n';
  }
  finish(out, path);
}

void emit_simulation_csv(const fs::path& path, const SimulationReport& report) {
  auto out = open_output(path);
  out << "design,budget,n_a,n_b,feasible,bias,mae,mse,se,replicates,dropped\n";
  for (const auto& c : report.cells) {
    out << to_string(c.design) << ',' << format_number(c.budget) << ',' << c.n_a << ',' << c.n_b << ','
        << (c.feasible ? 1 : 0) << ',';
    if (c.feasible) {
      out << format_number(c.metrics.bias) << ',' << format_number(c.metrics.mae) << ','
          << format_number(c.metrics.mse) << ',' << format_number(c.metrics.se);
    } else {
      out << ",,,";
    }
    out << ',' << c.replicates << ',' << c.dropped << '\n';
  }
  finish(out, path);
}

void emit_bernoulli_csv(const fs::path& path, const BernoulliComparisonReport& report) {
  auto out = open_output(path);
  out << "alpha,beta,mu_p,n_a,n_b,sd_offset,sd_bias_corrected,sd_difference,"
         "bias_offset,bias_bias_corrected,replicates,dropped\n";
  for (const auto& c : report.cells) {
    out << format_number(c.alpha) << ',' << format_number(c.beta) << ',' << format_number(c.mu_p) << ','
        << c.n_a << ',' << c.n_b << ',' << format_number(c.offset.sd) << ','
        << format_number(c.bias_corrected.sd) << ',' << format_number(c.sd_difference()) << ','
        << format_number(c.offset.bias) << ',' << format_number(c.bias_corrected.bias) << ','
        << c.replicates << ',' << c.dropped << '\n';
  }
  finish(out, path);
}

// Command dispatch ----------------------------------------------------------

namespace {

int run_plan(const RunConfig& cfg, std::ostream& out) {
  const auto inputs = cfg.planning_inputs();
  auto warnings = cfg.warnings;
  for (auto& w : inputs.warnings()) warnings.push_back(std::move(w));

  std::vector<SamplingPlan> plans;
  if (!cfg.budgets.empty()) {
    const double budget = cfg.budgets.front();
    plans.push_back(plan_from_budget(budget, inputs));
    const auto n_conv = static_cast<std::size_t>(std::floor(budget / (cfg.costs.c_a + cfg.costs.c_c)));
    if (n_conv >= 1) {
      SamplingPlan conv{Design::Conventional, n_conv, 0, conventional_variance(n_conv, inputs), 0.0};
      conv.tsc = tsc(conv, inputs.costs);
      plans.push_back(conv);
    }
    std::stable_sort(plans.begin(), plans.end(), [](const SamplingPlan& a, const SamplingPlan& b) {
      return a.predicted_variance < b.predicted_variance;
    });
  } else {
    std::vector<SamplingPlan> extra;
    if (cfg.confusion) extra.push_back(auxiliary_plan(inputs, *cfg.confusion, BinaryAssumption::Acknowledged));
    plans = compare_designs(inputs, extra, RoundingPolicy{cfg.strict_precision});
  }

  emit_plan_json(cfg.outdir / "plan.json", inputs, plans, cfg.confusion, warnings);
  emit_tradeoff_csv(cfg.outdir / "tradeoff.csv", inputs);
  emit_tsc_diff_csv(cfg.outdir / "tsc_diff.csv", inputs);

  for (const auto& p : plans) {
    out << to_string(p.design) << ": n_a=" << p.n_a << " n_b=" << p.n_b
        << " variance=" << format_number(p.predicted_variance) << " tsc=" << format_number(p.tsc) << '\n';
  }
  return kExitOk;
}

int run_estimate(const RunConfig& cfg, std::ostream& out) {
  const auto data = ingest_csv(*cfg.input);
  const auto& s = data.samples;
  const Design design = cfg.designs.front();
  double estimate = 0.0;
  std::optional<ConfusionMatrix> used_cm;
  switch (design) {
    case Design::Conventional:
      estimate = conventional_mean(s.primary_values());
      break;
    case Design::HybridOffset:
      estimate = offset_mean(s);
      break;
    case Design::HybridRatio:
      estimate = ratio_mean(s);
      break;
    case Design::Auxiliary:
      estimate = auxiliary_mean(s.aux_values());
      break;
    case Design::AuxiliaryBiasCorrected:
      if (!cfg.binary || !cfg.confusion) fail("aux-bc needs --binary, --alpha and --beta");
      used_cm = *cfg.confusion;
      estimate = bias_corrected_mean(s.aux_values(), *used_cm);
      break;
    case Design::HybridBiasCorrected: {
      if (!cfg.binary) fail("hybrid-bc needs --binary");
      if (cfg.confusion) {
        used_cm = *cfg.confusion;
      } else if (!data.point_pairs.empty()) {
        used_cm = estimate_confusion(data.point_pairs);
      } else {
        const auto pairs = paired_labels(s);
        used_cm = estimate_confusion(pairs);
      }
      estimate = hybrid_bias_corrected_mean(s, *used_cm, BinaryAssumption::Acknowledged);
      break;
    }
  }
  const double raw = estimate;
  if (cfg.clamp) estimate = std::clamp(estimate, 0.0, 1.0);

  json doc = {{"design", std::string(to_string(design))},
              {"estimate", rounded(estimate)},
              {"unclamped_estimate", rounded(raw)},
              {"clamped", cfg.clamp},
              {"n_a", s.n_a()},
              {"n_b", s.n_b()}};
  if (used_cm) doc["confusion"] = {{"alpha", rounded(used_cm->alpha)}, {"beta", rounded(used_cm->beta)}};
  const auto path = cfg.outdir / "estimate.json";
  auto file = open_output(path);
  file << doc.dump(2) << '\n';
  finish(file, path);

  out << to_string(design) << " estimate: " << format_number(estimate) << " (n_a=" << s.n_a()
      << ", n_b=" << s.n_b() << ")\n";
  return kExitOk;
}

int run_simulate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.protocol == Protocol::Bernoulli) {
    BernoulliComparisonConfig bc;
    bc.seed = cfg.seed;
    bc.threads = cfg.threads;
    if (cfg.replicates) bc.replicates = cfg.replicates;
    const auto report = run_bernoulli_comparison(bc);
    emit_bernoulli_csv(cfg.outdir / "sd_difference.csv", report);
    std::size_t negative = 0;
    for (const auto& c : report.cells) negative += c.sd_difference() <= 0.0 ? 1 : 0;
    out << "cells with SD(offset) <= SD(bias-corrected): " << negative << " / " << report.cells.size() << '\n';
    return kExitOk;
  }

  PairedSampleSet pool;
  if (cfg.input) {
    pool = ingest_csv(*cfg.input).samples;
  } else {
    PopulationModel population{cfg.mu_p, cfg.sigma_p};
    SyntheticAnnotatorSpec primary;
    primary.kind = AdditiveNoise{0.0, cfg.sigma_a};
    SyntheticAnnotatorSpec aux;
    aux.kind = AdditiveNoise{cfg.aux_bias, cfg.sigma_b};
    aux.correlation = cfg.correlation;
    pool = make_synthetic_pool(population, PopulationShape::BetaShaped, cfg.pool_size, primary, aux,
                               stream_seed(cfg.seed, {0x706F6F6C}));
  }

  PoolBootstrapConfig pc;
  if (!cfg.designs.empty()) pc.designs = cfg.designs;
  pc.budgets = cfg.budgets;
  pc.costs = cfg.costs;
  if (cfg.replicates) pc.replicates = cfg.replicates;
  pc.seed = cfg.seed;
  pc.threads = cfg.threads;
  pc.confusion = cfg.confusion;
  if (cfg.has("sigma-p") && cfg.has("sigma-b")) pc.planning = PlanningSigmas{cfg.sigma_p, cfg.sigma_a, cfg.sigma_b};

  const auto report = run_pool_bootstrap(pool, pc);
  emit_simulation_csv(cfg.outdir / "simulation.csv", report);
  std::size_t infeasible = 0;
  for (const auto& c : report.cells) infeasible += c.feasible ? 0 : 1;
  out << "simulated " << report.cells.size() << " cells (" << infeasible << " infeasible), "
      << pc.replicates << " replicates each\n";
  return kExitOk;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  for (const auto& w : cfg.warnings) err << "warning: " << w << '\n';
  std::error_code ec;
  fs::create_directories(cfg.outdir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + cfg.outdir.string());
  switch (cfg.command) {
    case Command::Plan: return run_plan(cfg, out);
    case Command::Estimate: return run_estimate(cfg, out);
    case Command::Simulate: return run_simulate(cfg, out);
  }
  return kExitUsage;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const char* env = std::getenv(kOutdirEnv);
    const auto cfg = parse_config(args, env ? std::optional<std::string>(env) : std::nullopt);
    if (cfg.help) {
      out << *cfg.help;
      return kExitOk;
    }
    return run(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Infeasible ? kExitInfeasible : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace hsurvey::cli
