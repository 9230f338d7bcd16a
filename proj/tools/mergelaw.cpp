// mergelaw: merge checkpoints, fit and evaluate expert-count laws, plan
// budgets, simulate the quadratic model and analyse merge trajectories.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mergelaw/checkpoint.hpp"
#include "mergelaw/error.hpp"
#include "mergelaw/fitting.hpp"
#include "mergelaw/ingest.hpp"
#include "mergelaw/merge.hpp"
#include "mergelaw/planner.hpp"
#include "mergelaw/report.hpp"
#include "mergelaw/scaling_law.hpp"
#include "mergelaw/theory_sim.hpp"
#include "mergelaw/trajectory.hpp"

namespace {

using namespace mergelaw;
using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  std::string format;  // empty: subcommand default
};

struct TableSource {
  std::string input;
  std::string config;
  std::optional<double> size;
  std::optional<std::string> method;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--input", input, "long-format CSV (model, domain, ce_loss[, N, method])")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--config", config, "JSON column mapping / defaults")->check(CLI::ExistingFile);
    cmd->add_option("--default-size", size, "N in billions when the file has no size column");
    cmd->add_option("--default-method", method, "method label when the file has no method column");
  }

  IngestResult load() const {
    IngestConfig cfg;
    if (!config.empty()) cfg = IngestConfig::from_json(read_json(config));
    if (size) cfg.size = size;
    if (method) cfg.method = method;
    auto result = ingest(input, cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return result;
  }

  static json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(path + ": " + e.what());
    }
  }
};

report::Format format_of(const Globals& g, report::Format fallback) {
  if (g.format.empty()) return fallback;
  return g.format == "json" ? report::Format::Json : report::Format::Csv;
}

void emit_json(const Globals& g, const json& j) {
  if (g.out.empty()) {
    std::cout << report::dump(j);
  } else {
    report::write_json(g.out, j);
  }
}

void emit_table(const Globals& g, const report::Table& t, report::Format fallback = report::Format::Csv) {
  const auto fmt = format_of(g, fallback);
  if (g.out.empty()) {
    std::cout << (fmt == report::Format::Json ? report::dump(t.to_json()) : t.to_csv());
  } else {
    report::write_table(g.out, t, fmt);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string(what) + ": not a number '" + s + "'");
  }
}

std::vector<int> parse_k_list(const std::string& s) {
  std::vector<int> ks;
  if (auto colon = s.find(':'); colon != std::string::npos) {
    const int lo = static_cast<int>(to_double(s.substr(0, colon), "k range"));
    const int hi = static_cast<int>(to_double(s.substr(colon + 1), "k range"));
    if (lo < 1 || hi < lo) throw InputError("k range must be lo:hi with 1 <= lo <= hi");
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
  }
  for (const auto& part : split(s, ',')) {
    const double v = to_double(part, "k list");
    if (v < 1 || v != static_cast<int>(v)) throw InputError("k values must be integers >= 1");
    ks.push_back(static_cast<int>(v));
  }
  if (ks.empty()) throw InputError("empty k list");
  return ks;
}

// Picks a single-method slice; domain defaults to the only one present or to
// the macro average.
MeasurementTable select_slice(const MeasurementTable& table, const std::optional<std::string>& method,
                              const std::optional<std::string>& domain) {
  auto methods = table.methods();
  std::optional<std::string> m = method;
  if (!m) {
    if (methods.size() != 1) throw InputError("table holds several methods; pick one with --method");
    m = methods.front();
  }
  auto slice = table.filter(m, std::nullopt);
  if (slice.empty()) throw InputError("no rows for method '" + *m + "'");
  if (domain && *domain != "macro") {
    slice = slice.filter(std::nullopt, domain);
    if (slice.empty()) throw InputError("no rows for domain '" + *domain + "'");
    return slice;
  }
  if (!domain && slice.domains().size() == 1) return slice;
  return slice.macro();
}

// ---------------------------------------------------------------------------

void add_merge(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("merge", "merge expert checkpoints into the base");
  struct Opts {
    std::string base, method = "average";
    std::vector<std::string> experts, ids;
    std::optional<double> c, density, drop;
    bool disjoint_mean = false, serial = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--base", o->base, "base checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--experts", o->experts, "expert checkpoints")->required()->check(CLI::ExistingFile);
  cmd->add_option("--method", o->method, "average|ta|ties|dare")
      ->check(CLI::IsMember({"average", "ta", "ties", "dare"}));
  cmd->add_option("--c", o->c, "merge scale");
  cmd->add_option("--density", o->density, "TIES keep fraction d");
  cmd->add_option("--drop", o->drop, "DARE drop rate p");
  cmd->add_option("--ids", o->ids, "source ids (default: expert file stems)");
  cmd->add_flag("--disjoint-mean", o->disjoint_mean, "TIES: divide by surviving count");
  cmd->add_flag("--serial", o->serial, "use the reference kernels");
  cmd->callback([o, &g] {
    if (g.out.empty()) throw InputError("merge needs --out");
    auto recipe = MergeRecipe::defaults(*parse_method(o->method));
    if (o->c) recipe.scale = *o->c;
    if (o->density) recipe.density = *o->density;
    if (o->drop) recipe.drop_rate = *o->drop;
    recipe.seed = g.seed;
    recipe.disjoint_mean = o->disjoint_mean;

    const auto base = load_checkpoint(o->base);
    std::vector<Checkpoint> experts;
    std::vector<std::string> ids = o->ids;
    for (const auto& path : o->experts) {
      experts.push_back(load_checkpoint(path));
      if (o->ids.empty()) ids.push_back(std::filesystem::path(path).stem().string());
    }
    const auto merged = merge(base, experts, recipe, ids, o->serial ? Exec::Serial : Exec::Parallel);
    save_checkpoint(merged.checkpoint, g.out);
    std::cout << "merged k=" << merged.k() << " method=" << method_name(recipe.method)
              << " tensors=" << merged.checkpoint.tensor_count() << " params=" << merged.checkpoint.param_count()
              << " -> " << g.out << "\n";
  });
}

void add_fit(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("fit", "fit a law to a measurement table");
  struct Opts {
    TableSource src;
    std::string model = "joint", weights = "k", plot;
    std::optional<std::string> method, domain;
    std::optional<double> size;
    bool bounded = false, shared_offset = false, by_domain = false;
  };
  auto o = std::make_shared<Opts>();
  o->src.add_to(cmd);
  cmd->add_option("--model", o->model, "curve|joint|variance|dispersion")
      ->check(CLI::IsMember({"curve", "joint", "variance", "dispersion"}));
  cmd->add_option("--weights", o->weights, "k|uniform")->check(CLI::IsMember({"k", "uniform"}));
  cmd->add_flag("--bounded-term", o->bounded, "curve: add D k/(k+q)");
  cmd->add_option("--method", o->method, "method to fit");
  cmd->add_option("--domain", o->domain, "domain to fit (default: macro average)");
  cmd->add_option("--size", o->size, "N to fit (curve, dispersion)");
  cmd->add_flag("--by-domain", o->by_domain, "joint: one fit per domain");
  cmd->add_flag("--shared-offset", o->shared_offset, "joint --by-domain: one b0 for all domains");
  cmd->add_option("--plot", o->plot, "write long-format series CSV here");
  cmd->callback([o, &g] {
    const auto table = o->src.load().table;
    const auto weights = o->weights == "k" ? WeightMode::ProportionalToK : WeightMode::Uniform;
    std::vector<report::SeriesPoint> series;
    json out;

    auto single_size = [&](const MeasurementTable& slice) {
      auto s = o->size ? slice.filter(std::nullopt, std::nullopt, o->size) : slice;
      if (s.sizes().size() != 1) throw InputError("slice spans several N; pick one with --size");
      return s;
    };

    if (o->model == "joint" && o->by_domain) {
      auto methods = table.methods();
      auto m = o->method ? *o->method : (methods.size() == 1 ? methods.front() : "");
      if (m.empty()) throw InputError("table holds several methods; pick one with --method");
      JointFitOptions opts;
      opts.weights = weights;
      const auto fits = fit_joint_by_domain(table.filter(m, std::nullopt), opts,
                                            o->shared_offset ? OffsetSharing::Shared : OffsetSharing::PerDomain);
      out = json::object();
      out["model"] = "joint";
      out["method"] = m;
      out["domains"] = json::object();
      for (const auto& f : fits) {
        out["domains"][f.domain] = to_report_json(f.fit);
        for (auto p : report::joint_series(f.fit)) {
          p.series = f.domain + " " + p.series;
          series.push_back(p);
        }
      }
    } else {
      const auto slice = select_slice(table, o->method, o->domain);
      if (o->model == "curve") {
        std::vector<CurvePoint> pts;
        for (const auto& c : cell_statistics(single_size(slice))) pts.push_back({double(c.k), c.mean});
        CurveFitOptions opts;
        opts.weights = weights;
        opts.bounded_term = o->bounded;
        const auto fit = fit_curve(pts, opts);
        out = to_report_json(fit);
        series = report::curve_series(fit);
        std::vector<double> ce;
        for (const auto& p : pts) ce.push_back(p.value);
        const auto fr = fractional_return(ce);
        auto r = report::fractional_return_series("R(k)", fr);
        series.insert(series.end(), r.begin(), r.end());
      } else if (o->model == "joint") {
        JointFitOptions opts;
        opts.weights = weights;
        const auto fit = fit_joint(slice, opts);
        out = to_report_json(fit);
        series = report::joint_series(fit);
      } else if (o->model == "variance") {
        const auto fit = fit_variance(slice);
        out = to_report_json(fit);
        series = report::variance_series(fit);
      } else {
        const auto disp = order_dispersion(single_size(slice));
        for (const auto& w : disp.warnings) std::cerr << "warning: " << w << "\n";
        std::vector<CurvePoint> pts;
        for (const auto& c : disp.cells) pts.push_back({double(c.k), c.stddev});
        const auto fit = fit_dispersion(pts);
        out = to_report_json(fit);
        series = report::dispersion_series(fit);
      }
      out["model"] = o->model;
    }
    emit_json(g, out);
    if (!o->plot.empty()) report::write_table(o->plot, report::series_table(series), report::Format::Csv);
  });
}

void add_eval(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("eval", "evaluate a parameter file over k");
  struct Opts {
    std::string params, k = "1:16";
    std::optional<double> size;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--params", o->params, "JSON with L_inf/A/b (curve) or L_star/B/beta/A0/gamma/b0 (joint)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--k", o->k, "range lo:hi or list 1,2,4");
  cmd->add_option("--size", o->size, "N in billions (joint parameters)");
  cmd->callback([o, &g] {
    auto j = TableSource::read_json(o->params);
    if (j.contains("params")) j = j["params"];
    report::Table t{{"k", "L"}, {}};
    const auto ks = parse_k_list(o->k);
    try {
      if (j.contains("L_star")) {
        if (!o->size) throw InputError("joint parameters need --size");
        const auto p = j.get<JointParams>();
        for (int k : ks) t.rows.push_back({std::to_string(k), report::format_number(eval_joint(p, *o->size, k))});
      } else {
        const auto p = j.get<CurveParams>();
        std::optional<BoundedTermParams> extra;
        if (j.contains("D")) extra = j.get<BoundedTermParams>();
        for (int k : ks) t.rows.push_back({std::to_string(k), report::format_number(eval_curve(p, k, extra))});
      }
    } catch (const json::exception& e) {
      throw InputError(o->params + ": " + e.what());
    }
    emit_table(g, t);
  });
}

void add_plan(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("plan", "forecast from three measurements and recommend k");
  struct Opts {
    std::string points;
    double delta = 0.01, epsilon = 0.01;
    int k_max = 32;
    bool absolute = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--points", o->points, "k:CE triple, e.g. 1:0.7825,2:0.75385,4:0.739525")->required();
  cmd->add_option("--delta", o->delta, "gain threshold for k*");
  cmd->add_option("--epsilon", o->epsilon, "tail tolerance for k_eps");
  cmd->add_option("--k-max", o->k_max, "forecast horizon")->check(CLI::PositiveNumber);
  cmd->add_flag("--absolute", o->absolute, "use absolute instead of relative marginal gain");
  cmd->callback([o, &g] {
    const auto parts = split(o->points, ',');
    if (parts.size() != 3) throw InputError("--points needs exactly three k:CE pairs");
    ThreePointInput input;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto colon = parts[i].find(':');
      if (colon == std::string::npos) throw InputError("bad point '" + parts[i] + "', expected k:CE");
      input.samples[i] = {to_double(parts[i].substr(0, colon), "k"), to_double(parts[i].substr(colon + 1), "CE")};
    }
    const auto rule = o->absolute ? KStarRule::AbsoluteGain : KStarRule::RelativeGain;
    const auto r = plan(input, o->delta, o->epsilon, 1, o->k_max, rule);
    std::cerr << describe_rule(rule, o->delta) << ": k* = " << r.k_star << ", k_eps = " << r.k_epsilon << "\n";
    emit_json(g, to_report_json(r));
  });
}

void add_simulate(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("simulate", "Monte-Carlo merges in a quadratic world");
  struct Opts {
    std::string config, k = "1,2,4,8,16,32", dist = "gaussian";
    std::size_t trials = 100000;
    bool serial = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--config", o->config, "world.json")->required()->check(CLI::ExistingFile);
  cmd->add_option("--k", o->k, "k values");
  cmd->add_option("--trials", o->trials, "trials per k");
  cmd->add_option("--distribution", o->dist, "gaussian|uniform")->check(CLI::IsMember({"gaussian", "uniform"}));
  cmd->add_flag("--serial", o->serial, "single-threaded");
  cmd->callback([o, &g] {
    const auto world = world_from_json(TableSource::read_json(o->config));
    const auto dist = o->dist == "gaussian" ? TaskDistribution::Gaussian : TaskDistribution::BoundedUniform;
    const auto result = simulate(world, parse_k_list(o->k), o->trials, g.seed, dist,
                                 o->serial ? Exec::Serial : Exec::Parallel);
    std::cerr << "floor " << report::format_number(closed_form_floor(world)) << ", tail "
              << report::format_number(closed_form_tail(world));
    if (result.records.size() >= 3) std::cerr << ", variance slope " << report::format_number(slope_check(result));
    std::cerr << "\n";
    emit_table(g, report::sim_table(result));
  });
}

void add_permute(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("permute", "diverse merge orders by greedy max-min Hamming distance");
  struct Opts {
    std::string base;
    std::size_t m = 12, candidates = 1000;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--base", o->base, "comma-separated donor labels")->required();
  cmd->add_option("-m", o->m, "number of orders")->check(CLI::PositiveNumber);
  cmd->add_option("--candidates", o->candidates, "candidate pool per round")->check(CLI::PositiveNumber);
  cmd->callback([o, &g] {
    const auto perms = generate_permutations(split(o->base, ','), o->m, o->candidates, g.seed);
    emit_table(g, report::permutation_table(perms));
  });
}

void add_synergy(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("synergy", "donor -> receiver gain matrix from merge trajectories");
  struct Opts {
    TableSource src;
    std::string groups;
  };
  auto o = std::make_shared<Opts>();
  o->src.add_to(cmd);
  cmd->add_option("--groups", o->groups, "JSON {group: [domains]} for block means")->check(CLI::ExistingFile);
  cmd->callback([o, &g] {
    const auto ingested = o->src.load();
    if (ingested.trajectories.empty()) throw InputError("no complete trajectories (every prefix order) in input");
    const auto s = synergy_matrix(ingested.trajectories);
    emit_table(g, report::synergy_table(s));

    std::cerr << ingested.trajectories.size() << " trajectories\n";
    for (const auto& d : s.donors) {
      std::cerr << "  " << d << ": strength " << report::format_number(s.donor_strength(d));
      if (std::find(s.receivers.begin(), s.receivers.end(), d) != s.receivers.end()) {
        std::cerr << ", susceptibility " << report::format_number(s.receiver_susceptibility(d));
      }
      std::cerr << "\n";
    }
    if (!o->groups.empty()) {
      std::map<std::string, std::vector<std::string>> groups;
      try {
        groups = TableSource::read_json(o->groups).get<std::map<std::string, std::vector<std::string>>>();
      } catch (const json::exception& e) {
        throw InputError(o->groups + ": " + e.what());
      }
      for (const auto& [from, fd] : groups) {
        for (const auto& [to, td] : groups) {
          const auto m = s.block_mean(fd, td);
          std::cerr << "  block " << from << " -> " << to << ": " << (m ? report::format_number(*m) : "n/a")
                    << "\n";
        }
      }
    }
  });
}

void add_order_stats(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("order-stats", "across-order dispersion of macro CE per (N, k)");
  struct Opts {
    TableSource src;
    std::optional<std::string> method;
  };
  auto o = std::make_shared<Opts>();
  o->src.add_to(cmd);
  cmd->add_option("--method", o->method, "method to summarise");
  cmd->callback([o, &g] {
    const auto table = o->src.load().table;
    auto methods = table.methods();
    if (!o->method && methods.size() != 1) throw InputError("table holds several methods; pick one with --method");
    const auto d = order_dispersion(table.filter(o->method ? *o->method : methods.front(), std::nullopt));
    for (const auto& w : d.warnings) std::cerr << "warning: " << w << "\n";
    emit_table(g, report::dispersion_table(d));
  });
}

void add_ingest_check(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("ingest-check", "validate a results file and echo it in canonical form");
  auto src = std::make_shared<TableSource>();
  src->add_to(cmd);
  cmd->callback([src, &g] {
    const auto r = src->load();
    const auto& t = r.table;
    std::size_t orders = 0;
    {
      std::vector<std::tuple<std::string, double, std::string>> keys;
      for (const auto& m : t.rows()) keys.emplace_back(m.method, m.size, m.group);
      std::sort(keys.begin(), keys.end());
      orders = static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
    }
    std::cerr << t.size() << " rows, " << orders << " orders, " << t.domains().size() << " domains, "
              << t.methods().size() << " methods, " << t.sizes().size() << " sizes, " << r.trajectories.size()
              << " trajectories, " << r.warnings.size() << " warnings\n";
    if (!g.out.empty()) report::write_table(g.out, report::measurement_table(t), format_of(g, report::Format::Csv));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mergelaw: expert-count scaling laws for merged language models"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--out", g.out, "output file (default: stdout)");
  app.add_option("--format", g.format, "csv|json for tabular output")->check(CLI::IsMember({"csv", "json"}));

  add_merge(app, g);
  add_fit(app, g);
  add_eval(app, g);
  add_plan(app, g);
  add_simulate(app, g);
  add_permute(app, g);
  add_synergy(app, g);
  add_order_stats(app, g);
  add_ingest_check(app, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
