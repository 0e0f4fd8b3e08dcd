#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "run_context.hpp"
#include "trendwatch/clustering.hpp"
#include "trendwatch/csv.hpp"
#include "trendwatch/detector.hpp"
#include "trendwatch/epidata.hpp"
#include "trendwatch/error.hpp"
#include "trendwatch/fusion.hpp"
#include "trendwatch/ground_truth.hpp"
#include "trendwatch/network.hpp"
#include "trendwatch/parallel.hpp"
#include "trendwatch/smoother.hpp"
#include "trendwatch/synthetic.hpp"

namespace trendwatch::cli {

namespace {

using json = nlohmann::ordered_json;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("io", "cannot read " + path);
  return in;
}

StreamPanel load_panel(RunContext& ctx, const std::string& path, const std::vector<std::string>& rate_streams = {}) {
  std::map<std::string, StreamKind> kinds;
  for (const auto& s : rate_streams) kinds[s] = StreamKind::rate;
  auto load = ctx.stage("load_panel", [&] { return load_panel_csv(path, PanelSchema{}, kinds); });
  if (!load.errors.empty()) {
    ctx.warn(std::to_string(load.errors.size()) + " panel row(s) rejected; first at line " +
             std::to_string(load.errors.front().line) + ": " + load.errors.front().reason);
  }
  if (load.panel.empty()) throw DataError("empty_panel", "panel " + path + " holds no observations");
  return std::move(load.panel);
}

std::vector<LabeledInterval> load_intervals(const std::string& path) { return read_intervals_csv(path); }

std::map<std::string, double> parse_weights(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("weight must look like stream=value, got '" + item + "'");
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("weight '" + item + "' is not a number");
    }
    if (!(w > 0.0)) throw UsageError("weight for " + item.substr(0, eq) + " must be positive");
    out[item.substr(0, eq)] = w;
  }
  return out;
}

Date parse_date_option(const std::string& text, const std::string& flag) {
  try {
    return Date::parse(text);
  } catch (const DataError&) {
    throw UsageError(flag + " expects YYYY-MM-DD, got '" + text + "'");
  }
}

std::vector<std::string> all_streams(const StreamPanel& panel) {
  std::vector<std::string> out;
  for (const auto& [s, kind] : panel.streams()) out.push_back(s);
  return out;
}

/// Per-command setup shared by every subcommand.
class Session {
 public:
  Session(CLI::App* app, const GlobalOptions& global, std::optional<std::uint64_t> seed = std::nullopt)
      : global_(global), ctx_(app->get_name(), app->config_to_str(true, false), seed) {}

  RunContext& ctx() { return ctx_; }
  int jobs() const { return resolve_jobs(global_.jobs); }

  void open() {
    ctx_.open(global_.run_dir, global_.out_root);
    std::cout << ctx_.dir().string() << '\n';
  }

 private:
  const GlobalOptions& global_;
  RunContext ctx_;
};

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::string input;
  std::string meta;
  PanelSchema schema;
  std::vector<std::string> rate_streams;
  bool strict = false;
};

Command add_ingest(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<IngestOptions>();
  auto* app = root.add_subcommand("ingest", "Validate a panel CSV and write it in canonical form");
  app->add_option("--input", o->input, "Panel CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--meta", o->meta, "Region metadata CSV to validate and copy")->check(CLI::ExistingFile);
  app->add_option("--region-col", o->schema.region, "Region column")->capture_default_str();
  app->add_option("--stream-col", o->schema.stream, "Stream column")->capture_default_str();
  app->add_option("--date-col", o->schema.date, "Date column")->capture_default_str();
  app->add_option("--value-col", o->schema.value, "Value column")->capture_default_str();
  app->add_option("--rate-streams", o->rate_streams, "Streams holding rates rather than counts")->delimiter(',');
  app->add_flag("--strict", o->strict, "Fail when any row is rejected");
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            ctx.add_input("panel", o->input);
            if (!o->meta.empty()) ctx.add_input("meta", o->meta);
            std::map<std::string, StreamKind> kinds;
            for (const auto& r : o->rate_streams) kinds[r] = StreamKind::rate;
            auto load = ctx.stage("read", [&] { return load_panel_csv(o->input, o->schema, kinds); });
            if (o->strict && !load.errors.empty()) {
              throw DataError("rejected_rows", std::to_string(load.errors.size()) +
                                                   " row(s) rejected; first at line " +
                                                   std::to_string(load.errors.front().line) + ": " +
                                                   load.errors.front().reason);
            }
            RegionMetaSet meta;
            if (!o->meta.empty()) meta = load_region_meta_csv(o->meta);
            s.open();
            ctx.write("panel.csv", [&](std::ostream& out) { write_panel_csv(out, load.panel); });
            if (!o->meta.empty()) ctx.write("meta.csv", [&](std::ostream& out) { write_region_meta_csv(out, meta); });
            if (!load.errors.empty()) {
              ctx.warn(std::to_string(load.errors.size()) + " row(s) rejected; see rejected_rows.csv");
              ctx.write("rejected_rows.csv", [&](std::ostream& out) {
                write_csv_record(out, {"line", "reason"});
                for (const auto& e : load.errors) write_csv_record(out, {std::to_string(e.line), e.reason});
              });
            }
            json summary;
            summary["observations"] = load.panel.observation_count();
            summary["regions"] = load.panel.regions().size();
            summary["streams"] = all_streams(load.panel);
            if (auto r = load.panel.date_range()) {
              summary["first_date"] = r->first.iso();
              summary["last_date"] = r->last.iso();
            }
            summary["rejected_rows"] = load.errors.size();
            ctx.write_text("ingest.json", summary.dump(2));
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- fetch

struct FetchOptions {
  EpidataRequest request;
  std::string start;
  std::string end;
  bool rate = false;
  int backoff_ms = 500;
  int timeout_s = 30;
};

Command add_fetch(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<FetchOptions>();
  o->request.base_url = "https://api.delphi.cmu.edu/epidata";
  auto* app = root.add_subcommand("fetch", "Download one signal from a covidcast-style epidata service");
  app->add_option("--base-url", o->request.base_url, "Service root")->capture_default_str();
  app->add_option("--signal", o->request.signal, "data_source:signal")->required();
  app->add_option("--geo-type", o->request.geo_type, "Geography level")->capture_default_str();
  app->add_option("--geo", o->request.geo_values, "Geography ids (default all)")->delimiter(',');
  app->add_option("--start", o->start, "First date, YYYY-MM-DD")->required();
  app->add_option("--end", o->end, "Last date, YYYY-MM-DD")->required();
  app->add_option("--stream-id", o->request.stream_id, "Stream name in the panel (default: the signal)");
  app->add_flag("--rate", o->rate, "The signal is a rate, not a count");
  app->add_option("--attempts", o->request.max_attempts, "Attempts per request")->capture_default_str();
  app->add_option("--backoff-ms", o->backoff_ms, "Initial retry backoff")->capture_default_str();
  app->add_option("--timeout", o->timeout_s, "Per-request timeout in seconds")->capture_default_str();
  app->add_option("--max-pages", o->request.max_pages, "Pagination limit")->capture_default_str();
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            auto req = o->request;
            req.dates = {parse_date_option(o->start, "--start"), parse_date_option(o->end, "--end")};
            req.kind = o->rate ? StreamKind::rate : StreamKind::count;
            req.backoff = std::chrono::milliseconds(o->backoff_ms);
            req.timeout = std::chrono::seconds(o->timeout_s);
            const auto result = ctx.stage("fetch", [&] { return fetch_epidata(req); });
            s.open();
            for (const auto& w : result.warnings) ctx.warn(w);
            ctx.write("panel.csv", [&](std::ostream& out) { write_panel_csv(out, result.panel); });
            json summary;
            summary["signal"] = req.signal;
            summary["requests"] = result.requests;
            summary["pages"] = result.pages;
            summary["observations"] = result.panel.observation_count();
            summary["regions"] = result.panel.regions().size();
            ctx.write_text("fetch.json", summary.dump(2));
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string scenario;
  std::string preset = "desk540";
  std::uint64_t seed = 0;
};

Command add_simulate(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<SimulateOptions>();
  auto* app = root.add_subcommand("simulate", "Generate a synthetic panel with planted waves");
  auto* file = app->add_option("--scenario", o->scenario, "Scenario JSON")->check(CLI::ExistingFile);
  app->add_option("--preset", o->preset, "Built-in scenario")
      ->check(CLI::IsMember({"desk540"}))
      ->capture_default_str()
      ->excludes(file);
  auto* seed = app->add_option("--seed", o->seed, "Override the scenario seed");
  return {app, [app, o, seed, &global] {
            ScenarioSpec spec;
            if (!o->scenario.empty()) {
              std::ostringstream text;
              text << open_input(o->scenario).rdbuf();
              spec = scenario_from_json(text.str());
            } else {
              spec = desk540();
            }
            if (seed->count() > 0) spec.seed = o->seed;
            Session s(app, global, spec.seed);
            auto& ctx = s.ctx();
            if (!o->scenario.empty()) ctx.add_input("scenario", o->scenario);
            const auto syn = ctx.stage("generate", [&] { return generate_panel(spec); });
            s.open();
            ctx.write("panel.csv", [&](std::ostream& out) { write_panel_csv(out, syn.panel); });
            ctx.write("meta.csv", [&](std::ostream& out) { write_region_meta_csv(out, syn.meta); });
            ctx.write("truth.csv", [&](std::ostream& out) { write_intervals_csv(out, syn.truth); });
            ctx.write("nulls.csv", [&](std::ostream& out) { write_intervals_csv(out, syn.nulls); });
            ctx.write("clusters.csv", [&](std::ostream& out) {
              write_csv_record(out, {"region_id", "cluster"});
              for (const auto& [r, c] : syn.clusters) write_csv_record(out, {r, std::to_string(c)});
            });
            ctx.write_text("scenario.json", scenario_to_json(spec));
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- smooth

struct SmoothOptions {
  std::string panel;
  std::string region;
  std::vector<std::string> streams;
  std::string model = "poisson";
  std::string penalty = "l1";
  std::string space = "log_phi";
  double lambda = 1e4;
  int max_iter = 500;
  double tol = 1e-8;
  bool no_weekday = false;
};

Command add_smooth(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<SmoothOptions>();
  auto* app = root.add_subcommand("smooth", "Retrospective trend smoothing of one region");
  app->add_option("--panel", o->panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--region", o->region, "Region id")->required();
  app->add_option("--streams", o->streams, "Streams to smooth jointly")->required()->delimiter(',');
  app->add_option("--model", o->model, "poisson or lognormal")->capture_default_str();
  app->add_option("--penalty", o->penalty, "l1 or l2")->capture_default_str();
  app->add_option("--space", o->space, "log_phi or phi")->capture_default_str();
  app->add_option("--lambda", o->lambda, "Penalty weight")->capture_default_str();
  app->add_option("--max-iter", o->max_iter, "Iteration limit")->capture_default_str();
  app->add_option("--tol", o->tol, "Relative objective tolerance")->capture_default_str();
  app->add_flag("--no-weekday", o->no_weekday, "Skip the weekday correction");
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            ctx.add_input("panel", o->panel);
            SmoothConfig cfg;
            cfg.penalty = parse_penalty_kind(o->penalty);
            cfg.space = parse_penalty_space(o->space);
            cfg.lambda = o->lambda;
            cfg.max_iter = o->max_iter;
            cfg.tol = o->tol;
            cfg.validate();
            const SmoothModel model = parse_smooth_model(o->model);
            const auto panel = load_panel(ctx, o->panel);
            if (!panel.regions().contains(o->region)) throw UsageError("unknown region '" + o->region + "'");
            std::vector<SeriesSpec> specs;
            for (const auto& st : o->streams) {
              if (!panel.streams().contains(st)) throw UsageError("unknown stream '" + st + "'");
              specs.push_back({st, panel.series(o->region, st), model, !o->no_weekday});
            }
            const auto result = ctx.stage("smooth", [&] {
              return specs.size() == 1 ? smooth_univariate(specs[0], cfg) : smooth_multivariate(specs, cfg);
            });
            s.open();
            if (!result.converged) ctx.warn("smoother stopped at the iteration limit before converging");
            ctx.write("smooth.csv", [&](std::ostream& out) { write_smooth_csv(out, result); });
            ctx.write_text("smooth.json", smooth_result_json(result));
            ctx.write("growth.csv", [&](std::ostream& out) {
              const auto g = growth_series(result);
              write_csv_record(out, {"date", "growth"});
              for (std::size_t i = 0; i < g.size(); ++i) {
                write_csv_record(out, {(g.first() + static_cast<int>(i)).iso(), format_double(g.raw()[i])});
              }
            });
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- groundtruth

struct GroundTruthOptions {
  std::string panel;
  std::vector<std::string> streams;
  std::string penalty = "l1";
  std::vector<double> lambdas;
  std::string model;
  std::string mode = "shared";
  double epsilon = 0.0;
  int min_duration = 7;
  double count_floor = 100.0;
  bool no_weekday = false;
};

Command add_groundtruth(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<GroundTruthOptions>();
  auto* app = root.add_subcommand("groundtruth", "Consensus trend intervals from smoothers over a penalty grid");
  app->add_option("--panel", o->panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--streams", o->streams, "Streams to smooth (default all)")->delimiter(',');
  app->add_option("--penalty", o->penalty, "l1 or l2")->capture_default_str();
  app->add_option("--lambdas", o->lambdas, "Penalty grid (default depends on --penalty)")->delimiter(',');
  app->add_option("--model", o->model,
                  "poisson or lognormal for every stream (default: by stream kind)");
  app->add_option("--mode", o->mode, "shared or per_stream")
      ->check(CLI::IsMember({"shared", "per_stream"}))
      ->capture_default_str();
  app->add_option("--epsilon", o->epsilon, "Growth above which a smoother counts as increasing")
      ->capture_default_str();
  app->add_option("--min-duration", o->min_duration, "Shortest interval kept, days")->capture_default_str();
  app->add_option("--count-floor", o->count_floor, "Minimum stream total per region")->capture_default_str();
  app->add_flag("--no-weekday", o->no_weekday, "Skip the weekday correction");
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            ctx.add_input("panel", o->panel);
            const auto panel = load_panel(ctx, o->panel);
            GroundTruthConfig cfg;
            cfg.streams = o->streams.empty() ? all_streams(panel) : o->streams;
            const PenaltyKind kind = parse_penalty_kind(o->penalty);
            for (double l : o->lambdas.empty() ? default_lambda_grid(kind) : o->lambdas) {
              SmoothConfig c;
              c.penalty = kind;
              c.lambda = l;
              cfg.smoothers.push_back(c);
            }
            if (!o->model.empty())
              for (const auto& st : cfg.streams) cfg.models[st] = parse_smooth_model(o->model);
            cfg.correct_weekday = !o->no_weekday;
            cfg.mode = o->mode == "shared" ? ConsensusMode::shared : ConsensusMode::per_stream;
            cfg.consensus.epsilon = o->epsilon;
            cfg.consensus.min_duration = o->min_duration;
            cfg.count_floor = o->count_floor;
            cfg.jobs = s.jobs();
            const auto gt = ctx.stage("ground_truth", [&] { return build_ground_truth(panel, cfg); });
            s.open();
            const auto inc = increasing_intervals(gt);
            const auto nul = null_intervals(gt);
            ctx.write("intervals.csv", [&](std::ostream& out) { write_intervals_csv(out, inc); });
            ctx.write("nulls.csv", [&](std::ostream& out) { write_intervals_csv(out, nul); });
            json regions = json::array();
            for (const auto& r : gt.regions) {
              json e;
              e["region_id"] = r.region_id;
              e["excluded"] = r.excluded;
              if (r.excluded) e["reason"] = r.reason;
              e["intervals"] = r.consensus.increasing.size();
              e["warnings"] = r.warnings;
              regions.push_back(std::move(e));
            }
            json summary;
            summary["streams"] = cfg.streams;
            summary["lambdas"] = json::array();
            for (const auto& c : cfg.smoothers) summary["lambdas"].push_back(c.lambda);
            summary["intervals"] = inc.size();
            summary["regions"] = std::move(regions);
            ctx.write_text("groundtruth.json", summary.dump(2));
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- fuse

struct FuseOptions {
  std::string panel;
  std::vector<std::string> streams;
  std::vector<std::string> regions;
  std::string model = "linear_log";
  int window = 21;
  std::vector<std::string> weights;
};

Command add_fuse(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<FuseOptions>();
  auto* app = root.add_subcommand("fuse", "Rolling fits per stream and their Stouffer combination");
  app->add_option("--panel", o->panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--streams", o->streams, "Streams to combine")->required()->delimiter(',');
  app->add_option("--regions", o->regions, "Regions (default all)")->delimiter(',');
  app->add_option("--model", o->model, "linear_log, poisson or negbin")->capture_default_str();
  app->add_option("--window", o->window, "Window length in days")->capture_default_str();
  app->add_option("--weights", o->weights, "Per-stream weights, stream=value")->delimiter(',');
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            ctx.add_input("panel", o->panel);
            const auto panel = load_panel(ctx, o->panel);
            DetectorSpec spec;
            spec.streams = o->streams;
            spec.model = parse_regression_model(o->model);
            spec.window_n = o->window;
            spec.fuse = true;
            spec.fusion_weights = parse_weights(o->weights);
            spec.regions = o->regions;
            spec.validate(panel);
            const auto fits = ctx.stage("rolling_fit", [&] { return detector_fits(panel, spec, s.jobs()); });
            std::map<std::string, std::vector<FitSeries>> by_region;
            for (const auto& [stream, list] : fits)
              for (const auto& f : list) by_region[f.region_id].push_back(f);
            std::vector<FusedSeries> fused;
            std::vector<FitSeries> flat;
            ctx.stage("fuse", [&] {
              for (const auto& [region, list] : by_region) {
                fused.push_back(fuse_region(list, spec.fusion_weights));
                flat.insert(flat.end(), list.begin(), list.end());
              }
            });
            s.open();
            ctx.write("fits.csv", [&](std::ostream& out) { write_fit_series_csv(out, flat); });
            ctx.write("fused.csv", [&](std::ostream& out) { write_fused_csv(out, fused); });
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- network

struct NetworkCliOptions {
  std::string panel;
  std::string stream;
  std::string model = "linear_log";
  int window = 21;
  double gamma = 1.0;
  bool no_standardize = false;
  std::size_t min_history = 60;
  std::string history_policy = "truncate_to_longest_block";
  int k = 3;
  std::string scope = "all";
  std::string meta;
  std::string baseline = "none";
  std::string edges;
  std::string compare;
};

Command add_network(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<NetworkCliOptions>();
  auto* app = root.add_subcommand("network", "Learn an epidemic network and its k-nearest-neighbour graph");
  app->add_option("--panel", o->panel, "Panel CSV")->check(CLI::ExistingFile);
  app->add_option("--stream", o->stream, "Stream whose growth histories are compared");
  app->add_option("--model", o->model, "Regression model for the growth histories")->capture_default_str();
  app->add_option("--window", o->window, "Window length in days")->capture_default_str();
  app->add_option("--gamma", o->gamma, "Soft-DTW temperature")->capture_default_str();
  app->add_flag("--no-standardize", o->no_standardize, "Compare raw rather than z-scored histories");
  app->add_option("--min-history", o->min_history, "Growth values required per region")->capture_default_str();
  app->add_option("--history-policy", o->history_policy, "truncate_to_longest_block or fail")
      ->capture_default_str();
  app->add_option("--k", o->k, "Neighbours per region")->capture_default_str();
  app->add_option("--scope", o->scope, "all or in_state")->capture_default_str();
  app->add_option("--meta", o->meta, "Region metadata CSV")->check(CLI::ExistingFile);
  app->add_option("--baseline", o->baseline, "none, geo or edges")
      ->check(CLI::IsMember({"none", "geo", "edges"}))
      ->capture_default_str();
  app->add_option("--edges", o->edges, "Edge list for --baseline edges")->check(CLI::ExistingFile);
  app->add_option("--compare", o->compare, "Distance matrix CSV to correlate with")->check(CLI::ExistingFile);
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            RegionMetaSet meta;
            if (!o->meta.empty()) {
              ctx.add_input("meta", o->meta);
              meta = load_region_meta_csv(o->meta);
            }
            DistanceMatrix d;
            if (o->baseline == "none") {
              if (o->panel.empty() || o->stream.empty()) {
                throw UsageError("a learned network needs --panel and --stream");
              }
              ctx.add_input("panel", o->panel);
              const auto panel = load_panel(ctx, o->panel);
              DetectorSpec spec;
              spec.streams = {o->stream};
              spec.model = parse_regression_model(o->model);
              spec.window_n = o->window;
              spec.validate(panel);
              const auto fits = ctx.stage("rolling_fit", [&] { return detector_fits(panel, spec, s.jobs()); });
              NetworkOptions opts;
              opts.gamma = o->gamma;
              opts.standardize = !o->no_standardize;
              opts.min_history = o->min_history;
              opts.history_policy = parse_history_policy(o->history_policy);
              opts.jobs = s.jobs();
              d = ctx.stage("soft_dtw", [&] { return distance_matrix(fits.at(o->stream), opts); });
            } else if (o->baseline == "geo") {
              if (meta.empty()) throw UsageError("--baseline geo needs --meta");
              d = baseline_network(meta);
            } else {
              if (o->edges.empty()) throw UsageError("--baseline edges needs --edges");
              ctx.add_input("edges", o->edges);
              auto in = open_input(o->edges);
              d = baseline_network(read_edge_list_csv(in));
            }
            const NeighborScope scope = parse_neighbor_scope(o->scope);
            const auto graph = ctx.stage("knn", [&] { return knn_graph(d, o->k, scope, meta); });
            json summary;
            summary["regions"] = d.size();
            summary["gamma"] = d.gamma;
            summary["k"] = o->k;
            summary["scope"] = to_string(scope);
            summary["excluded"] = d.excluded;
            summary["short_of_k"] = graph.short_of_k;
            std::optional<InStateSummary> in_state;
            if (!meta.empty()) {
              in_state = in_state_fraction(graph, meta);
              summary["in_state"] = {{"mean_fraction", in_state->mean_fraction},
                                     {"ci_low", in_state->ci_low},
                                     {"ci_high", in_state->ci_high},
                                     {"mean_count", in_state->mean_count}};
            }
            if (!o->compare.empty()) {
              ctx.add_input("compare", o->compare);
              auto in = open_input(o->compare);
              summary["spearman_vs_compare"] = network_correlation(d, read_distance_csv(in));
            }
            s.open();
            for (const auto& [region, reason] : d.excluded) ctx.warn("region " + region + " excluded: " + reason);
            ctx.write("distances.csv", [&](std::ostream& out) { write_distance_csv(out, d); });
            ctx.write("graph.csv", [&](std::ostream& out) { write_graph_csv(out, graph); });
            if (in_state) {
              ctx.write("in_state.csv", [&](std::ostream& out) {
                write_csv_record(out, {"region_id", "state", "fraction", "count"});
                for (const auto& [region, share] : in_state->per_region) {
                  const auto it = meta.find(region);
                  write_csv_record(out, {region, it == meta.end() ? "" : it->second.state_code,
                                         format_double(share.fraction), std::to_string(share.count)});
                }
              });
            }
            ctx.write_text("network.json", summary.dump(2));
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- cluster

struct ClusterCliOptions {
  std::string distances;
  ClusterOptions cluster;
  std::string method = "kmeans_mds";
};

Command add_cluster(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<ClusterCliOptions>();
  auto* app = root.add_subcommand("cluster", "Cluster regions on a distance matrix");
  app->add_option("--distances", o->distances, "Distance matrix CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--k", o->cluster.k, "Number of clusters")->capture_default_str();
  app->add_option("--method", o->method, "kmeans_mds or kmedoids")->capture_default_str();
  app->add_option("--embed-dim", o->cluster.embed_dim, "MDS dimension")->capture_default_str();
  app->add_option("--seed", o->cluster.seed, "Random seed")->capture_default_str();
  app->add_option("--restarts", o->cluster.restarts, "Restarts; the best is kept")->capture_default_str();
  app->add_option("--max-iter", o->cluster.max_iter, "Iterations per restart")->capture_default_str();
  return {app, [app, o, &global] {
            Session s(app, global, o->cluster.seed);
            auto& ctx = s.ctx();
            ctx.add_input("distances", o->distances);
            auto in = open_input(o->distances);
            const auto d = read_distance_csv(in);
            auto opts = o->cluster;
            opts.method = parse_cluster_method(o->method);
            const auto c = ctx.stage("cluster", [&] { return cluster_regions(d, opts); });
            s.open();
            for (const auto& w : c.warnings) ctx.warn(w);
            ctx.write("clusters.csv", [&](std::ostream& out) { write_clusters_csv(out, c); });
            json summary;
            summary["k"] = opts.k;
            summary["method"] = to_string(opts.method);
            summary["embed_dim"] = c.embed_dim;
            summary["inertia"] = c.inertia;
            ctx.write_text("cluster.json", summary.dump(2));
            ctx.finish();
          }};
}

// ---------------------------------------------------------------- detect / evaluate

struct DetectOptions {
  std::string panel;
  std::vector<std::string> streams;
  std::string truth;
  std::string nulls;
  std::string method = "local_regression";
  std::string model = "linear_log";
  std::string stat = "beta";
  int window = 21;
  double fpr = 0.05;
  bool fuse = false;
  std::vector<std::string> weights;
  std::string network;
  std::string graph;
  int k = 3;
  std::string scope = "all";
  std::string meta;
  bool include_self = false;
  std::string calibration = "pooled";
  std::string cutoff;
  int max_delay = 60;
  std::vector<std::string> regions;
  std::string gap_policy = "interpolate";
  std::vector<int> windows{7, 14, 21, 28, 35};
};

void add_detector_options(CLI::App* app, DetectOptions& o) {
  app->add_option("--panel", o.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--streams", o.streams, "Streams (several need --fuse)")->required()->delimiter(',');
  app->add_option("--truth", o.truth, "Ground-truth intervals CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--nulls", o.nulls, "Null intervals CSV used for calibration")
      ->required()
      ->check(CLI::ExistingFile);
  app->add_option("--method", o.method, "local_regression or moving_average")->capture_default_str();
  app->add_option("--model", o.model, "linear_log, poisson or negbin")->capture_default_str();
  app->add_option("--stat", o.stat, "beta or z (single stream)")->capture_default_str();
  app->add_option("--fpr", o.fpr, "Target false positive rate")->capture_default_str();
  app->add_flag("--fuse", o.fuse, "Combine streams by Stouffer's method");
  app->add_option("--weights", o.weights, "Per-stream fusion weights, stream=value")->delimiter(',');
  auto* net = app->add_option("--network", o.network, "Distance matrix CSV for neighbour aggregation")
                  ->check(CLI::ExistingFile);
  app->add_option("--graph", o.graph, "Neighbour graph CSV for aggregation")
      ->check(CLI::ExistingFile)
      ->excludes(net);
  app->add_option("--k", o.k, "Neighbours per region with --network")->capture_default_str();
  app->add_option("--scope", o.scope, "Neighbour scope with --network: all or in_state")->capture_default_str();
  app->add_option("--meta", o.meta, "Region metadata CSV (for --scope in_state)")->check(CLI::ExistingFile);
  app->add_flag("--include-self", o.include_self, "Count each region among its own neighbours");
  app->add_option("--calibration", o.calibration, "pooled or per_region")->capture_default_str();
  app->add_option("--cutoff", o.cutoff, "Calibrate only on null dates up to this date");
  app->add_option("--max-delay", o.max_delay, "Delay assigned to missed trends")->capture_default_str();
  app->add_option("--regions", o.regions, "Regions (default all)")->delimiter(',');
  app->add_option("--gap-policy", o.gap_policy, "interpolate or fail")
      ->check(CLI::IsMember({"interpolate", "fail"}))
      ->capture_default_str();
}

struct DetectorSetup {
  StreamPanel panel;
  DetectorSpec spec;
  DetectionConfig config;
  std::vector<LabeledInterval> truth;
  std::vector<LabeledInterval> nulls;
};

DetectorSetup prepare_detector(Session& s, const DetectOptions& o) {
  auto& ctx = s.ctx();
  ctx.add_input("panel", o.panel);
  ctx.add_input("truth", o.truth);
  ctx.add_input("nulls", o.nulls);
  DetectorSetup d;
  d.panel = load_panel(ctx, o.panel);
  d.truth = load_intervals(o.truth);
  d.nulls = load_intervals(o.nulls);
  if (d.truth.empty()) throw DataError("empty_truth", "no ground-truth intervals in " + o.truth);

  d.spec.method = parse_detector_method(o.method);
  d.spec.streams = o.streams;
  d.spec.model = parse_regression_model(o.model);
  d.spec.window_n = o.window;
  d.spec.stat = parse_stat_kind(o.stat);
  d.spec.fuse = o.fuse;
  d.spec.fusion_weights = parse_weights(o.weights);
  d.spec.gap_policy = o.gap_policy == "fail" ? GapPolicy::fail : GapPolicy::interpolate;
  d.spec.regions = o.regions;
  d.spec.aggregate.include_self = o.include_self;
  RegionMetaSet meta;
  if (!o.meta.empty()) {
    ctx.add_input("meta", o.meta);
    meta = load_region_meta_csv(o.meta);
  }
  if (!o.network.empty()) {
    ctx.add_input("network", o.network);
    auto in = open_input(o.network);
    const auto dm = read_distance_csv(in);
    d.spec.graph = knn_graph(dm, o.k, parse_neighbor_scope(o.scope), meta);
  } else if (!o.graph.empty()) {
    ctx.add_input("graph", o.graph);
    auto in = open_input(o.graph);
    d.spec.graph = read_graph_csv(in);
  }
  d.spec.validate(d.panel);

  d.config.fpr_target = o.fpr;
  d.config.max_delay = o.max_delay;
  d.config.scope = parse_calibration_scope(o.calibration);
  if (!o.cutoff.empty()) d.config.calibration_cutoff = parse_date_option(o.cutoff, "--cutoff");
  d.config.window_sizes = o.windows;
  d.config.jobs = s.jobs();
  d.config.validate();
  return d;
}

Command add_detect(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<DetectOptions>();
  auto* app = root.add_subcommand("detect", "Calibrate a detector at a target FPR, emit alarms and score them");
  add_detector_options(app, *o);
  app->add_option("--window", o->window, "Window length in days")->capture_default_str();
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            auto d = prepare_detector(s, *o);
            auto stats = ctx.stage("statistics", [&] { return detector_statistics(d.panel, d.spec, s.jobs()); });
            const auto run = ctx.stage("evaluate", [&] {
              return evaluate_statistics(std::move(stats), d.truth, d.nulls, d.config);
            });
            s.open();
            ctx.write("alarms.csv",
                      [&](std::ostream& out) { write_alarms_csv(out, run.stats, run.calibration, run.alarms); });
            ctx.write_text("report.json", eval_report_json(run.report, run.calibration));
            ctx.note("summary", {{"power", run.report.power},
                                 {"mean_delay", run.report.mean_delay},
                                 {"realized_fpr", run.report.realized_fpr}});
            ctx.finish();
          }};
}

Command add_evaluate(CLI::App& root, const GlobalOptions& global) {
  auto o = std::make_shared<DetectOptions>();
  auto* app = root.add_subcommand("evaluate", "Power and delay across window sizes");
  add_detector_options(app, *o);
  app->add_option("--windows", o->windows, "Window sizes")->delimiter(',')->capture_default_str();
  return {app, [app, o, &global] {
            Session s(app, global);
            auto& ctx = s.ctx();
            const auto d = prepare_detector(s, *o);
            const auto rows =
                ctx.stage("sweep", [&] { return window_sweep(d.panel, d.spec, d.truth, d.nulls, d.config); });
            s.open();
            for (const auto& r : rows)
              if (!r.ok) ctx.warn("window " + std::to_string(r.window) + " failed: " + r.error);
            ctx.write("sweep.csv", [&](std::ostream& out) { write_sweep_csv(out, rows); });
            ctx.finish();
          }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app, GlobalOptions& global) {
  return {add_ingest(app, global),   add_fetch(app, global),       add_simulate(app, global),
          add_detect(app, global),   add_smooth(app, global),      add_groundtruth(app, global),
          add_fuse(app, global),     add_network(app, global),     add_cluster(app, global),
          add_evaluate(app, global)};
}

}  // namespace trendwatch::cli
