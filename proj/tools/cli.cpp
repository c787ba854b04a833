#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "liftu/io.hpp"
#include "liftu/program.hpp"
#include "liftu/query.hpp"
#include "liftu/universe.hpp"

namespace liftu::cli {

namespace {

using nlohmann::ordered_json;

struct RunConfig {
  std::string model;
  std::string program;
  std::string domains;
  std::optional<double> threshold;
  bool cascade = false;
  std::optional<double> cascade_threshold;
  std::size_t k = 0;
  std::string event;
  std::string query;
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 0;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void csv_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
  os << '\n';
}

std::string join_sizes(const std::vector<std::size_t>& key) {
  std::string s;
  for (std::size_t i = 0; i < key.size(); ++i) s += (i ? ";" : "") + std::to_string(key[i]);
  return s;
}

std::string named_sizes(const std::map<Logvar, std::size_t>& sizes) {
  std::string s;
  for (const auto& [lv, n] : sizes) s += (s.empty() ? "" : ";") + lv.name + "=" + std::to_string(n);
  return s;
}

UniverseModel load_universe(const RunConfig& cfg) {
  auto parfactors = io::parse_parfactors(io::read_file(cfg.model), cfg.seed);
  auto tmpl = io::template_of(parfactors);
  Program prog;
  if (cfg.program.empty()) {
    for (const auto& p : tmpl.parfactors())
      if (!p.constraint().logvars().empty()) prog.bindings.emplace(p.name(), Binding{p.name(), std::nullopt});
  } else {
    prog = parse_program(io::read_file(cfg.program));
  }
  auto spec = io::parse_domain_spec(io::read_file(cfg.domains));
  std::optional<WorldFilter> filter;
  if (cfg.threshold || cfg.cascade || cfg.cascade_threshold) {
    filter = WorldFilter{cfg.threshold.value_or(0.0), cfg.cascade, cfg.cascade_threshold};
  }
  return UniverseModel(std::move(tmpl), std::move(prog), std::move(spec), filter);
}

void report_expand(const ExpandResult& r, std::ostream& err) {
  err << "domain worlds: " << r.domain_worlds_total << " enumerated, " << r.domain_worlds_retained
      << " retained; combined worlds: " << r.constraint_worlds_before_cascade << " generated, " << r.models.size()
      << " kept; retained mass " << num(r.retained_mass) << '\n';
}

void write_manifest(const ExpandResult& r, const RunConfig& cfg, std::ostream& os) {
  if (cfg.format == "json") {
    ordered_json doc;
    doc["domain_worlds_total"] = r.domain_worlds_total;
    doc["domain_worlds_retained"] = r.domain_worlds_retained;
    doc["combined_worlds_before_cascade"] = r.constraint_worlds_before_cascade;
    doc["retained_mass"] = r.retained_mass;
    doc["worlds"] = ordered_json::array();
    for (const auto& wm : r.models) {
      ordered_json w;
      w["world_id"] = wm.provenance.to_string();
      w["domain_world"] = wm.provenance.domain_world;
      w["constraint_world"] = wm.provenance.constraint_world;
      ordered_json sizes = ordered_json::object();
      for (const auto& [lv, n] : wm.domain_sizes) sizes[lv.name] = n;
      w["domain_sizes"] = sizes;
      w["weight"] = wm.prob;
      w["degenerate"] = wm.degenerate;
      doc["worlds"].push_back(std::move(w));
    }
    os << doc.dump(2) << '\n';
    return;
  }
  csv_row(os, {"world_id", "domain_world", "constraint_world", "domain_sizes", "weight", "degenerate"});
  for (const auto& wm : r.models)
    csv_row(os, {wm.provenance.to_string(), std::to_string(wm.provenance.domain_world),
                 std::to_string(wm.provenance.constraint_world), named_sizes(wm.domain_sizes), num(wm.prob),
                 wm.degenerate ? "true" : "false"});
}

// "p_<target>=<value>" per joint assignment, targets joined by '&'.
std::vector<std::string> prob_columns(const MarginalDistribution& m) {
  std::vector<std::size_t> dims;
  for (const auto& r : m.ranges) dims.push_back(r.size());
  TableIndexer idx(dims);
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto a = idx.decode(k);
    std::string c = "p_";
    for (std::size_t i = 0; i < a.size(); ++i)
      c += (i ? "&" : "") + m.targets[i].to_string() + "=" + m.ranges[i].label(a[i]);
    cols.push_back(std::move(c));
  }
  return cols;
}

void write_answers(const AnswerSet& a, const std::vector<std::size_t>& rows, const std::vector<std::string>& reasons,
                   const RunConfig& cfg, std::ostream& os) {
  const auto cols = prob_columns(a.entries.front().answer);
  const bool with_reason = !reasons.empty();
  if (cfg.format == "json") {
    ordered_json doc;
    doc["query"] = cfg.query;
    doc["retained_mass"] = a.retained_mass;
    doc["rows"] = ordered_json::array();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& e = a.entries[rows[r]];
      ordered_json row;
      row["world_id"] = e.provenance.to_string();
      row["domain_size"] = e.size_key;
      row["model_prob"] = e.model_prob;
      ordered_json probs = ordered_json::object();
      for (std::size_t c = 0; c < cols.size(); ++c) probs[cols[c]] = e.answer.probs[static_cast<Eigen::Index>(c)];
      row["probs"] = probs;
      if (with_reason) row["reason"] = reasons[r];
      doc["rows"].push_back(std::move(row));
    }
    doc["skipped"] = ordered_json::array();
    for (const auto& s : a.skipped) doc["skipped"].push_back({{"world_id", s.provenance.to_string()}, {"reason", s.reason}});
    os << doc.dump(2) << '\n';
    return;
  }
  std::vector<std::string> header{"world_id", "domain_size", "model_prob"};
  header.insert(header.end(), cols.begin(), cols.end());
  if (with_reason) header.push_back("reason");
  csv_row(os, header);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& e = a.entries[rows[r]];
    std::vector<std::string> cells{e.provenance.to_string(), join_sizes(e.size_key), num(e.model_prob)};
    for (Eigen::Index c = 0; c < e.answer.probs.size(); ++c) cells.push_back(num(e.answer.probs[c]));
    if (with_reason) cells.push_back(reasons[r]);
    csv_row(os, cells);
  }
}

AnswerSet answer(const RunConfig& cfg, std::ostream& err) {
  auto q = io::parse_query(cfg.query);
  auto u = load_universe(cfg);
  auto r = expand(u);
  report_expand(r, err);
  auto a = query_all(r.models, q);
  for (const auto& s : a.skipped) err << "skipped world " << s.provenance.to_string() << ": " << s.reason << '\n';
  return a;
}

std::vector<std::size_t> all_rows(const AnswerSet& a) {
  std::vector<std::size_t> rows(a.entries.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

int dispatch(const std::string& cmd, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  // Render into a buffer first so a failure leaves no partial output.
  std::ostringstream buf;

  if (cmd == "expand") {
    auto r = expand(load_universe(cfg));
    report_expand(r, err);
    write_manifest(r, cfg, buf);
  } else if (cmd == "query") {
    auto a = answer(cfg, err);
    write_answers(a, all_rows(a), {}, cfg, buf);
  } else if (cmd == "topk") {
    if (cfg.k == 0) throw QueryError("topk needs --k >= 1");
    auto a = answer(cfg, err);
    auto sel = cfg.event.empty() ? top_k_model_prob(a, cfg.k) : top_k_query_prob(a, io::parse_event(cfg.event), cfg.k);
    if (sel.truncated) err << "k exceeds the " << a.entries.size() << " answers; returning all\n";
    std::vector<std::string> reasons;
    for (std::size_t i = 0; i < sel.rows.size(); ++i) reasons.push_back("rank " + std::to_string(i + 1));
    write_answers(a, sel.rows, reasons, cfg, buf);
  } else if (cmd == "skyline") {
    if (cfg.event.empty()) throw QueryError("skyline needs --event");
    auto a = answer(cfg, err);
    auto sel = skyline(a, io::parse_event(cfg.event));
    write_answers(a, sel.rows, std::vector<std::string>(sel.rows.size(), "skyline"), cfg, buf);
  } else {
    if (cfg.event.empty()) throw QueryError("trend needs --event");
    auto a = answer(cfg, err);
    auto t = trend_report(a, io::parse_event(cfg.event));
    const std::string reason = std::string(to_string(t.direction)) + " max_delta=" + num(t.max_delta);
    err << "trend: " << reason << '\n';
    write_answers(a, t.rows, std::vector<std::string>(t.rows.size(), reason), cfg, buf);
  }
  if (cfg.out.empty()) {
    out << buf.str();
    return 0;
  }
  std::ofstream file(cfg.out, std::ios::binary);
  if (!file) throw InputError("cannot write " + cfg.out);
  file << buf.str();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lifted inference over probabilistic universes"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub, bool needs_query) {
    sub->add_option("--model", cfg.model, "Template model (JSON)")->required();
    sub->add_option("--program", cfg.program, "Constraint program (Datalog); default binds every parfactor to top");
    sub->add_option("--domains", cfg.domains, "Domain specification (JSON)")->required();
    sub->add_option("--threshold", cfg.threshold, "Drop domain worlds with probability <= t");
    sub->add_flag("--cascade", cfg.cascade, "Also filter combined weights");
    sub->add_option("--cascade-threshold", cfg.cascade_threshold, "Threshold for combined weights (default: --threshold)");
    sub->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", cfg.out, "Output file (default: stdout)");
    sub->add_option("--seed", cfg.seed, "Seed for \"random\" potential tables");
    if (needs_query) sub->add_option("--query", cfg.query, "P(atom[, atom] [| atom=value, ...])")->required();
  };
  auto* expand_cmd = app.add_subcommand("expand", "Write the world manifest");
  common(expand_cmd, false);
  auto* query_cmd = app.add_subcommand("query", "Answer a query in every world");
  common(query_cmd, true);
  auto* topk_cmd = app.add_subcommand("topk", "Top-k worlds by event or model probability");
  common(topk_cmd, true);
  topk_cmd->add_option("--k", cfg.k, "Number of rows")->required();
  topk_cmd->add_option("--event", cfg.event, "Rank by P(atom=value); default ranks by model probability");
  auto* skyline_cmd = app.add_subcommand("skyline", "Pareto frontier of model and event probability");
  common(skyline_cmd, true);
  skyline_cmd->add_option("--event", cfg.event, "atom=value")->required();
  auto* trend_cmd = app.add_subcommand("trend", "Event probability over ascending domain size");
  common(trend_cmd, true);
  trend_cmd->add_option("--event", cfg.event, "atom=value")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    return dispatch(app.get_subcommands().front()->get_name(), cfg, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InferenceError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace liftu::cli
