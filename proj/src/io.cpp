#include "liftu/io.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace liftu::io {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') return false;
  return true;
}

// "Name(a, b)" or "Name" into the name and trimmed argument texts.
std::pair<std::string, std::vector<std::string>> split_atom(std::string_view text, const char* what) {
  text = trim(text);
  auto open = text.find('(');
  std::string name(trim(text.substr(0, open)));
  if (!valid_name(name)) throw InputError(std::string("malformed ") + what + ": '" + std::string(text) + "'");
  std::vector<std::string> args;
  if (open == std::string_view::npos) return {name, args};
  if (text.back() != ')') throw InputError(std::string("malformed ") + what + ": '" + std::string(text) + "'");
  auto inner = text.substr(open + 1, text.size() - open - 2);
  std::size_t start = 0;
  while (true) {
    auto comma = inner.find(',', start);
    auto piece = trim(inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!valid_name(piece)) throw InputError(std::string("malformed ") + what + ": '" + std::string(text) + "'");
    args.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return {name, args};
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::vector<Constant> constants_of(const std::vector<std::string>& names) {
  return {names.begin(), names.end()};
}

}  // namespace

std::vector<Parfactor> parse_parfactors(std::string_view json_text, std::uint64_t seed) {
  const json doc = parse_json(json_text, "model");
  if (!doc.is_object()) throw ModelError("model must be a JSON object");

  std::map<std::string, RandvarSignature> declared;
  if (doc.contains("randvars")) {
    for (const auto& r : doc.at("randvars")) {
      auto name = field<std::string>(r, "name", "randvar");
      RandvarSignature sig;
      sig.arity = r.value("arity", std::size_t{0});
      if (r.contains("range")) sig.range = Range(field<std::vector<std::string>>(r, "range", "randvar " + name));
      if (!declared.emplace(name, sig).second) throw ModelError("randvar " + name + " declared twice");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<Parfactor> out;
  for (const auto& p : field<json>(doc, "parfactors", "model")) {
    const auto name = field<std::string>(p, "name", "parfactor");
    const std::string where = "parfactor " + name;
    std::vector<Prv> args;
    for (const auto& a : field<std::vector<std::string>>(p, "args", where)) {
      auto [rv, params] = split_atom(a, "argument");
      Prv prv{rv, {}, Range::boolean()};
      for (const auto& lv : params) prv.params.emplace_back(lv);
      auto it = declared.find(rv);
      if (it != declared.end()) {
        if (it->second.arity != prv.params.size())
          throw ModelError(where + ": " + rv + " expects " + std::to_string(it->second.arity) + " parameters");
        prv.range = it->second.range;
      }
      args.push_back(std::move(prv));
    }

    const std::size_t n = TableIndexer(range_sizes(args)).size();
    Eigen::ArrayXd values(static_cast<Eigen::Index>(n));
    const json v = field<json>(p, "values", where);
    if (v.is_string() && v.get<std::string>() == "random") {
      // Uniform in [0.1, 1) from the top 53 bits, identical on every platform.
      for (Eigen::Index i = 0; i < values.size(); ++i)
        values[i] = 0.1 + 0.9 * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    } else if (v.is_array()) {
      if (v.size() != n)
        throw ModelError(where + ": " + std::to_string(v.size()) + " values for a table of size " + std::to_string(n));
      for (std::size_t i = 0; i < n; ++i) {
        if (!v[i].is_number()) throw ModelError(where + ": non-numeric potential");
        values[static_cast<Eigen::Index>(i)] = v[i].get<double>();
      }
    } else {
      throw ModelError(where + ": values must be an array or \"random\"");
    }

    PotentialTable table(args, std::move(values));
    const json& c = p.contains("constraint") ? p.at("constraint") : json("empty");
    Constraint constraint;
    if (c.is_string() && c.get<std::string>() == "empty") {
      constraint = Constraint::empty(logvars_of(args));
    } else if (c.is_string() && c.get<std::string>() == "top") {
      constraint = Constraint::top(logvars_of(args));
    } else if (c.is_object()) {
      std::vector<Logvar> lvs;
      for (const auto& lv : field<std::vector<std::string>>(c, "logvars", where)) lvs.emplace_back(lv);
      std::vector<Tuple> tuples;
      for (const auto& t : field<std::vector<std::vector<std::string>>>(c, "tuples", where))
        tuples.push_back(constants_of(t));
      constraint = Constraint::extensional(std::move(lvs), std::move(tuples));
    } else {
      throw ModelError(where + ": constraint must be \"empty\", \"top\" or an object");
    }
    out.emplace_back(name, std::move(table), std::move(constraint));
  }
  collect_signatures(out);
  return out;
}

TemplateModel template_of(const std::vector<Parfactor>& parfactors) {
  std::vector<Parfactor> out;
  for (const auto& p : parfactors) {
    auto lvs = p.constraint().logvars();
    out.emplace_back(p.name(), p.table(), Constraint::empty(std::move(lvs)));
  }
  return TemplateModel(std::move(out));
}

DomainSpec parse_domain_spec(std::string_view json_text) {
  const json doc = parse_json(json_text, "domain specification");
  if (!doc.is_object() || !doc.contains("logvars") || !doc.at("logvars").is_object())
    throw DomainError("domain specification needs a \"logvars\" object");
  DomainSpec spec;
  for (const auto& [name, d] : doc.at("logvars").items()) {
    const std::string where = "logvar " + name;
    auto guaranteed = constants_of(d.value("guaranteed", std::vector<std::string>{}));
    auto prefix = d.value("prefix", std::string{});
    LogvarDomainSpec lds;
    if (d.contains("constants")) {
      lds = FixedDomain{constants_of(field<std::vector<std::string>>(d, "constants", where))};
    } else if (d.contains("beta_binomial")) {
      const auto& b = d.at("beta_binomial");
      BetaBinomialDomain bb;
      bb.alpha = field<double>(b, "alpha", where);
      bb.beta = field<double>(b, "beta", where);
      bb.bins = field<std::size_t>(b, "bins", where);
      bb.step = field<std::size_t>(b, "step", where);
      bb.guaranteed = std::move(guaranteed);
      bb.prefix = std::move(prefix);
      lds = std::move(bb);
    } else if (d.contains("worlds")) {
      EnumeratedDomain en;
      for (const auto& w : d.at("worlds")) {
        EnumeratedDomain::Entry e;
        if (w.contains("size")) e.size = field<std::size_t>(w, "size", where);
        else e.constants = constants_of(field<std::vector<std::string>>(w, "constants", where));
        if (w.contains("prob")) e.prob = field<double>(w, "prob", where);
        en.worlds.push_back(std::move(e));
      }
      en.guaranteed = std::move(guaranteed);
      en.prefix = std::move(prefix);
      lds = std::move(en);
    } else {
      throw DomainError(where + ": expected \"constants\", \"beta_binomial\" or \"worlds\"");
    }
    spec.logvars.emplace(Logvar(name), std::move(lds));
  }
  return spec;
}

GroundAtom parse_atom(std::string_view text) {
  try {
    auto [name, args] = split_atom(text, "atom");
    return {name, constants_of(args)};
  } catch (const InputError& e) {
    throw QueryError(e.what());
  }
}

namespace {

// Splits on commas outside parentheses.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')') --depth;
    if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

}  // namespace

EventProbe parse_event(std::string_view text) {
  auto eq = text.rfind('=');
  if (eq == std::string_view::npos) throw QueryError("expected atom=value, got '" + std::string(text) + "'");
  auto value = trim(text.substr(eq + 1));
  if (!valid_name(value)) throw QueryError("malformed value in '" + std::string(text) + "'");
  return {parse_atom(text.substr(0, eq)), std::string(value)};
}

QuerySpec parse_query(std::string_view text) {
  auto s = trim(text);
  if (s.size() < 3 || s[0] != 'P' || trim(s.substr(1)).front() != '(' || s.back() != ')')
    throw QueryError("query must look like P(atom[, atom] [| atom=value, ...]), got '" + std::string(text) + "'");
  s = trim(s.substr(1));
  auto inner = trim(s.substr(1, s.size() - 2));
  auto bar = inner.find('|');
  auto targets = trim(inner.substr(0, bar));
  if (targets.empty()) throw QueryError("query has no targets");
  QuerySpec q;
  for (auto t : split_top_level(targets)) {
    auto atom = parse_atom(t);
    if (std::find(q.targets.begin(), q.targets.end(), atom) != q.targets.end())
      throw QueryError("duplicate target " + atom.to_string());
    q.targets.push_back(std::move(atom));
  }
  if (bar != std::string_view::npos) {
    auto ev = trim(inner.substr(bar + 1));
    if (ev.empty()) throw QueryError("empty evidence after '|'");
    for (auto e : split_top_level(ev)) {
      auto probe = parse_event(e);
      q.evidence.add(std::move(probe.atom), std::move(probe.value));
    }
  }
  return q;
}

}  // namespace liftu::io
