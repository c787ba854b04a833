#include "liftu/program.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>

namespace liftu {

bool Atom::ground() const {
  return std::none_of(terms.begin(), terms.end(), [](const Term& t) { return t.variable; });
}

std::string Atom::to_string() const {
  if (terms.empty()) return predicate;
  std::string out = predicate + "(";
  for (std::size_t i = 0; i < terms.size(); ++i) out += (i ? "," : "") + terms[i].text;
  return out + ")";
}

std::vector<ConstraintWorld> uniformize(std::vector<ConstraintWorld> worlds) {
  const double p = worlds.empty() ? 0.0 : 1.0 / static_cast<double>(worlds.size());
  for (auto& w : worlds) {
    w.prob = p;
    w.weighted = true;
  }
  return worlds;
}

// --- lexer ---------------------------------------------------------------------

namespace {

enum class Tok { Ident, Var, Number, LParen, RParen, Comma, Dot, If, Arrow, Amp, Slash, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '%') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    const std::size_t l = line, cl = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && is_word(src[j])) ++j;
      const bool var = std::isupper(static_cast<unsigned char>(c)) || c == '_';
      out.push_back({var ? Tok::Var : Tok::Ident, std::string(src.substr(i, j - i)), l, cl});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      auto digits = [&] {
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      };
      digits();
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        digits();
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          digits();
        }
      }
      out.push_back({Tok::Number, std::string(src.substr(i, j - i)), l, cl});
      advance(j - i);
      continue;
    }
    auto two = src.substr(i, 2);
    if (two == ":-") {
      out.push_back({Tok::If, ":-", l, cl});
      advance(2);
      continue;
    }
    if (two == "<-") {
      out.push_back({Tok::Arrow, "<-", l, cl});
      advance(2);
      continue;
    }
    Tok kind;
    switch (c) {
      case '(': kind = Tok::LParen; break;
      case ')': kind = Tok::RParen; break;
      case ',': kind = Tok::Comma; break;
      case '.': kind = Tok::Dot; break;
      case '&': kind = Tok::Amp; break;
      case '/': kind = Tok::Slash; break;
      default: throw ProgramError(std::string("unexpected character '") + c + "'", l, cl);
    }
    out.push_back({kind, std::string(1, c), l, cl});
    advance(1);
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

const char* describe(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Var: return "variable";
    case Tok::Number: return "number";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Dot: return "'.'";
    case Tok::If: return "':-'";
    case Tok::Arrow: return "'<-'";
    case Tok::Amp: return "'&'";
    case Tok::Slash: return "'/'";
    case Tok::End: return "end of input";
  }
  return "token";
}

// --- parser --------------------------------------------------------------------

struct Located {
  std::size_t line;
  std::size_t column;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Program parse() {
    while (peek().kind != Tok::End) statement();
    validate();
    return std::move(prog_);
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& what, const Token& at) const {
    throw ProgramError(what, at.line, at.column);
  }

  Token expect(Tok kind) {
    const Token& t = peek();
    if (t.kind != kind) fail(std::string("expected ") + describe(kind) + ", found " + describe(t.kind), t);
    ++pos_;
    return t;
  }

  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    ++pos_;
    return true;
  }

  Atom atom() {
    Atom a;
    a.predicate = expect(Tok::Ident).text;
    if (accept(Tok::LParen)) {
      do {
        const Token& t = peek();
        if (t.kind == Tok::Var || t.kind == Tok::Ident) {
          a.terms.push_back({t.kind == Tok::Var, t.text});
          ++pos_;
        } else {
          fail(std::string("expected a term, found ") + describe(t.kind), t);
        }
      } while (accept(Tok::Comma));
      expect(Tok::RParen);
    }
    return a;
  }

  void statement() {
    const Token first = peek();
    if (first.kind == Tok::Ident && first.text == "constraint" && peek(1).kind == Tok::Ident) {
      ++pos_;
      binding(first);
      return;
    }
    if (first.kind == Tok::Ident && first.text == "populate" && peek(1).kind == Tok::Ident) {
      ++pos_;
      populate(first);
      return;
    }
    if (first.kind == Tok::Number) {
      ++pos_;
      double p = std::stod(first.text);
      Atom a = atom();
      expect(Tok::Dot);
      if (!a.ground()) fail("probabilistic fact must be ground: " + a.to_string(), first);
      if (!(p > 0.0 && p <= 1.0)) fail("probability must lie in (0, 1]", first);
      auto it = std::find_if(prog_.choice_groups.begin(), prog_.choice_groups.end(),
                             [&](const ChoiceGroup& g) { return g.predicate == a.key(); });
      if (it == prog_.choice_groups.end()) {
        prog_.choice_groups.push_back({a.key(), {}});
        group_at_.push_back({first.line, first.column});
        it = prog_.choice_groups.end() - 1;
      }
      it->facts.push_back({std::move(a), p});
      return;
    }
    Atom head = atom();
    if (accept(Tok::If)) {
      Rule r{std::move(head), {}};
      do {
        r.body.push_back(atom());
      } while (accept(Tok::Amp));
      expect(Tok::Dot);
      prog_.rules.push_back(std::move(r));
      rule_at_.push_back({first.line, first.column});
      return;
    }
    expect(Tok::Dot);
    if (!head.ground()) fail("fact must be ground: " + head.to_string(), first);
    prog_.facts.push_back(std::move(head));
    fact_at_.push_back({first.line, first.column});
  }

  void binding(const Token& at) {
    Binding b;
    b.parfactor = expect(Tok::Ident).text;
    expect(Tok::Arrow);
    if (peek().kind == Tok::Ident && peek().text == "top" && peek(1).kind == Tok::Dot) {
      ++pos_;
    } else {
      Atom q = atom();
      std::set<std::string> vars;
      for (const auto& t : q.terms) {
        if (!t.variable) fail("binding atom " + q.to_string() + " may only contain variables", at);
        if (!vars.insert(t.text).second) fail("binding atom " + q.to_string() + " repeats variable " + t.text, at);
      }
      b.query = std::move(q);
    }
    expect(Tok::Dot);
    if (prog_.bindings.count(b.parfactor)) fail("duplicate binding for parfactor " + b.parfactor, at);
    prog_.bindings.emplace(b.parfactor, std::move(b));
  }

  void populate(const Token& at) {
    PopulateDirective d;
    d.predicate = expect(Tok::Ident).text;
    expect(Tok::Slash);
    const Token arity = expect(Tok::Number);
    if (arity.text != "1") fail("populate needs a unary predicate", arity);
    const Token from = expect(Tok::Ident);
    if (from.text != "from") fail("expected 'from'", from);
    const Token& lv = peek();
    if (lv.kind != Tok::Var && lv.kind != Tok::Ident) fail("expected a logvar name", lv);
    ++pos_;
    d.logvar = Logvar(lv.text);
    expect(Tok::Dot);
    (void)at;
    prog_.populate.push_back(std::move(d));
  }

  void validate() {
    std::set<std::string> choice_preds;
    for (std::size_t g = 0; g < prog_.choice_groups.size(); ++g) {
      const auto& group = prog_.choice_groups[g];
      double total = 0.0;
      for (const auto& f : group.facts) total += f.prob;
      if (std::abs(total - 1.0) > 1e-9)
        throw ProgramError("probabilities of " + group.predicate + " sum to " + std::to_string(total) + ", not 1",
                           group_at_[g].line, group_at_[g].column);
      choice_preds.insert(group.predicate);
    }
    for (std::size_t f = 0; f < prog_.facts.size(); ++f)
      if (choice_preds.count(prog_.facts[f].key()))
        throw ProgramError(prog_.facts[f].key() + " mixes certain and probabilistic facts", fact_at_[f].line,
                           fact_at_[f].column);

    std::map<std::string, std::set<std::string>> deps;
    for (std::size_t r = 0; r < prog_.rules.size(); ++r) {
      const auto& rule = prog_.rules[r];
      const auto& loc = rule_at_[r];
      if (choice_preds.count(rule.head.key()))
        throw ProgramError("probabilistic predicate " + rule.head.key() + " cannot be derived by a rule", loc.line,
                           loc.column);
      std::set<std::string> body_vars;
      for (const auto& b : rule.body)
        for (const auto& t : b.terms)
          if (t.variable) body_vars.insert(t.text);
      for (const auto& t : rule.head.terms)
        if (t.variable && !body_vars.count(t.text))
          throw ProgramError("unbound variable " + t.text + " in rule head " + rule.head.to_string(), loc.line,
                             loc.column);
      for (const auto& b : rule.body) deps[rule.head.key()].insert(b.key());
    }

    // Recursion check: depth-first search for a back edge.
    std::map<std::string, int> state;
    std::function<void(const std::string&)> visit = [&](const std::string& p) {
      state[p] = 1;
      for (const auto& q : deps[p]) {
        if (state[q] == 1) throw ProgramError("recursive predicate " + q);
        if (state[q] == 0) visit(q);
      }
      state[p] = 2;
    };
    for (const auto& [p, unused] : deps)
      if (state[p] == 0) visit(p);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Program prog_;
  std::vector<Located> group_at_, rule_at_, fact_at_;
};

}  // namespace

Program parse_program(std::string_view text) { return Parser(tokenize(text)).parse(); }

// --- evaluation ----------------------------------------------------------------

namespace {

using Row = std::vector<std::string>;

// Rule heads in dependency order: every body predicate precedes the heads
// that use it.
std::vector<std::string> head_order(const Program& prog) {
  std::map<std::string, std::set<std::string>> deps;
  std::vector<std::string> heads;
  for (const auto& r : prog.rules) {
    if (std::find(heads.begin(), heads.end(), r.head.key()) == heads.end()) heads.push_back(r.head.key());
    for (const auto& b : r.body) deps[r.head.key()].insert(b.key());
  }
  std::vector<std::string> order;
  std::set<std::string> done;
  std::function<void(const std::string&)> visit = [&](const std::string& p) {
    if (!done.insert(p).second) return;
    for (const auto& q : deps[p]) visit(q);
    if (std::find(heads.begin(), heads.end(), p) != heads.end()) order.push_back(p);
  };
  for (const auto& h : heads) visit(h);
  return order;
}

void join(const Rule& rule, std::size_t i, std::map<std::string, std::string>& env, const Database& db,
          std::set<Row>& out) {
  if (i == rule.body.size()) {
    Row row;
    for (const auto& t : rule.head.terms) row.push_back(t.variable ? env.at(t.text) : t.text);
    out.insert(std::move(row));
    return;
  }
  const auto& atom = rule.body[i];
  auto rel = db.find(atom.key());
  if (rel == db.end()) return;
  for (const auto& row : rel->second) {
    std::vector<std::string> bound_here;
    bool ok = true;
    for (std::size_t k = 0; k < atom.terms.size() && ok; ++k) {
      const auto& t = atom.terms[k];
      if (!t.variable) {
        ok = row[k] == t.text;
        continue;
      }
      auto it = env.find(t.text);
      if (it == env.end()) {
        env.emplace(t.text, row[k]);
        bound_here.push_back(t.text);
      } else {
        ok = it->second == row[k];
      }
    }
    if (ok) join(rule, i + 1, env, db, out);
    for (const auto& v : bound_here) env.erase(v);
  }
}

Row ground_row(const Atom& a) {
  Row row;
  for (const auto& t : a.terms) row.push_back(t.text);
  return row;
}

}  // namespace

Database derive(const Program& prog, Database db) {
  for (const auto& head : head_order(prog)) {
    std::set<Row> derived;
    for (const auto& r : prog.rules) {
      if (r.head.key() != head) continue;
      std::map<std::string, std::string> env;
      join(r, 0, env, db, derived);
    }
    db[head].insert(derived.begin(), derived.end());
  }
  return db;
}

std::vector<ConstraintWorld> evaluate(const Program& prog, const TemplateModel& tmpl, const DomainWorld& dw) {
  for (const auto& [id, b] : prog.bindings)
    if (!tmpl.find(id)) throw ProgramError("binding for unknown parfactor " + id);
  for (const auto& p : tmpl.parfactors()) {
    if (p.constraint().logvars().empty() || prog.bindings.count(p.name())) continue;
    throw ProgramError("no constraint binding for parfactor " + p.name());
  }
  for (const auto& [id, b] : prog.bindings) {
    if (!b.query) continue;
    const auto& lvs = tmpl.parfactors()[*tmpl.find(id)].constraint().logvars();
    if (b.query->terms.size() != lvs.size())
      throw ProgramError("binding " + b.query->to_string() + " has arity " + std::to_string(b.query->terms.size()) +
                         " but parfactor " + id + " has " + std::to_string(lvs.size()) + " logvars");
  }

  Database base;
  for (const auto& f : prog.facts) base[f.key()].insert(ground_row(f));
  for (const auto& d : prog.populate) {
    auto it = dw.domains.find(d.logvar);
    if (it == dw.domains.end()) throw DomainError("missing domain for logvar " + d.logvar.name);
    auto& rel = base[d.predicate + "/1"];
    for (const auto& c : it->second) rel.insert({c.name});
  }

  const bool weighted = !prog.choice_groups.empty();
  std::vector<ConstraintWorld> worlds;
  std::vector<std::size_t> pick(prog.choice_groups.size(), 0);
  while (true) {
    Database db = base;
    ConstraintWorld w;
    w.weighted = weighted;
    w.choices = pick;
    for (std::size_t g = 0; g < pick.size(); ++g) {
      const auto& fact = prog.choice_groups[g].facts[pick[g]];
      db[fact.atom.key()].insert(ground_row(fact.atom));
      w.prob *= fact.prob;
    }
    db = derive(prog, std::move(db));

    for (const auto& p : tmpl.parfactors()) {
      const auto& lvs = p.constraint().logvars();
      auto b = prog.bindings.find(p.name());
      if (b == prog.bindings.end()) {
        w.constraints.push_back(Constraint::extensional({}, {Tuple{}}));
      } else if (!b->second.query) {
        w.constraints.push_back(cartesian_constraint(lvs, dw.domains));
      } else {
        std::vector<Tuple> tuples;
        auto rel = db.find(b->second.query->key());
        if (rel != db.end()) {
          for (const auto& row : rel->second) {
            Tuple t;
            for (const auto& v : row) t.emplace_back(v);
            tuples.push_back(std::move(t));
          }
        }
        if (tuples.empty()) {
          w.constraints.push_back(Constraint::empty(lvs));
          w.degenerate = true;
        } else {
          w.constraints.push_back(Constraint::extensional(lvs, std::move(tuples)));
        }
      }
    }
    worlds.push_back(std::move(w));

    std::size_t g = pick.size();
    bool wrapped = true;
    while (g > 0) {
      --g;
      if (++pick[g] < prog.choice_groups[g].facts.size()) {
        wrapped = false;
        break;
      }
      pick[g] = 0;
    }
    if (wrapped) break;
  }

  std::stable_sort(worlds.begin(), worlds.end(),
                   [](const ConstraintWorld& a, const ConstraintWorld& b) { return a.prob > b.prob; });
  return worlds;
}

}  // namespace liftu
