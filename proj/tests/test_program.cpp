#include <gtest/gtest.h>

#include <random>

#include "liftu/error.hpp"
#include "liftu/io.hpp"
#include "liftu/program.hpp"
#include "support.hpp"

using namespace liftu;

namespace {

const Logvar X("X"), T("T");

TemplateModel epidemic_template() {
  return io::template_of(io::parse_parfactors(io::read_file("data/epidemic/model.json")));
}

DomainWorld people(std::vector<Constant> treatments) {
  DomainWorld dw;
  dw.domains[X] = {Constant("alice"), Constant("bob"), Constant("eve")};
  dw.domains[T] = std::move(treatments);
  return dw;
}

std::vector<Tuple> pairs_with(std::initializer_list<const char*> ts) {
  std::vector<Tuple> out;
  for (const char* x : {"alice", "bob", "eve"})
    for (const char* t : ts) out.push_back({Constant(x), Constant(t)});
  return out;
}

ProgramError parse_error(std::string_view text) {
  try {
    parse_program(text);
  } catch (const ProgramError& e) {
    return e;
  }
  ADD_FAILURE() << "no error for: " << text;
  return ProgramError("none");
}

// Evaluates rules by trying every variable assignment over the active
// domain, repeating until nothing new is derived.
Database naive_fixpoint(const Program& prog, Database db) {
  std::set<std::string> active;
  for (const auto& [k, rel] : db)
    for (const auto& row : rel) active.insert(row.begin(), row.end());
  std::vector<std::string> dom(active.begin(), active.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& r : prog.rules) {
      std::vector<std::string> vars;
      auto note = [&](const Atom& a) {
        for (const auto& t : a.terms)
          if (t.variable && std::find(vars.begin(), vars.end(), t.text) == vars.end()) vars.push_back(t.text);
      };
      for (const auto& b : r.body) note(b);
      std::vector<std::size_t> pick(vars.size(), 0);
      if (dom.empty() && !vars.empty()) continue;
      auto row_of = [&](const Atom& a) {
        std::vector<std::string> row;
        for (const auto& t : a.terms) {
          if (!t.variable) {
            row.push_back(t.text);
            continue;
          }
          auto i = std::find(vars.begin(), vars.end(), t.text) - vars.begin();
          row.push_back(dom[pick[static_cast<std::size_t>(i)]]);
        }
        return row;
      };
      while (true) {
        bool holds = true;
        for (const auto& b : r.body) {
          auto it = db.find(b.key());
          holds = holds && it != db.end() && it->second.count(row_of(b));
        }
        if (holds && db[r.head.key()].insert(row_of(r.head)).second) changed = true;
        std::size_t i = 0;
        while (i < pick.size() && ++pick[i] == dom.size()) pick[i++] = 0;
        if (i == pick.size()) break;
      }
    }
  }
  return db;
}

Database nonempty(Database db) {
  std::erase_if(db, [](const auto& kv) { return kv.second.empty(); });
  return db;
}

}  // namespace

TEST(ParseProgram, TreatmentProgram) {
  auto prog = parse_program(io::read_file("data/epidemic/treatment.dl"));
  EXPECT_EQ(prog.rules.size(), 3u);
  ASSERT_EQ(prog.choice_groups.size(), 1u);
  const auto& g = prog.choice_groups[0];
  EXPECT_EQ(g.predicate, "pair/2");
  ASSERT_EQ(g.facts.size(), 3u);
  EXPECT_DOUBLE_EQ(g.facts[0].prob, 0.7);
  EXPECT_EQ(g.facts[2].atom.to_string(), "pair(t1,t3)");
  ASSERT_EQ(prog.bindings.size(), 2u);
  EXPECT_EQ(prog.bindings.at("g2").query->key(), "element_of_C2/2");
  ASSERT_EQ(prog.populate.size(), 1u);
  EXPECT_EQ(prog.populate[0].logvar, X);
}

TEST(ParseProgram, SyntaxErrorsCarryPosition) {
  auto e = parse_error("p(a).\nq(X) :- p(X\n");
  EXPECT_EQ(e.line(), 3u);
  e = parse_error("p(a).\n  q(X) :- $p(X).");
  EXPECT_EQ(e.line(), 2u);
  EXPECT_EQ(e.column(), 11u);
  e = parse_error("0.5 p(X).");
  EXPECT_EQ(e.line(), 1u);
}

TEST(ParseProgram, SemanticErrors) {
  EXPECT_NE(std::string(parse_error("p(X) :- q(X).\nq(X) :- p(X).").what()).find("recursive"), std::string::npos);
  EXPECT_NE(std::string(parse_error("p(X) :- p(X).").what()).find("recursive"), std::string::npos);
  EXPECT_NE(std::string(parse_error("0.5 c(a).\n0.4 c(b).").what()).find("sum to"), std::string::npos);
  EXPECT_NE(std::string(parse_error("h(X, Y) :- b(X).").what()).find("unbound"), std::string::npos);
  parse_error("constraint g <- p(X).\nconstraint g <- q(X).");
  parse_error("constraint g <- p(X, X).");
  parse_error("0.5 c(a).\n0.5 c(b).\nc(d).");
  parse_error("0.5 c(a).\n0.5 c(b).\nc(X) :- d(X).");
  parse_error("1.5 c(a).");
  parse_error("populate p/2 from X.");
  EXPECT_NO_THROW(parse_program("1.0 c(a).\n% only one choice\nconstraint g <- top."));
}

TEST(Evaluate, TreatmentWorldsOnPeople) {
  auto prog = parse_program(io::read_file("data/epidemic/treatment.dl"));
  auto worlds = evaluate(prog, epidemic_template(), people({Constant("t1"), Constant("t2"), Constant("t3")}));
  ASSERT_EQ(worlds.size(), 3u);
  const std::vector<double> probs{0.7, 0.2, 0.1};
  const std::vector<std::vector<Tuple>> c2{pairs_with({"t1", "t2"}), pairs_with({"t2", "t3"}), pairs_with({"t1", "t3"})};
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(worlds[j].prob, probs[j]);
    EXPECT_TRUE(worlds[j].weighted);
    EXPECT_FALSE(worlds[j].degenerate);
    ASSERT_EQ(worlds[j].constraints.size(), 3u);
    EXPECT_EQ(worlds[j].constraints[0].size(), 1u);
    EXPECT_EQ(worlds[j].constraints[1].tuples().size(), 3u);
    EXPECT_EQ(worlds[j].constraints[2].logvars(), (std::vector<Logvar>{X, T}));
    EXPECT_EQ(worlds[j].constraints[2].tuples(), c2[j]);
  }
}

TEST(Evaluate, TopProgramGivesOneUnweightedWorld) {
  auto prog = parse_program(io::read_file("data/epidemic/top.dl"));
  auto worlds = evaluate(prog, epidemic_template(), people({Constant("serum1"), Constant("serum2")}));
  ASSERT_EQ(worlds.size(), 1u);
  EXPECT_FALSE(worlds[0].weighted);
  EXPECT_TRUE(worlds[0].constraints[2].is_extensional());
  EXPECT_EQ(worlds[0].constraints[2].size(), 6u);
  auto u = uniformize(worlds);
  EXPECT_DOUBLE_EQ(u[0].prob, 1.0);
  EXPECT_TRUE(u[0].weighted);
}

TEST(Evaluate, IndependentGroupsMultiply) {
  const char* text =
      "0.6 a(p).\n0.4 a(q).\n"
      "0.5 b(u).\n0.3 b(v).\n0.2 b(w).\n"
      "sel(X) :- a(X).\nsel(X) :- b(X).\n"
      "constraint g <- sel(X).";
  auto prog = parse_program(text);
  auto g = Parfactor("g", PotentialTable({liftu::testing::prv("R", {"X"})}, Eigen::ArrayXd::Ones(2)), Constraint::empty({X}));
  TemplateModel tmpl(std::vector<Parfactor>{g});
  DomainWorld dw;
  dw.domains[X] = {Constant("p"), Constant("q"), Constant("u")};
  auto worlds = evaluate(prog, tmpl, dw);
  ASSERT_EQ(worlds.size(), 6u);

  // Brute force over the two choices.
  const std::vector<std::pair<std::string, double>> as{{"p", 0.6}, {"q", 0.4}};
  const std::vector<std::pair<std::string, double>> bs{{"u", 0.5}, {"v", 0.3}, {"w", 0.2}};
  std::vector<std::pair<double, std::set<std::string>>> expected;
  for (const auto& [a, pa] : as)
    for (const auto& [b, pb] : bs) expected.push_back({pa * pb, {a, b}});
  double total = 0.0;
  for (std::size_t j = 0; j < worlds.size(); ++j) {
    if (j > 0) {
      EXPECT_GE(worlds[j - 1].prob, worlds[j].prob);
    }
    total += worlds[j].prob;
    std::set<std::string> got;
    for (const auto& t : worlds[j].constraints[0].tuples()) got.insert(t[0].name);
    auto it = std::find_if(expected.begin(), expected.end(), [&](const auto& e) { return e.second == got; });
    ASSERT_NE(it, expected.end());
    EXPECT_NEAR(worlds[j].prob, it->first, 1e-15);
    expected.erase(it);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Evaluate, EmptyBindingMarksWorldDegenerate) {
  auto prog = parse_program("0.5 c(a).\n0.5 c(b).\nsel(X) :- c(X) & keep(X).\nkeep(a).\nconstraint g <- sel(X).");
  auto g = Parfactor("g", PotentialTable({liftu::testing::prv("R", {"X"})}, Eigen::ArrayXd::Ones(2)), Constraint::empty({X}));
  DomainWorld dw;
  dw.domains[X] = {Constant("a"), Constant("b")};
  auto worlds = evaluate(prog, TemplateModel(std::vector<Parfactor>{g}), dw);
  ASSERT_EQ(worlds.size(), 2u);
  EXPECT_FALSE(worlds[0].degenerate);
  EXPECT_TRUE(worlds[1].degenerate);
  EXPECT_EQ(worlds[1].constraints[0].kind(), ConstraintKind::Empty);
}

TEST(Evaluate, BindingErrors) {
  auto tmpl = epidemic_template();
  auto dw = people({Constant("t1")});
  EXPECT_THROW(evaluate(parse_program("constraint g1 <- top."), tmpl, dw), ProgramError);
  EXPECT_THROW(evaluate(parse_program("constraint g1 <- top.\nconstraint g2 <- top.\nconstraint g9 <- top."), tmpl, dw),
               ProgramError);
  EXPECT_THROW(evaluate(parse_program("constraint g1 <- p(X, Y).\nconstraint g2 <- top."), tmpl, dw), ProgramError);
  DomainWorld no_x;
  no_x.domains[T] = {Constant("t1")};
  EXPECT_THROW(evaluate(parse_program("populate p/1 from X.\nconstraint g1 <- p(X).\nconstraint g2 <- top."), tmpl, no_x),
               DomainError);
}

TEST(Derive, MatchesNaiveFixpointOnRandomPrograms) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> consts{"a", "b", "c", "d"};
  const std::vector<std::string> vars{"X", "Y", "Z"};
  for (int round = 0; round < 60; ++round) {
    std::string text;
    Database base;
    for (int i = 0; i < 8; ++i) {
      auto u = consts[rng() % 4], v = consts[rng() % 4];
      text += "e(" + u + "," + v + ").\n";
      base["e/2"].insert({u, v});
      text += "f(" + u + ").\n";
      base["f/1"].insert({u});
    }
    // Layered rules: d<i> only uses e, f and d<j> for j < i.
    for (int i = 0; i < 3; ++i) {
      for (int r = 0; r < 2; ++r) {
        std::vector<std::string> body_preds{"e", "f"};
        for (int j = 0; j < i; ++j) body_preds.push_back("d" + std::to_string(j));
        std::string body;
        std::set<std::string> seen;
        std::size_t n = 1 + rng() % 3;
        for (std::size_t b = 0; b < n; ++b) {
          auto p = body_preds[rng() % body_preds.size()];
          std::string args;
          std::size_t arity = p == "f" ? 1 : 2;
          for (std::size_t k = 0; k < arity; ++k) {
            std::string t = rng() % 5 == 0 ? consts[rng() % 4] : vars[rng() % 3];
            if (t[0] >= 'A' && t[0] <= 'Z') seen.insert(t);
            args += (k ? "," : "") + t;
          }
          body += (b ? " & " : "") + p + "(" + args + ")";
        }
        std::vector<std::string> hv(seen.begin(), seen.end());
        std::string h1 = hv.empty() ? "a" : hv[rng() % hv.size()];
        std::string h2 = hv.empty() ? "b" : hv[rng() % hv.size()];
        text += "d" + std::to_string(i) + "(" + h1 + "," + h2 + ") :- " + body + ".\n";
      }
    }
    auto prog = parse_program(text);
    EXPECT_EQ(nonempty(derive(prog, base)), nonempty(naive_fixpoint(prog, base))) << text;
  }
}
