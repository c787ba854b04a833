#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "liftu/domains.hpp"
#include "liftu/lve.hpp"
#include "liftu/model.hpp"
#include "liftu/query.hpp"

namespace liftu::io {

/// Reads a whole file; throws InputError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Parfactors from model JSON:
///
///   {"randvars": [{"name": "Sick", "arity": 1, "range": ["false", "true"]}],
///    "parfactors": [{"name": "g1", "args": ["Epid", "Sick(X)"],
///                    "values": [...] | "random",
///                    "constraint": "empty" | "top" | {"logvars": [...], "tuples": [[...]]}}]}
///
/// Randvars not listed are boolean. "random" tables draw from a 64-bit
/// Mersenne Twister seeded with `seed`, in parfactor order. A missing
/// constraint means "empty".
std::vector<Parfactor> parse_parfactors(std::string_view json_text, std::uint64_t seed = 0);

/// The parfactors with every constraint replaced by Empty.
TemplateModel template_of(const std::vector<Parfactor>& parfactors);

/// Domain specification JSON:
///
///   {"logvars": {
///      "X": {"beta_binomial": {"alpha": 6, "beta": 15, "bins": 20, "step": 100},
///            "guaranteed": ["x1"], "prefix": "x"},
///      "T": {"constants": ["t1", "t2", "t3"]},
///      "Y": {"worlds": [{"size": 3, "prob": 0.5}, {"constants": ["a"], "prob": 0.5}]}}}
///
/// Beta-binomial entries need all four fields.
DomainSpec parse_domain_spec(std::string_view json_text);

/// "Sick(x1)" or "Epid".
GroundAtom parse_atom(std::string_view text);

/// "P(Sick(x1)[, Epid] [| Travel(x1)=true, ...])".
QuerySpec parse_query(std::string_view text);

/// "Sick(x1)=true".
EventProbe parse_event(std::string_view text);

}  // namespace liftu::io
