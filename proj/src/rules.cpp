#include "memqa/rules.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace memqa {

namespace {

std::string strip(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

[[noreturn]] void malformed(std::string_view kind, int line_number,
                            std::string_view line) {
  throw ParseError(std::string(kind) + " rule file line " +
                   std::to_string(line_number) + " is malformed: " +
                   std::string(line));
}

std::vector<std::string> split_on(const std::string& text,
                                  std::string_view sep) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    if (next == std::string::npos) {
      parts.push_back(strip(text.substr(pos)));
      return parts;
    }
    parts.push_back(strip(text.substr(pos, next - pos)));
    pos = next + sep.size();
  }
}

}  // namespace

RuleSet::RuleSet(std::vector<ImplicationRule> implications,
                 std::vector<HornRule> compositions)
    : implications_(std::move(implications)),
      compositions_(std::move(compositions)) {
  for (const auto& rule : implications_) {
    if (rule.antecedent == rule.consequent) {
      throw ValidationError("implication rule may not be reflexive: " +
                            rule.antecedent);
    }
  }
  for (const auto& rule : compositions_) {
    if (rule.body.size() < 2) {
      throw ValidationError("horn rule body must have at least two relations");
    }
    if (std::find(rule.body.begin(), rule.body.end(), rule.head) !=
        rule.body.end()) {
      throw ValidationError("horn rule head may not appear in its body: " +
                            rule.head);
    }
  }
  // Transitive closure by BFS from every antecedent; cycles are fine.
  std::map<std::string, std::vector<std::string>> graph;
  for (const auto& rule : implications_) {
    graph[rule.antecedent].push_back(rule.consequent);
  }
  for (const auto& [start, _] : graph) {
    std::set<std::string>& reach = closure_[start];
    std::deque<std::string> frontier{start};
    std::set<std::string> seen{start};
    while (!frontier.empty()) {
      const std::string node = std::move(frontier.front());
      frontier.pop_front();
      auto it = graph.find(node);
      if (it == graph.end()) continue;
      for (const auto& next : it->second) {
        if (seen.insert(next).second) {
          reach.insert(next);
          frontier.push_back(next);
        }
      }
    }
    reach.insert(start);
  }
}

bool RuleSet::implies(const std::string& r1, const std::string& r2) const {
  if (r1 == r2) return true;
  auto it = closure_.find(r1);
  return it != closure_.end() && it->second.count(r2) > 0;
}

RuleSet load_rules(std::istream& implication_source,
                   std::istream& composition_source) {
  std::vector<ImplicationRule> implications;
  std::vector<HornRule> compositions;
  std::string line;
  int line_number = 0;

  while (std::getline(implication_source, line)) {
    ++line_number;
    const std::string text = strip(line.substr(0, line.find('#')));
    if (text.empty()) continue;
    const auto parts = split_on(text, "=>");
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      malformed("implication", line_number, line);
    }
    ImplicationRule rule{normalize_relation(parts[0]),
                         normalize_relation(parts[1])};
    if (rule.antecedent == rule.consequent) {
      malformed("implication", line_number, line);
    }
    const bool duplicate = std::any_of(
        implications.begin(), implications.end(), [&](const auto& r) {
          return r.antecedent == rule.antecedent &&
                 r.consequent == rule.consequent;
        });
    if (!duplicate) implications.push_back(std::move(rule));
  }

  line_number = 0;
  while (std::getline(composition_source, line)) {
    ++line_number;
    const std::string text = strip(line.substr(0, line.find('#')));
    if (text.empty()) continue;
    const auto sides = split_on(text, "=>");
    if (sides.size() != 2 || sides[0].empty() || sides[1].empty()) {
      malformed("horn", line_number, line);
    }
    HornRule rule;
    rule.head = normalize_relation(sides[1]);
    for (const auto& part : split_on(sides[0], "&")) {
      if (part.empty()) malformed("horn", line_number, line);
      rule.body.push_back(normalize_relation(part));
    }
    if (rule.body.size() < 2 ||
        std::find(rule.body.begin(), rule.body.end(), rule.head) !=
            rule.body.end()) {
      malformed("horn", line_number, line);
    }
    const bool duplicate = std::any_of(
        compositions.begin(), compositions.end(), [&](const auto& r) {
          return r.head == rule.head && r.body == rule.body;
        });
    if (!duplicate) compositions.push_back(std::move(rule));
  }

  return RuleSet(std::move(implications), std::move(compositions));
}

RuleSet load_rules_from_files(const std::filesystem::path& implication_path,
                              const std::filesystem::path& composition_path) {
  std::ifstream implications(implication_path);
  if (!implication_path.empty() && !implications) {
    throw ValidationError("implication rule file not found: " +
                          implication_path.string());
  }
  std::ifstream compositions(composition_path);
  if (!composition_path.empty() && !compositions) {
    throw ValidationError("horn rule file not found: " +
                          composition_path.string());
  }
  return load_rules(implications, compositions);
}

std::optional<std::string> match_implication(const SubProblem& p,
                                             const FactEdit& e,
                                             const AliasTable& aliases,
                                             const RuleSet& rules,
                                             ImplicationDirection direction) {
  if (!p.subject.has_value()) return std::nullopt;
  if (!aliases.match(*p.subject, e.subject)) return std::nullopt;
  const bool implied =
      direction == ImplicationDirection::subproblem_implies_edit
          ? rules.implies(p.relation, e.relation)
          : rules.implies(e.relation, p.relation);
  if (!implied) return std::nullopt;
  return e.new_object;
}

std::optional<CompositionMatch> match_composition(
    std::span<const std::string> path_relations,
    std::span<const std::string> bound_subjects, const SubProblem& p,
    const FactEdit& e, const AliasTable& aliases, const RuleSet& rules) {
  const std::size_t hop = path_relations.size();
  if (hop == 0 || path_relations.back() != p.relation) return std::nullopt;
  if (bound_subjects.size() < hop) return std::nullopt;

  for (const HornRule& rule : rules.compositions()) {
    if (e.relation != rule.head) continue;
    const std::size_t m = rule.body.size();
    if (m > hop) continue;
    const std::size_t run_start = hop - m;  // 0-based hop index of run start
    bool body_matches = true;
    for (std::size_t i = 0; i < m; ++i) {
      if (path_relations[run_start + i] != rule.body[i]) {
        body_matches = false;
        break;
      }
    }
    if (!body_matches) continue;
    if (!aliases.match(bound_subjects[run_start], e.subject)) continue;
    return CompositionMatch{e.new_object, static_cast<int>(m)};
  }
  return std::nullopt;
}

std::optional<FilterOutcome> candidate_filter(
    double eta, const std::vector<ScoredCandidate>& candidates,
    const SubProblem& p, const FilterContext& context) {
  for (const ScoredCandidate& candidate : candidates) {
    if (!context.disable_implication) {
      if (auto object = match_implication(p, candidate.edit, *context.aliases,
                                          *context.rules, context.direction)) {
        return FilterOutcome{std::move(*object),
                             HopSource::memory_implication, 1,
                             candidate.edit.edit_id, candidate.score};
      }
    }
    if (!context.disable_composition) {
      if (auto match = match_composition(
              context.path_relations, context.bound_subjects, p,
              candidate.edit, *context.aliases, *context.rules)) {
        return FilterOutcome{
            std::move(match->object), HopSource::memory_composition,
            context.composition_single_hop ? 1 : match->hops_consumed,
            candidate.edit.edit_id, candidate.score};
      }
    }
    if (candidate.score >= eta) {
      return FilterOutcome{candidate.edit.new_object,
                           HopSource::memory_similarity, 1,
                           candidate.edit.edit_id, candidate.score};
    }
  }
  return std::nullopt;
}

}  // namespace memqa
