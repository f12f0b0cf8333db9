#pragma once
// Implication rules (r1 => r2), horn compositional rules
// (r1 & r2 & ... => head) and the three-stage candidate filter that picks a
// sub-problem's answer from the retrieved edits.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "memqa/core.hpp"
#include "memqa/edit_memory.hpp"

namespace memqa {

struct ImplicationRule {
  std::string antecedent;
  std::string consequent;
};

struct HornRule {
  std::vector<std::string> body;  // length >= 2, in chain order
  std::string head;
};

// The paper's text checks r(p) => r(e); its worked example reads more
// naturally as r(e) => r(p). Both are supported; the literal text is the
// default.
enum class ImplicationDirection {
  subproblem_implies_edit,  // r(p) => r(e)
  edit_implies_subproblem,  // r(e) => r(p)
};

class RuleSet {
 public:
  RuleSet() = default;
  RuleSet(std::vector<ImplicationRule> implications,
          std::vector<HornRule> compositions);

  // True iff (r1, r2) is in the reflexive-transitive closure of the
  // implication graph. Reflexivity holds for every relation, loaded or not.
  bool implies(const std::string& r1, const std::string& r2) const;

  const std::vector<ImplicationRule>& implications() const {
    return implications_;
  }
  const std::vector<HornRule>& compositions() const { return compositions_; }

 private:
  std::vector<ImplicationRule> implications_;
  std::vector<HornRule> compositions_;
  std::map<std::string, std::set<std::string>> closure_;  // non-reflexive part
};

// One rule per line, "#" comments. Implications: "antecedent => consequent".
// Horn rules: "r1 & r2 [& r3] => head". Malformed lines raise ParseError
// with the line number; duplicates are dropped.
RuleSet load_rules(std::istream& implication_source,
                   std::istream& composition_source);
RuleSet load_rules_from_files(const std::filesystem::path& implication_path,
                              const std::filesystem::path& composition_path);

// Stage 1: returns the edit's new object iff the sub-problem's subject
// alias-matches the edit's subject and the relation pair satisfies the
// configured implication direction.
std::optional<std::string> match_implication(
    const SubProblem& p, const FactEdit& e, const AliasTable& aliases,
    const RuleSet& rules,
    ImplicationDirection direction =
        ImplicationDirection::subproblem_implies_edit);

struct CompositionMatch {
  std::string object;
  int hops_consumed = 1;
};

// Stage 2: looks for a horn rule whose body equals a contiguous run of path
// relations ending at the current hop, with the edit supplying the rule's
// head from the entity bound at the run's start. `path_relations` covers
// hops 1..j and `bound_subjects[i]` is the subject bound at hop i+1
// (bound_subjects[0] is the start entity).
std::optional<CompositionMatch> match_composition(
    std::span<const std::string> path_relations,
    std::span<const std::string> bound_subjects, const SubProblem& p,
    const FactEdit& e, const AliasTable& aliases, const RuleSet& rules);

struct FilterContext {
  std::vector<std::string> path_relations;
  std::vector<std::string> bound_subjects;
  const AliasTable* aliases = nullptr;
  const RuleSet* rules = nullptr;
  ImplicationDirection direction =
      ImplicationDirection::subproblem_implies_edit;
  bool disable_implication = false;   // ablation -I
  bool disable_composition = false;   // ablation -C
  // Report composition matches as resolving only the current hop.
  bool composition_single_hop = false;
};

struct FilterOutcome {
  std::string object;
  HopSource source = HopSource::memory_similarity;
  int hops_consumed = 1;
  std::string chosen_edit_id;
  double score = 0.0;
};

// The candidate filter: per candidate in rank order, try implication, then
// composition, then the similarity threshold; the first success wins.
// Absent means the caller falls back to the target model.
std::optional<FilterOutcome> candidate_filter(
    double eta, const std::vector<ScoredCandidate>& candidates,
    const SubProblem& p, const FilterContext& context);

}  // namespace memqa
