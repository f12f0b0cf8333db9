#pragma once
// Domain types shared across the pipeline: relational triplets, fact edits,
// decomposed sub-problems, alias groups, dataset instances and hop traces.
// Everything here is immutable after construction and safe to share.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memqa {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse failure in a file input; message carries the line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trims, collapses internal whitespace runs to single spaces and applies
// Unicode NFC. Case is preserved; use fold_key() for comparisons.
// Throws ValidationError when the result is empty.
std::string normalize_entity(std::string_view raw);

// Relation identifiers are lowercase snake-case tokens: whitespace runs
// become '_', ASCII letters are lowered, NFC applied.
std::string normalize_relation(std::string_view raw);

// Case-insensitive comparison key: normalize_entity + ASCII fold.
std::string fold_key(std::string_view entity);

// A (subject, relation, object) fact. Fields are normalized on construction
// and may not contain the "; " serialization separator.
struct Triplet {
  std::string subject;
  std::string relation;
  std::string object;

  Triplet(std::string_view subject_raw, std::string_view relation_raw,
          std::string_view object_raw);
};

// Canonical serialization "subject; relation; object". Bijective because
// fields containing "; " are rejected at construction.
std::string triplet_to_text(const Triplet& t);
Triplet parse_triplet_text(std::string_view text);

// A fact whose object is updated: (s, r, o -> o*).
struct FactEdit {
  std::string edit_id;
  std::string subject;
  std::string relation;
  std::optional<std::string> old_object;
  std::string new_object;

  FactEdit(std::string_view id, std::string_view subject_raw,
           std::string_view relation_raw,
           std::optional<std::string> old_object_raw,
           std::string_view new_object_raw);

  // Post-edit triplet text "subject; relation; new_object"; this is what
  // gets embedded into the memory.
  std::string edited_text() const;
};

// Groups of surface forms naming the same entity. Matching is reflexive,
// case-insensitive and whitespace-normalized.
class AliasTable {
 public:
  AliasTable() = default;

  // Registers a group; the group always includes the canonical form.
  void add_group(std::string_view canonical,
                 const std::vector<std::string>& aliases);

  // True when both strings fold to the same key or share an alias group.
  bool match(std::string_view a, std::string_view b) const;

  // All known surface forms for x (normalized), always including x itself.
  std::set<std::string> lookup(std::string_view x) const;

  // Deterministic representative key for x's alias group (x's own fold key
  // when ungrouped). Used for (subject, relation) dedup.
  std::string group_key(std::string_view x) const;

  bool empty() const { return groups_.empty(); }

  // canonical surface form -> alias surface forms (for serialization)
  const std::vector<std::pair<std::string, std::vector<std::string>>>&
  groups() const {
    return groups_;
  }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> groups_;
  std::vector<std::set<std::string>> group_keys_;
  std::map<std::string, std::vector<std::size_t>> membership_;
};

// Ordered edits with at most one edit per (subject, relation) after alias
// normalization; a later duplicate replaces the earlier edit.
class EditCollection {
 public:
  void ingest(FactEdit edit, const AliasTable& aliases);
  const std::vector<FactEdit>& edits() const { return edits_; }
  std::size_t size() const { return edits_.size(); }
  bool empty() const { return edits_.empty(); }

 private:
  std::vector<FactEdit> edits_;
};

// One hop of a decomposed question; slots are explicitly unbound rather
// than empty so "not yet resolved" is unambiguous.
struct SubProblem {
  std::optional<std::string> subject;
  std::string relation;
  std::optional<std::string> object;
  int hop_index = 1;
};

// "subject; relation; object" with "?" for unbound slots.
std::string subproblem_to_text(const SubProblem& p);

// Start entity plus the ordered sub-problems produced by decomposition.
struct ReasoningPath {
  std::string start_entity;
  std::vector<SubProblem> steps;

  // Throws unless steps are non-empty with contiguous hop indices 1..n,
  // the start entity is non-empty, and only step 1 has a bound subject.
  void validate() const;
};

// Dataset record: edits, question paraphrases, pre/post-edit answers and
// reasoning chains.
struct MultiHopInstance {
  std::string instance_id;
  std::vector<FactEdit> edits;
  std::vector<std::string> questions;
  std::string original_answer;
  std::string edited_answer;
  std::vector<Triplet> original_path;
  std::vector<Triplet> edited_path;
  std::set<std::string> answer_aliases;

  void validate() const;
};

// Where a hop's object came from.
enum class HopSource {
  memory_implication,
  memory_composition,
  memory_similarity,
  llm_fallback,
};

std::string_view to_string(HopSource s);

struct HopRecord {
  SubProblem sub_problem;
  HopSource source = HopSource::llm_fallback;
  // A hop jointly resolved by a composition run; the object lives on the
  // run's last hop.
  bool subsumed = false;
  std::optional<std::string> chosen_edit_id;
  std::optional<double> similarity_score;
  std::string resolved_object;
  // Retrieved candidate ids, populated only when tracing candidates is on.
  std::vector<std::string> candidate_ids;
};

struct ResolutionTrace {
  std::string question;
  std::string start_entity;
  std::vector<HopRecord> hops;
  std::string final_answer;
  bool failed = false;       // decomposition parse failure or safety abort
  std::string failure_detail;
};

}  // namespace memqa
