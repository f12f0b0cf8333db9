#pragma once
// The structured knowledge retrieval index: fact edits embedded from their
// post-edit triplet text, answered by exact top-k dot-product scan.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "memqa/core.hpp"
#include "memqa/embedding.hpp"

namespace memqa {

struct ScoredCandidate {
  FactEdit edit;
  double score = 0.0;
  int rank = 0;  // 1-based
};

// Immutable after build; rebuilds produce a new value.
class EditIndex {
 public:
  // Embeds every edit from "subject; relation; new_object". Embedding
  // failures abort the build naming the offending edit_id.
  static EditIndex build(const EditCollection& edits,
                         std::shared_ptr<const Embedder> embedder,
                         AliasTable aliases);

  // Top-k candidates by similarity between the serialized query
  // ("subject; relation; ?") and the stored vectors. Scores are
  // non-increasing; ties break by ascending edit_id.
  std::vector<ScoredCandidate> retrieve_top_k(const SubProblem& query,
                                              int k) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<FactEdit>& entries() const { return entries_; }
  const AliasTable& aliases() const { return aliases_; }
  const Embedder& embedder() const { return *embedder_; }

  void save(const std::filesystem::path& path) const;
  // Refuses to load an index built under a different embedder fingerprint.
  static EditIndex load(const std::filesystem::path& path,
                        std::shared_ptr<const Embedder> embedder);

 private:
  EditIndex() = default;

  std::vector<FactEdit> entries_;
  Eigen::MatrixXd vectors_;  // one row per entry
  std::shared_ptr<const Embedder> embedder_;
  AliasTable aliases_;
};

// JSON Lines ingestion: one object per line with keys edit_id, subject,
// relation, old_object (nullable) and new_object. Errors cite the line.
EditCollection load_edits_jsonl(const std::filesystem::path& path,
                                const AliasTable& aliases);

// Alias file: JSON object mapping canonical form -> list of aliases.
AliasTable load_alias_table(const std::filesystem::path& path);

}  // namespace memqa
