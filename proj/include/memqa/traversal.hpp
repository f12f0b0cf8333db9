#pragma once
// Iterative traversal over a decomposed reasoning path: each hop is answered
// from the edit memory when the candidate filter succeeds, otherwise by the
// target model, chaining resolved objects into the next hop's subject.

#include <string>

#include "memqa/core.hpp"
#include "memqa/edit_memory.hpp"
#include "memqa/gateway.hpp"
#include "memqa/rules.hpp"

namespace memqa {

struct TraversalConfig {
  double eta = 0.6;
  int top_k = 10;
  bool disable_implication = false;
  bool disable_composition = false;
  int max_hops = 8;
  ImplicationDirection direction =
      ImplicationDirection::subproblem_implies_edit;
  bool composition_single_hop = false;
  bool trace_candidates = false;  // record retrieved candidate ids per hop
};

// Decomposes the question and walks the path. Decomposition parse failures
// and the max-hop safety cap yield a trace with `failed` set instead of
// throwing; transport failures propagate.
ResolutionTrace solve(const std::string& question, const EditIndex& index,
                      const RuleSet& rules, const TargetGateway& gateway,
                      const TraversalConfig& config);

// Trace export consumed by the evaluation module and by humans debugging
// error categories.
std::string trace_to_json(const ResolutionTrace& trace);

}  // namespace memqa
