#include "memqa/traversal.hpp"

#include <nlohmann/json.hpp>

namespace memqa {

using nlohmann::json;

ResolutionTrace solve(const std::string& question, const EditIndex& index,
                      const RuleSet& rules, const TargetGateway& gateway,
                      const TraversalConfig& config) {
  ResolutionTrace trace;
  trace.question = question;

  DecompositionResult decomposition;
  try {
    decomposition = gateway.decompose(question);
  } catch (const DecompositionParseError& e) {
    trace.failed = true;
    trace.failure_detail = std::string("decomposition parse error: ") +
                           e.what();
    trace.final_answer = std::string(kModelUnknown);
    return trace;
  }

  trace.start_entity = decomposition.start_entity;
  std::vector<SubProblem> steps = decomposition.path.steps;
  if (!steps.front().subject.has_value()) {
    steps.front().subject = decomposition.start_entity;
  }
  const std::size_t hop_count = steps.size();
  if (hop_count > static_cast<std::size_t>(config.max_hops)) {
    trace.failed = true;
    trace.failure_detail = "path length " + std::to_string(hop_count) +
                           " exceeds max_hops " +
                           std::to_string(config.max_hops);
    trace.final_answer = std::string(kModelUnknown);
    return trace;
  }

  FilterContext context;
  context.aliases = &index.aliases();
  context.rules = &rules;
  context.direction = config.direction;
  context.disable_implication = config.disable_implication;
  context.disable_composition = config.disable_composition;
  context.composition_single_hop = config.composition_single_hop;

  trace.hops.resize(hop_count);
  std::string current_object;

  for (std::size_t j = 0; j < hop_count; ++j) {
    SubProblem& p = steps[j];
    if (j > 0) {
      p.subject = current_object;
    }
    context.path_relations.push_back(p.relation);
    context.bound_subjects.push_back(*p.subject);

    const std::vector<ScoredCandidate> candidates =
        index.retrieve_top_k(p, config.top_k);
    const std::optional<FilterOutcome> outcome =
        candidate_filter(config.eta, candidates, p, context);

    HopRecord& record = trace.hops[j];
    record.sub_problem = p;
    if (config.trace_candidates) {
      for (const auto& c : candidates) {
        record.candidate_ids.push_back(c.edit.edit_id);
      }
    }

    if (outcome.has_value()) {
      current_object = outcome->object;
      record.source = outcome->source;
      record.chosen_edit_id = outcome->chosen_edit_id;
      record.similarity_score = outcome->score;
      record.resolved_object = current_object;
      // A composition run subsumes the hops it jointly resolved; their
      // earlier records are replaced and the object stays on the last hop.
      if (outcome->source == HopSource::memory_composition &&
          outcome->hops_consumed > 1) {
        const std::size_t run_start =
            j + 1 - static_cast<std::size_t>(outcome->hops_consumed);
        for (std::size_t i = run_start; i < j; ++i) {
          HopRecord subsumed;
          subsumed.sub_problem = trace.hops[i].sub_problem;
          subsumed.source = HopSource::memory_composition;
          subsumed.subsumed = true;
          if (config.trace_candidates) {
            subsumed.candidate_ids = trace.hops[i].candidate_ids;
          }
          trace.hops[i] = std::move(subsumed);
        }
      }
    } else {
      current_object = gateway.answer_subproblem(p);
      record.source = HopSource::llm_fallback;
      record.resolved_object = current_object;
    }
  }

  trace.final_answer = current_object;
  return trace;
}

std::string trace_to_json(const ResolutionTrace& trace) {
  json hops = json::array();
  for (const auto& hop : trace.hops) {
    json h{{"hop_index", hop.sub_problem.hop_index},
           {"subject", hop.sub_problem.subject ? json(*hop.sub_problem.subject)
                                               : json(nullptr)},
           {"relation", hop.sub_problem.relation},
           {"source", std::string(to_string(hop.source))},
           {"subsumed", hop.subsumed},
           {"resolved_object", hop.resolved_object}};
    if (hop.chosen_edit_id) h["chosen_edit_id"] = *hop.chosen_edit_id;
    if (hop.similarity_score) h["similarity_score"] = *hop.similarity_score;
    if (!hop.candidate_ids.empty()) h["candidates"] = hop.candidate_ids;
    hops.push_back(std::move(h));
  }
  json doc{{"question", trace.question},
           {"start_entity", trace.start_entity},
           {"hops", hops},
           {"final_answer", trace.final_answer},
           {"failed", trace.failed}};
  if (trace.failed) doc["failure_detail"] = trace.failure_detail;
  return doc.dump();
}

}  // namespace memqa
