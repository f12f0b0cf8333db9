#pragma once
// Dataset loading, the batch-edit experiment protocol, M-Acc / H-Acc
// computation, ablation runs and report generation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memqa/core.hpp"
#include "memqa/embedding.hpp"
#include "memqa/gateway.hpp"
#include "memqa/rules.hpp"
#include "memqa/traversal.hpp"

namespace memqa {

struct Dataset {
  std::string name;
  std::vector<MultiHopInstance> instances;
  AliasTable aliases;
};

// Schema errors name the instance index and field.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// 1 iff ANY question variant's answer matches the edited answer or one of
// its aliases. `answers` must cover every variant.
int m_acc(const MultiHopInstance& instance,
          const std::map<std::string, std::string>& answers);

// 1 iff EVERY hop of the edited path resolves to the matching object.
// A composition run counts as correct iff its final object matches; a
// path-shape mismatch (trace length != |edited path|) scores 0.
int h_acc(const MultiHopInstance& instance, const ResolutionTrace& trace,
          const AliasTable& aliases);

struct ExperimentConfig {
  std::optional<std::size_t> batch_k;  // nullopt = one batch with everything
  TraversalConfig traversal;
  std::uint64_t seed = 7;
  int rounds = 1;
  int jobs = 1;
  std::string config_fingerprint;
};

struct InstanceVerdict {
  std::string instance_id;
  int m_acc = 0;
  int h_acc = 0;
  // variant question -> (final answer, full trace)
  std::vector<std::pair<std::string, ResolutionTrace>> traces;
};

struct BatchResult {
  std::size_t size = 0;
  double m_acc = 0.0;
  double h_acc = 0.0;
};

struct RoundResult {
  std::vector<BatchResult> batches;
  std::vector<InstanceVerdict> verdicts;
  double m_acc = 0.0;
  double h_acc = 0.0;
  std::map<std::string, std::size_t> source_histogram;
};

struct Report {
  std::string dataset_name;
  std::string config_fingerprint;
  double m_acc = 0.0;  // mean over rounds of instance-weighted batch means
  double h_acc = 0.0;
  std::vector<RoundResult> rounds;
  std::map<std::string, std::size_t> source_histogram;
  bool aborted = false;
  std::string abort_reason;
};

// Shuffles instances with the seeded RNG, partitions them into batches of
// k, builds a fresh index per batch from the union of the batch's edits and
// solves every question variant. Hard gateway errors stop the run and mark
// the partial report aborted; decomposition parse failures only mark their
// instance incorrect.
Report run_experiment(const Dataset& dataset, const ExperimentConfig& config,
                      std::shared_ptr<const Embedder> embedder,
                      const RuleSet& rules, const TargetGateway& gateway);

struct AblationReports {
  Report full;
  Report no_implication;   // -I
  Report no_composition;   // -C
  Report no_rules;         // -IC
};

AblationReports ablate(const Dataset& dataset, const ExperimentConfig& base,
                       std::shared_ptr<const Embedder> embedder,
                       const RuleSet& rules, const TargetGateway& gateway);

std::string report_to_json(const Report& report);
// Plain-text summary table; one row per batch plus the aggregate.
std::string report_table(const Report& report);
std::string ablation_table(const AblationReports& reports);

}  // namespace memqa
